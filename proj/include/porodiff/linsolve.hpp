#pragma once

#include <memory>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/LU>
#include <Eigen/SparseLU>

namespace porodiff {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Direct sparse LU with fill-reducing column ordering. Single-threaded and
// deterministic; callers may hold several factorizations at once.
class SparseLUSolver {
 public:
  explicit SparseLUSolver(const SpMat& A);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  int dimension() const { return n_; }
  // Nonzeros of the factors over nonzeros of the input.
  double fill_ratio() const { return fill_ratio_; }

 private:
  int n_;
  long input_nnz_;
  double fill_ratio_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
};

// Solves systems whose matrix is A0 + a e_m^T + e_m b^T, i.e. a sparse core
// carrying a dummy unit diagonal at index m, bordered by a dense column a and
// row b (a[m] = -1 cancels the dummy; the true corner entry is zero). The
// factorization works on the sparse core only, keeping the dense border out
// of the fill; block elimination plus iterative refinement recovers the
// bordered solution. When refinement cannot reach tolerance (singular core,
// e.g. the exact incompressible limit) the solver falls back to a direct
// factorization of the assembled bordered matrix.
class BorderedSolver {
 public:
  BorderedSolver(const SpMat& A0, int m, Eigen::VectorXd a, Eigen::VectorXd b);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

 private:
  SpMat A0_;
  int m_;
  Eigen::VectorXd a_, b_;
  std::unique_ptr<SparseLUSolver> core_lu_;
  Eigen::Matrix<double, Eigen::Dynamic, 2> Zu_;  // core^{-1} [a, e_m]
  Eigen::Matrix2d cap_;                          // capacitance
  mutable std::unique_ptr<SparseLUSolver> full_lu_;  // lazy fallback

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;      // true matrix action
  Eigen::VectorXd eliminate(const Eigen::VectorXd& rhs) const;
  void build_fallback() const;
};

// Drops explicit near-zeros and sums duplicates.
SpMat compress(int rows, int cols, std::vector<Triplet>& triplets);

// MatrixMarket coordinate-format export for offline debugging.
void write_matrix_market(const SpMat& A, const std::string& path);

}  // namespace porodiff
