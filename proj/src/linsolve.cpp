#include "porodiff/linsolve.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace porodiff {

SparseLUSolver::SparseLUSolver(const SpMat& A) : n_(static_cast<int>(A.rows())) {
  if (A.rows() != A.cols())
    throw std::invalid_argument("SparseLUSolver: matrix must be square");
  input_nnz_ = A.nonZeros();
  SpMat Ac = A;
  Ac.makeCompressed();
  lu_.analyzePattern(Ac);
  lu_.factorize(Ac);
  if (lu_.info() != Eigen::Success)
    throw std::runtime_error("SparseLUSolver: numerically singular matrix (" +
                             lu_.lastErrorMessage() + ")");
  fill_ratio_ = input_nnz_ > 0
                    ? double(lu_.nnzL() + lu_.nnzU()) / double(input_nnz_)
                    : 0.0;
}

Eigen::VectorXd SparseLUSolver::solve(const Eigen::VectorXd& b) const {
  if (b.size() != n_)
    throw std::invalid_argument("SparseLUSolver::solve: dimension mismatch");
  return lu_.solve(b);
}

BorderedSolver::BorderedSolver(const SpMat& A0, int m, Eigen::VectorXd a,
                               Eigen::VectorXd b)
    : A0_(A0), m_(m), a_(std::move(a)), b_(std::move(b)) {
  if (a_.size() != A0_.rows() || b_.size() != A0_.rows())
    throw std::invalid_argument("BorderedSolver: border dimension mismatch");
  a_[m_] = -1.0;  // cancels the dummy diagonal so the true corner is zero
  b_[m_] = 0.0;
  try {
    core_lu_ = std::make_unique<SparseLUSolver>(A0_);
    Zu_.resize(A0_.rows(), 2);
    Eigen::VectorXd em = Eigen::VectorXd::Zero(A0_.rows());
    em[m_] = 1.0;
    Zu_.col(0) = core_lu_->solve(a_);
    Zu_.col(1) = core_lu_->solve(em);
    // capacitance I + V^T A0^{-1} U with U = [a, e_m], V = [e_m, b]
    cap_(0, 0) = 1.0 + Zu_(m_, 0);
    cap_(0, 1) = Zu_(m_, 1);
    cap_(1, 0) = b_.dot(Zu_.col(0));
    cap_(1, 1) = 1.0 + b_.dot(Zu_.col(1));
    if (!Zu_.allFinite() || !cap_.allFinite() || std::abs(cap_.determinant()) < 1e-300)
      core_lu_.reset();
  } catch (const std::runtime_error&) {
    core_lu_.reset();  // singular core: direct bordered factorization instead
  }
  if (!core_lu_) build_fallback();
}

Eigen::VectorXd BorderedSolver::apply(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y = A0_ * x;
  y += a_ * x[m_];
  y[m_] += b_.dot(x);
  return y;
}

Eigen::VectorXd BorderedSolver::eliminate(const Eigen::VectorXd& rhs) const {
  const Eigen::VectorXd y = core_lu_->solve(rhs);
  Eigen::Vector2d vty(y[m_], b_.dot(y));
  const Eigen::Vector2d c = cap_.fullPivLu().solve(vty);
  return y - Zu_ * c;
}

void BorderedSolver::build_fallback() const {
  std::vector<Triplet> trip;
  for (int k = 0; k < A0_.outerSize(); ++k)
    for (SpMat::InnerIterator it(A0_, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (int i = 0; i < A0_.rows(); ++i) {
    if (a_[i] != 0.0) trip.emplace_back(i, m_, a_[i]);
    if (b_[i] != 0.0) trip.emplace_back(m_, i, b_[i]);
  }
  SpMat full = compress(static_cast<int>(A0_.rows()), static_cast<int>(A0_.cols()), trip);
  full_lu_ = std::make_unique<SparseLUSolver>(full);
}

Eigen::VectorXd BorderedSolver::solve(const Eigen::VectorXd& rhs) const {
  if (core_lu_) {
    Eigen::VectorXd x = eliminate(rhs);
    const double scale = rhs.norm() + 1.0;
    for (int it = 0; it < 3; ++it) {
      const Eigen::VectorXd r = rhs - apply(x);
      if (r.norm() <= 1e-13 * scale) return x;
      x += eliminate(r);
    }
    if ((rhs - apply(x)).norm() <= 1e-10 * scale) return x;
    // elimination stagnated, e.g. a numerically singular core
  }
  if (!full_lu_) build_fallback();
  return full_lu_->solve(rhs);
}

SpMat compress(int rows, int cols, std::vector<Triplet>& triplets) {
  SpMat A(rows, cols);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.prune([](const Eigen::Index&, const Eigen::Index&, const double& v) {
    return std::abs(v) > 1e-300;
  });
  A.makeCompressed();
  return A;
}

void write_matrix_market(const SpMat& A, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_matrix_market: cannot open " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << A.rows() << " " << A.cols() << " " << A.nonZeros() << "\n";
  out.precision(17);
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpMat::InnerIterator it(A, k); it; ++it)
      out << it.row() + 1 << " " << it.col() + 1 << " " << it.value() << "\n";
}

}  // namespace porodiff
