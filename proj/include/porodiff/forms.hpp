#pragma once

#include <array>
#include <functional>
#include <optional>

#include "porodiff/constitutive.hpp"
#include "porodiff/linsolve.hpp"
#include "porodiff/mesh.hpp"
#include "porodiff/spaces.hpp"

namespace porodiff {

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;

inline ScalarField zero_scalar() { return [](const Vec2&) { return 0.0; }; }
inline VectorField zero_vector() { return [](const Vec2&) { return Vec2::Zero(); }; }

// Physical constants and source fields. lambda_s enters every operator only
// through 1/lambda_s, stored directly so the incompressible limit is the
// exact value inv_lambda_s = 0.
struct MaterialParams {
  double mu_s = 1.0;
  double inv_lambda_s = 1.0;
  double c0 = 1.0;
  double alpha = 1.0;
  Mat2 kappa = Mat2::Identity();
  double mu_f = 1.0;
  double rho_s = 1.0;
  double rho_f = 1.0;
  Vec2 g = Vec2::Zero();
  double beta = 1.0;
  double phi = 0.5;
  ScalarField m = zero_scalar();
  ScalarField ell = zero_scalar();
  VectorField f = zero_vector();

  void set_lambda(double lambda_s);
  double lambda_s() const;
  void validate() const;

  // Example-1 configuration: every constant 1 except phi = 0.5, g = 0.
  static MaterialParams unity();
};

// The stress tensor as two H(div)-conforming row fields with a unified dof
// numbering (row 0 first).
struct StressSpace {
  FESpace rows[2];

  StressSpace(const Mesh& mesh, int k)
      : rows{FESpace(mesh, ElementFamily::BdmRow, k),
             FESpace(mesh, ElementFamily::BdmRow, k)} {}

  int row_ndofs() const { return rows[0].ndofs(); }
  int ndofs() const { return 2 * row_ndofs(); }
  int n_free() const { return rows[0].n_free() + rows[1].n_free(); }
  int row_of(int dof) const { return dof < row_ndofs() ? 0 : 1; }
  int local_of(int dof) const { return dof % row_ndofs(); }
  bool is_masked(int dof) const { return rows[row_of(dof)].is_masked(local_of(dof)); }
  double masked_value(int dof) const {
    return rows[row_of(dof)].masked_value(local_of(dof));
  }
  int free_index(int dof) const {
    const int r = row_of(dof);
    const int fi = rows[r].free_index(local_of(dof));
    if (fi < 0) return -1;
    return r == 0 ? fi : rows[0].n_free() + fi;
  }

  // Masks the canonical facet moments of both rows to the prescribed traction
  // (sigma n = traction) on the selected facets.
  void apply_traction(const FacetPredicate& pred, const VectorField& traction);
  void update_traction_values(const FacetPredicate& pred, const VectorField& traction);
};

// All unknowns of the poroelastic block in the fixed ordering
// (t, sigma, ptilde, u, gamma, p | multiplier).
struct PoroSpaces {
  FESpace t, pt, u, gam, p;
  StressSpace sigma;
  TraceConstraint trace;
  int k;

  PoroSpaces(const Mesh& mesh, int order)
      : t(mesh, ElementFamily::DGTensor, order),
        pt(mesh, ElementFamily::DGScalar, order),
        u(mesh, ElementFamily::DGVector, order),
        gam(mesh, ElementFamily::DGSkew, order),
        p(mesh, ElementFamily::LagrangeP, order),
        sigma(mesh, order),
        k(order) {}

  // Free-dof offsets of (t, sigma, pt, u, gam, p); the multiplier, when
  // active, is the last unknown.
  std::array<int, 6> offsets() const;
  int total_free() const;
};

// Coefficient vectors in full dof numbering (masked entries hold their
// prescribed values).
struct PoroState {
  Eigen::VectorXd t, sigma, pt, u, gam, p;
  double mult = 0.0;

  static PoroState zeros(const PoroSpaces& sp);
};

// Sparse blocks of the variational system, assembled in full dof numbering.
// Block names give (test space x trial space):
//   A    t x t      2 mu_s (t, r)
//   Bs   sig x t    -(r, tau)
//   Bp   pt x t     -(tr r, qt)
//   B1u  u x sig    -(div tau, v)
//   B1g  gam x sig  -(tau, eta)
//   C    pt x pt    inv_lambda (pt, qt)
//   B2   p x pt     alpha inv_lambda (pt, q)
//   Mp   p x p      (c0 + alpha^2 inv_lambda) (p, q)
//   Kp   p x p      1/mu_f (kappa grad p, grad q)
struct PoroBlocks {
  SpMat A, Bs, Bp, B1u, B1g, C, B2, Mp, Kp;
  Eigen::VectorXd trace_vec;  // integral of tr(tau_i) over sigma dofs
  Eigen::VectorXd F_u;        // rho_s (f, v)
  Eigen::VectorXd G_p;        // -(m, q) + rho_f (kappa g, grad q)
  Eigen::VectorXd load_sig;   // -<tau n, u*> on selected facets
  int quad_degree = 0;
};

PoroBlocks assemble_poro_blocks(const Mesh& mesh, const PoroSpaces& sp,
                                const MaterialParams& par, int quad_degree = -1);

// Natural boundary loads ("imposed naturally"): displacement trace into the
// stress-test equation, Darcy flux into the pressure equation.
void add_displacement_boundary_load(const Mesh& mesh, const PoroSpaces& sp,
                                    const FacetPredicate& pred,
                                    const VectorField& u_exact,
                                    Eigen::VectorXd& load_sig, int quad_degree);
void add_flux_boundary_load(const Mesh& mesh, const PoroSpaces& sp,
                            const FacetPredicate& pred, const VectorField& flux,
                            Eigen::VectorXd& G_p, int quad_degree);

// Coupling load matrix: Ht (t x omega) with entries beta (tr r_i, theta_j);
// H_omega = Ht * omega_coeffs.
SpMat assemble_coupling_Ht(const Mesh& mesh, const FESpace& t_space,
                           const FESpace& omega_space, double beta, int quad_degree);

// Newton block (omega x sigma): ( dD/dsigma[tau_j] grad omega_h, grad theta_i ).
SpMat assemble_diffusion_sigma_jacobian(const Mesh& mesh, const FESpace& omega_space,
                                        const StressSpace& sigma_space,
                                        const Eigen::VectorXd& sigma_coeffs,
                                        const Eigen::VectorXd& omega_coeffs,
                                        const DiffusionLaw& law, int quad_degree,
                                        LawDiagnostics* diag = nullptr);

// Diffusion operator pieces: Asig = storage_scale phi (w, th) + (D grad w, grad th),
// J = phi (ell, th). sigma_coeffs may be null for the zero-stress state.
struct DiffusionBlocks {
  SpMat Mass;   // phi (w, th)
  SpMat Stiff;  // (D(sigma_h) grad w, grad th)
  Eigen::VectorXd J;
  LawDiagnostics diag;
};

DiffusionBlocks assemble_diffusion(const Mesh& mesh, const FESpace& omega_space,
                                   const DiffusionLaw& law,
                                   const StressSpace* sigma_space,
                                   const Eigen::VectorXd* sigma_coeffs, double phi,
                                   const ScalarField& ell, int quad_degree);

// Monolithic poroelastic system over free dofs (+ the trace multiplier):
// fixed matrix and load, plus the omega-dependent coupling load.
class PoroSystem {
 public:
  PoroSystem(const Mesh& mesh, PoroSpaces& sp, const MaterialParams& par,
             int quad_degree = -1, double storage_scale = 1.0);

  const PoroBlocks& blocks() const { return blocks_; }
  Eigen::VectorXd& load_sig() { return blocks_.load_sig; }
  Eigen::VectorXd& G_p() { return blocks_.G_p; }
  int quad_degree() const { return blocks_.quad_degree; }

  // Compose the free-dof matrix. Call once after all boundary loads are in
  // place; the matrix does not depend on essential values, time ramps, omega,
  // or history, so one factorization serves a whole transient run.
  void compose(const SpMat& Ht);

  // Previous time-step state for backward Euler (null for steady).
  void set_history(const PoroState* history);

  // Core matrix: when the trace constraint is active the multiplier slot
  // carries a dummy unit diagonal and the dense border lives in border().
  const SpMat& matrix() const { return K_; }
  bool bordered() const { return sp_->trace.active; }
  int border_index() const { return n_free_ - 1; }
  const Eigen::VectorXd& border() const { return border_; }
  Eigen::VectorXd rhs(const Eigen::VectorXd& omega_full) const;
  Eigen::VectorXd restrict_state(const PoroState& s) const;
  PoroState expand(const Eigen::VectorXd& x_free) const;
  // Free-row residual of the blocks at the given full-numbered state.
  Eigen::VectorXd residual(const PoroState& s, const Eigen::VectorXd& omega_full) const;

  int n_free() const { return n_free_; }
  const PoroSpaces& spaces() const { return *sp_; }
  double storage_scale() const { return storage_scale_; }

 private:
  PoroSpaces* sp_;
  PoroBlocks blocks_;
  SpMat Ht_;
  SpMat K_;
  Eigen::VectorXd border_;
  double storage_scale_;
  int n_free_ = 0;
  std::optional<PoroState> history_;
};

// Structural residual helpers used by the verification suites.
double divergence_residual_norm(const Mesh& mesh, const PoroSpaces& sp,
                                const Eigen::VectorXd& sigma_coeffs,
                                const VectorField& f, double rho_s, int quad_degree);
double skew_residual_norm(const PoroSpaces& sp, const PoroBlocks& blocks,
                          const Eigen::VectorXd& sigma_coeffs);
double trace_constraint_residual(const PoroBlocks& blocks,
                                 const Eigen::VectorXd& sigma_coeffs, double target);

// Evaluate a stress field (both rows) at physical points of one cell.
void eval_sigma(const StressSpace& sigma_space, const Eigen::VectorXd& sigma_coeffs,
                int cell, const PointList& pts, std::vector<Mat2>& out);

int default_quad_degree(int k);

}  // namespace porodiff
