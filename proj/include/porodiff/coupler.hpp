#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "porodiff/forms.hpp"
#include "porodiff/linsolve.hpp"

namespace porodiff {

struct SolverOptions {
  enum class Mode { Picard, Newton };
  Mode mode = Mode::Newton;
  double tol_rel = 1e-8;   // on the H1 norm of the tracer increment
  double tol_abs = 1e-12;  // on the residual, relative to the load norm
  int max_iter = 25;
  double relaxation = 1.0;  // in (0, 1]

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double increment = 0.0;  // H1 norm of the omega update
  double residual = 0.0;
  double seconds = 0.0;
};

struct CoupledSolution {
  PoroState poro;
  Eigen::VectorXd omega;  // full dof numbering
  bool converged = false;
  int iterations = 0;
  std::vector<IterationRecord> log;
  std::string failure;
};

// Drives the two-way coupled system on one mesh: the poroelastic block with
// tracer load H_omega against the nonlinear tracer diffusion with
// stress-dependent coefficient. Steady runs use storage_scale = 1 and no
// history; backward Euler steps set storage_scale = 1/dt and the previous
// step as history.
class CoupledDriver {
 public:
  CoupledDriver(const Mesh& mesh, PoroSpaces& sp, FESpace& omega_space,
                const MaterialParams& par, const DiffusionLaw& law,
                const SolverOptions& opt, double storage_scale = 1.0);

  // Boundary loads are configured on the poro system before finalize().
  PoroSystem& poro() { return poro_; }
  void finalize();

  void set_history(const PoroState& poro_prev, const Eigen::VectorXd& omega_prev);
  void clear_history();

  // Operator S_h: poroelastic solve with the tracer fixed.
  PoroState poro_solve(const Eigen::VectorXd& omega_full);
  // Operator S~_h: tracer solve with the stress fixed.
  Eigen::VectorXd diffusion_solve(const Eigen::VectorXd& sigma_coeffs);

  CoupledSolution solve(const CoupledSolution* initial = nullptr);

  // Monolithic Newton residual and Jacobian at the given state (over the
  // stacked free dofs: poro free + multiplier, then omega free).
  Eigen::VectorXd coupled_residual(const PoroState& st,
                                   const Eigen::VectorXd& omega_full);
  SpMat coupled_jacobian(const PoroState& st, const Eigen::VectorXd& omega_full);

  Eigen::VectorXd stack_free(const PoroState& st, const Eigen::VectorXd& omega_full) const;
  void unstack_free(const Eigen::VectorXd& x, PoroState& st,
                    Eigen::VectorXd& omega_full) const;

  double omega_h1_norm(const Eigen::VectorXd& omega_full) const;
  const FESpace& omega_space() const { return *om_; }
  const PoroSpaces& spaces() const { return *sp_; }
  const MaterialParams& params() const { return par_; }
  const DiffusionLaw& law() const { return law_; }
  LawDiagnostics& law_diagnostics() { return law_diag_; }
  int quad_degree() const { return poro_.quad_degree(); }
  double storage_scale() const { return storage_scale_; }
  double load_norm() const { return load_norm_; }

 private:
  const Mesh* mesh_;
  PoroSpaces* sp_;
  FESpace* om_;
  MaterialParams par_;
  DiffusionLaw law_;
  SolverOptions opt_;
  double storage_scale_;

  PoroSystem poro_;
  SpMat Ht_;
  std::unique_ptr<SparseLUSolver> poro_lu_;
  std::unique_ptr<BorderedSolver> poro_blu_;
  SpMat omega_gram_;  // H1 inner product on the tracer space
  std::optional<Eigen::VectorXd> omega_history_;

  LawDiagnostics law_diag_;
  double load_norm_ = 1.0;

  Eigen::VectorXd omega_residual_full(const Eigen::VectorXd& sigma_coeffs,
                                      const Eigen::VectorXd& omega_full);
  SpMat newton_core(const PoroState& st, const Eigen::VectorXd& omega_full);
  Eigen::VectorXd expand_omega(const Eigen::VectorXd& omega_free) const;
  Eigen::VectorXd omega_bc_values() const;

  CoupledSolution solve_picard(const CoupledSolution* initial);
  CoupledSolution solve_newton(const CoupledSolution* initial);
};

// One backward-Euler transient pass. Boundary ramps are applied through
// `update_boundary(t)` which refreshes essential values and natural loads at
// the implicit time level before each step solve.
struct TransientScenario {
  double dt = 50.0;
  double t_end = 1800.0;
  std::function<void(double)> update_boundary;  // may be empty
  std::function<void(double, int, const CoupledSolution&)> on_step;  // may be empty
};

// Marches `state` (entering as the initial condition) to t_end; throws with
// the time stamp if a step fails to converge.
void solve_transient(CoupledDriver& driver, const TransientScenario& scen,
                     CoupledSolution& state);

}  // namespace porodiff
