#include "porodiff/coupler.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace porodiff {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Restriction of a sparse block to free rows/cols given index maps.
template <class RowFree, class ColFree>
void append_reduced(std::vector<Triplet>& trip, const SpMat& M, double scale,
                    int row_off, int col_off, RowFree row_free, ColFree col_free) {
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      const int fi = row_free(static_cast<int>(it.row()));
      if (fi < 0) continue;
      const int fj = col_free(static_cast<int>(it.col()));
      if (fj < 0) continue;
      trip.emplace_back(row_off + fi, col_off + fj, scale * it.value());
    }
}

}  // namespace

void SolverOptions::validate() const {
  if (!(tol_rel > 0.0) || !(tol_abs > 0.0))
    throw std::invalid_argument("SolverOptions: tolerances must be positive");
  if (max_iter < 1) throw std::invalid_argument("SolverOptions: max_iter must be >= 1");
  if (!(relaxation > 0.0) || relaxation > 1.0)
    throw std::invalid_argument("SolverOptions: relaxation must lie in (0, 1]");
}

CoupledDriver::CoupledDriver(const Mesh& mesh, PoroSpaces& sp, FESpace& omega_space,
                             const MaterialParams& par, const DiffusionLaw& law,
                             const SolverOptions& opt, double storage_scale)
    : mesh_(&mesh),
      sp_(&sp),
      om_(&omega_space),
      par_(par),
      law_(law),
      opt_(opt),
      storage_scale_(storage_scale),
      poro_(mesh, sp, par, -1, storage_scale) {
  opt_.validate();
}

void CoupledDriver::finalize() {
  const int qd = poro_.quad_degree();
  Ht_ = assemble_coupling_Ht(*mesh_, sp_->t, *om_, par_.beta, qd);
  poro_.compose(Ht_);
  if (poro_.bordered())
    poro_blu_ = std::make_unique<BorderedSolver>(poro_.matrix(), poro_.border_index(),
                                                 poro_.border(), poro_.border());
  else
    poro_lu_ = std::make_unique<SparseLUSolver>(poro_.matrix());

  // H1 Gram on the tracer space (unit coefficients).
  DiffusionLaw unit;
  unit.kind = LawKind::Constant;
  unit.D0 = 1.0;
  const DiffusionBlocks gram =
      assemble_diffusion(*mesh_, *om_, unit, nullptr, nullptr, 1.0, zero_scalar(), qd);
  omega_gram_ = gram.Mass + gram.Stiff;

  const Eigen::VectorXd rhs0 = poro_.rhs(Eigen::VectorXd::Zero(om_->ndofs()));
  load_norm_ = rhs0.norm() + 1.0;
}

void CoupledDriver::set_history(const PoroState& poro_prev,
                                const Eigen::VectorXd& omega_prev) {
  poro_.set_history(&poro_prev);
  omega_history_ = omega_prev;
}

void CoupledDriver::clear_history() {
  poro_.set_history(nullptr);
  omega_history_.reset();
}

double CoupledDriver::omega_h1_norm(const Eigen::VectorXd& omega_full) const {
  return std::sqrt(omega_full.dot(omega_gram_ * omega_full));
}

PoroState CoupledDriver::poro_solve(const Eigen::VectorXd& omega_full) {
  if (!poro_lu_ && !poro_blu_)
    throw std::logic_error("CoupledDriver: finalize() not called");
  const Eigen::VectorXd rhs = poro_.rhs(omega_full);
  const Eigen::VectorXd x = poro_blu_ ? poro_blu_->solve(rhs) : poro_lu_->solve(rhs);
  if (!x.allFinite())
    throw std::runtime_error(
        "CoupledDriver: poroelastic solve produced non-finite values");
  return poro_.expand(x);
}

Eigen::VectorXd CoupledDriver::omega_bc_values() const {
  Eigen::VectorXd bc = Eigen::VectorXd::Zero(om_->ndofs());
  for (int d = 0; d < om_->ndofs(); ++d)
    if (om_->is_masked(d)) bc[d] = om_->masked_value(d);
  return bc;
}

Eigen::VectorXd CoupledDriver::expand_omega(const Eigen::VectorXd& omega_free) const {
  Eigen::VectorXd full = omega_bc_values();
  for (int d = 0; d < om_->ndofs(); ++d)
    if (!om_->is_masked(d)) full[d] = omega_free[om_->free_index(d)];
  return full;
}

Eigen::VectorXd CoupledDriver::omega_residual_full(const Eigen::VectorXd& sigma_coeffs,
                                                   const Eigen::VectorXd& omega_full) {
  const DiffusionBlocks db =
      assemble_diffusion(*mesh_, *om_, law_, &sp_->sigma, &sigma_coeffs, par_.phi,
                         par_.ell, poro_.quad_degree());
  law_diag_.clamp_count += db.diag.clamp_count;
  Eigen::VectorXd r =
      storage_scale_ * (db.Mass * omega_full) + db.Stiff * omega_full - db.J;
  if (omega_history_) r -= storage_scale_ * (db.Mass * (*omega_history_));
  return r;
}

Eigen::VectorXd CoupledDriver::diffusion_solve(const Eigen::VectorXd& sigma_coeffs) {
  const DiffusionBlocks db =
      assemble_diffusion(*mesh_, *om_, law_, &sp_->sigma, &sigma_coeffs, par_.phi,
                         par_.ell, poro_.quad_degree());
  law_diag_.clamp_count += db.diag.clamp_count;
  const SpMat Asig = storage_scale_ * db.Mass + db.Stiff;

  auto fidx = [this](int d) { return om_->free_index(d); };
  std::vector<Triplet> trip;
  append_reduced(trip, Asig, 1.0, 0, 0, fidx, fidx);
  SpMat Ared = compress(om_->n_free(), om_->n_free(), trip);

  Eigen::VectorXd rhs_full = db.J;
  if (omega_history_) rhs_full += storage_scale_ * (db.Mass * (*omega_history_));
  rhs_full -= Asig * omega_bc_values();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(om_->n_free());
  for (int d = 0; d < om_->ndofs(); ++d)
    if (!om_->is_masked(d)) rhs[om_->free_index(d)] = rhs_full[d];

  SparseLUSolver lu(Ared);
  const Eigen::VectorXd xf = lu.solve(rhs);
  if (!xf.allFinite())
    throw std::runtime_error("CoupledDriver: diffusion solve produced non-finite values");
  return expand_omega(xf);
}

Eigen::VectorXd CoupledDriver::stack_free(const PoroState& st,
                                          const Eigen::VectorXd& omega_full) const {
  const int np = sp_->total_free();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(np + om_->n_free());
  x.head(np) = poro_.restrict_state(st);
  for (int d = 0; d < om_->ndofs(); ++d)
    if (!om_->is_masked(d)) x[np + om_->free_index(d)] = omega_full[d];
  return x;
}

void CoupledDriver::unstack_free(const Eigen::VectorXd& x, PoroState& st,
                                 Eigen::VectorXd& omega_full) const {
  const int np = sp_->total_free();
  st = poro_.expand(x.head(np));
  omega_full = expand_omega(x.tail(om_->n_free()));
}

Eigen::VectorXd CoupledDriver::coupled_residual(const PoroState& st,
                                                const Eigen::VectorXd& omega_full) {
  const Eigen::VectorXd rp = poro_.residual(st, omega_full);
  const Eigen::VectorXd ro_full = omega_residual_full(st.sigma, omega_full);
  Eigen::VectorXd R = Eigen::VectorXd::Zero(rp.size() + om_->n_free());
  R.head(rp.size()) = rp;
  for (int d = 0; d < om_->ndofs(); ++d)
    if (!om_->is_masked(d)) R[rp.size() + om_->free_index(d)] = ro_full[d];
  return R;
}

SpMat CoupledDriver::newton_core(const PoroState& st,
                                 const Eigen::VectorXd& omega_full) {
  const int qd = poro_.quad_degree();
  const int np = sp_->total_free();
  const int no = om_->n_free();
  const auto off = sp_->offsets();

  const DiffusionBlocks db = assemble_diffusion(*mesh_, *om_, law_, &sp_->sigma,
                                                &st.sigma, par_.phi, par_.ell, qd);
  const SpMat Asig = storage_scale_ * db.Mass + db.Stiff;
  const SpMat Jos = assemble_diffusion_sigma_jacobian(
      *mesh_, *om_, sp_->sigma, st.sigma, omega_full, law_, qd, &law_diag_);

  std::vector<Triplet> trip;
  const SpMat& K = poro_.matrix();
  for (int k = 0; k < K.outerSize(); ++k)
    for (SpMat::InnerIterator it(K, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());

  auto om_free = [this](int d) { return om_->free_index(d); };
  auto t_free = [this](int d) { return sp_->t.free_index(d); };
  auto s_free = [this](int d) { return sp_->sigma.free_index(d); };

  // d(poro residual)/d(omega): the tracer load enters the strain test rows.
  append_reduced(trip, Ht_, -1.0, off[0], np, t_free, om_free);
  // d(tracer residual)/d(sigma) and /d(omega).
  append_reduced(trip, Jos, 1.0, np, off[1], om_free, s_free);
  append_reduced(trip, Asig, 1.0, np, np, om_free, om_free);

  return compress(np + no, np + no, trip);
}

SpMat CoupledDriver::coupled_jacobian(const PoroState& st,
                                      const Eigen::VectorXd& omega_full) {
  SpMat J = newton_core(st, omega_full);
  if (!poro_.bordered()) return J;
  // reinstate the true constraint border in place of the dummy diagonal
  const int m = poro_.border_index();
  std::vector<Triplet> trip;
  for (int k = 0; k < J.outerSize(); ++k)
    for (SpMat::InnerIterator it(J, k); it; ++it)
      if (it.row() != m || it.col() != m) trip.emplace_back(it.row(), it.col(), it.value());
  const Eigen::VectorXd& e = poro_.border();
  for (int i = 0; i < e.size(); ++i)
    if (e[i] != 0.0 && i != m) {
      trip.emplace_back(i, m, e[i]);
      trip.emplace_back(m, i, e[i]);
    }
  return compress(static_cast<int>(J.rows()), static_cast<int>(J.cols()), trip);
}

CoupledSolution CoupledDriver::solve(const CoupledSolution* initial) {
  return opt_.mode == SolverOptions::Mode::Picard ? solve_picard(initial)
                                                  : solve_newton(initial);
}

CoupledSolution CoupledDriver::solve_picard(const CoupledSolution* initial) {
  CoupledSolution sol;
  Eigen::VectorXd omega =
      initial ? initial->omega : expand_omega(Eigen::VectorXd::Zero(om_->n_free()));

  int rising = 0;
  double prev_inc = -1.0;
  for (int it = 1; it <= opt_.max_iter; ++it) {
    const double t0 = now_seconds();
    sol.poro = poro_solve(omega);
    Eigen::VectorXd omega_next = diffusion_solve(sol.poro.sigma);
    if (opt_.relaxation < 1.0)
      omega_next = (1.0 - opt_.relaxation) * omega + opt_.relaxation * omega_next;

    const double inc = omega_h1_norm(omega_next - omega);
    omega = omega_next;
    const double res = coupled_residual(sol.poro, omega).norm();

    sol.log.push_back({it, inc, res, now_seconds() - t0});
    sol.iterations = it;

    if (!std::isfinite(inc)) {
      sol.failure = "picard: non-finite increment";
      break;
    }
    const double scale = std::max(omega_h1_norm(omega), 1e-30);
    if (inc <= opt_.tol_rel * scale || res <= opt_.tol_abs * load_norm_) {
      sol.converged = true;
      break;
    }
    rising = (prev_inc >= 0.0 && inc > prev_inc) ? rising + 1 : 0;
    prev_inc = inc;
    if (rising >= 3) {
      sol.failure = "picard: increments grew over three consecutive iterations";
      break;
    }
  }
  if (!sol.converged && sol.failure.empty()) sol.failure = "picard: max_iter exceeded";
  sol.omega = omega;
  sol.poro = poro_solve(omega);
  return sol;
}

CoupledSolution CoupledDriver::solve_newton(const CoupledSolution* initial) {
  CoupledSolution sol;
  Eigen::VectorXd omega =
      initial ? initial->omega : expand_omega(Eigen::VectorXd::Zero(om_->n_free()));
  PoroState st = initial ? initial->poro : poro_solve(omega);

  int rising = 0;
  double prev_inc = -1.0;
  for (int it = 1; it <= opt_.max_iter; ++it) {
    const double t0 = now_seconds();
    const Eigen::VectorXd R = coupled_residual(st, omega);
    const SpMat J0 = newton_core(st, omega);
    Eigen::VectorXd dx;
    if (poro_.bordered()) {
      Eigen::VectorXd border = Eigen::VectorXd::Zero(J0.rows());
      border.head(poro_.border().size()) = poro_.border();
      BorderedSolver blu(J0, poro_.border_index(), border, border);
      dx = blu.solve(R);
    } else {
      SparseLUSolver lu(J0);
      dx = lu.solve(R);
    }
    if (!dx.allFinite()) {
      sol.failure = "newton: non-finite update";
      break;
    }
    const Eigen::VectorXd x = stack_free(st, omega) - dx;
    unstack_free(x, st, omega);

    Eigen::VectorXd dom_full = Eigen::VectorXd::Zero(om_->ndofs());
    for (int d = 0; d < om_->ndofs(); ++d)
      if (!om_->is_masked(d))
        dom_full[d] = dx[sp_->total_free() + om_->free_index(d)];
    const double inc = omega_h1_norm(dom_full);
    const double res = coupled_residual(st, omega).norm();
    sol.log.push_back({it, inc, res, now_seconds() - t0});
    sol.iterations = it;

    const double scale = std::max(omega_h1_norm(omega), 1e-30);
    if (res <= opt_.tol_abs * load_norm_ || inc <= opt_.tol_rel * scale) {
      sol.converged = true;
      break;
    }
    rising = (prev_inc >= 0.0 && inc > prev_inc) ? rising + 1 : 0;
    prev_inc = inc;
    if (rising >= 3) {
      sol.failure = "newton: increments grew over three consecutive iterations";
      break;
    }
  }
  if (!sol.converged && sol.failure.empty()) sol.failure = "newton: max_iter exceeded";
  sol.poro = st;
  sol.omega = omega;
  return sol;
}

void solve_transient(CoupledDriver& driver, const TransientScenario& scen,
                     CoupledSolution& state) {
  if (!(scen.dt > 0.0) || !(scen.t_end > 0.0))
    throw std::invalid_argument("solve_transient: dt and t_end must be positive");
  const int nsteps = static_cast<int>(std::llround(scen.t_end / scen.dt));
  for (int step = 1; step <= nsteps; ++step) {
    const double t = step * scen.dt;
    if (scen.update_boundary) scen.update_boundary(t);
    driver.set_history(state.poro, state.omega);
    CoupledSolution next = driver.solve(&state);
    if (!next.converged)
      throw std::runtime_error("solve_transient: step at t=" + std::to_string(t) +
                               " failed to converge (" + next.failure + ")");
    state = std::move(next);
    if (scen.on_step) scen.on_step(t, step, state);
  }
}

}  // namespace porodiff
