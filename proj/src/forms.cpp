#include "porodiff/forms.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "porodiff/quadrature.hpp"

namespace porodiff {

int default_quad_degree(int k) { return std::min(8, 2 * k + 4); }

void MaterialParams::set_lambda(double lambda_s) {
  if (lambda_s <= 0.0)
    throw std::invalid_argument("MaterialParams: lambda_s must be positive");
  inv_lambda_s = 1.0 / lambda_s;
}

double MaterialParams::lambda_s() const {
  return inv_lambda_s > 0.0 ? 1.0 / inv_lambda_s
                            : std::numeric_limits<double>::infinity();
}

void MaterialParams::validate() const {
  if (!(mu_s > 0.0) || !(mu_f > 0.0) || !(phi > 0.0))
    throw std::invalid_argument("MaterialParams: mu_s, mu_f, phi must be positive");
  if (!(alpha > 0.0) || alpha > 1.0)
    throw std::invalid_argument("MaterialParams: alpha must lie in (0, 1]");
  if (c0 < 0.0) throw std::invalid_argument("MaterialParams: c0 must be >= 0");
  if (!std::isfinite(inv_lambda_s) || inv_lambda_s < 0.0)
    throw std::invalid_argument("MaterialParams: 1/lambda_s must be finite and >= 0");
  const double tr = kappa.trace(), det = kappa.determinant();
  if (!(tr > 0.0) || !(det > 0.0) || std::abs(kappa(0, 1) - kappa(1, 0)) > 1e-14 * tr)
    throw std::invalid_argument("MaterialParams: kappa must be symmetric positive definite");
}

MaterialParams MaterialParams::unity() {
  MaterialParams p;
  p.phi = 0.5;
  return p;
}

void StressSpace::apply_traction(const FacetPredicate& pred, const VectorField& traction) {
  for (int r = 0; r < 2; ++r)
    rows[r].apply_normal_component_bc(
        pred, [r, traction](const Vec2& x) { return traction(x)[r]; });
}

void StressSpace::update_traction_values(const FacetPredicate& pred,
                                         const VectorField& traction) {
  for (int r = 0; r < 2; ++r)
    rows[r].update_normal_component_values(
        pred, [r, traction](const Vec2& x) { return traction(x)[r]; });
}

std::array<int, 6> PoroSpaces::offsets() const {
  std::array<int, 6> off;
  off[0] = 0;
  off[1] = off[0] + t.n_free();
  off[2] = off[1] + sigma.n_free();
  off[3] = off[2] + pt.n_free();
  off[4] = off[3] + u.n_free();
  off[5] = off[4] + gam.n_free();
  return off;
}

int PoroSpaces::total_free() const {
  return t.n_free() + sigma.n_free() + pt.n_free() + u.n_free() + gam.n_free() +
         p.n_free() + (trace.active ? 1 : 0);
}

PoroState PoroState::zeros(const PoroSpaces& sp) {
  PoroState s;
  s.t = Eigen::VectorXd::Zero(sp.t.ndofs());
  s.sigma = Eigen::VectorXd::Zero(sp.sigma.ndofs());
  s.pt = Eigen::VectorXd::Zero(sp.pt.ndofs());
  s.u = Eigen::VectorXd::Zero(sp.u.ndofs());
  s.gam = Eigen::VectorXd::Zero(sp.gam.ndofs());
  s.p = Eigen::VectorXd::Zero(sp.p.ndofs());
  s.mult = 0.0;
  return s;
}

namespace {

struct CellQuad {
  PointList pts;
  Eigen::VectorXd w;
};

CellQuad map_quad(const Mesh& mesh, int cell, const QuadratureRule& rule) {
  const PushForward pf = affine_map(mesh.cell_vertices(cell));
  CellQuad q;
  q.pts.resize(rule.size(), 2);
  q.w.resize(rule.size());
  for (int i = 0; i < rule.size(); ++i) {
    q.pts.row(i) = pf.map(Vec2(rule.points(i, 0), rule.points(i, 1))).transpose();
    q.w[i] = rule.weights[i] * pf.det;
  }
  return q;
}

void scatter(std::vector<Triplet>& out, const Eigen::MatrixXd& local,
             const DofMap& rows, const DofMap& cols, int cell, int row_offset = 0,
             int col_offset = 0) {
  for (int i = 0; i < local.rows(); ++i)
    for (int j = 0; j < local.cols(); ++j)
      if (local(i, j) != 0.0)
        out.emplace_back(row_offset + rows.dof(cell, i),
                         col_offset + cols.dof(cell, j), local(i, j));
}

}  // namespace

PoroBlocks assemble_poro_blocks(const Mesh& mesh, const PoroSpaces& sp,
                                const MaterialParams& par, int quad_degree) {
  par.validate();
  const int qd = quad_degree > 0 ? quad_degree : default_quad_degree(sp.k);
  const QuadratureRule rule = triangle_rule(qd);

  const int nt = sp.t.ndofs(), nsig = sp.sigma.ndofs(), npt = sp.pt.ndofs();
  const int nu = sp.u.ndofs(), ng = sp.gam.ndofs(), np = sp.p.ndofs();
  const int nrow = sp.sigma.row_ndofs();

  std::vector<Triplet> tA, tBs, tBp, tB1u, tB1g, tC, tB2, tMp, tKp;
  PoroBlocks out;
  out.quad_degree = qd;
  out.trace_vec = Eigen::VectorXd::Zero(nsig);
  out.F_u = Eigen::VectorXd::Zero(nu);
  out.G_p = Eigen::VectorXd::Zero(np);
  out.load_sig = Eigen::VectorXd::Zero(nsig);

  const double il = par.inv_lambda_s;
  const double storage = par.c0 + par.alpha * par.alpha * il;

  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellQuad q = map_quad(mesh, c, rule);
    const int nq = static_cast<int>(q.w.size());

    const CellBasis bt = sp.t.cell_basis(c);
    const CellBasis bsig = sp.sigma.rows[0].cell_basis(c);
    const CellBasis bpt = sp.pt.cell_basis(c);
    const CellBasis bu = sp.u.cell_basis(c);
    const CellBasis bg = sp.gam.cell_basis(c);
    const CellBasis bp = sp.p.cell_basis(c);

    const auto tv = bt.values(q.pts);    // 4 tensor components
    const auto sv = bsig.values(q.pts);  // one H(div) row, 2 components
    const Eigen::MatrixXd sdiv = bsig.divergence(q.pts);
    const auto ptv = bpt.values(q.pts);
    const auto uv = bu.values(q.pts);
    const auto gv = bg.values(q.pts);
    const auto pv = bp.values(q.pts);
    Eigen::MatrixXd pgx, pgy;
    bp.gradients(q.pts, pgx, pgy);

    const int lt = bt.ndofs(), ls = bsig.ndofs(), lpt = bpt.ndofs();
    const int lu = bu.ndofs(), lg = bg.ndofs(), lp = bp.ndofs();

    Eigen::MatrixXd locA = Eigen::MatrixXd::Zero(lt, lt);
    for (int qi = 0; qi < nq; ++qi)
      for (int comp = 0; comp < 4; ++comp)
        locA += (2.0 * par.mu_s * q.w[qi]) * (tv[comp].col(qi) * tv[comp].col(qi).transpose());
    locA = (0.5 * (locA + locA.transpose())).eval();
    scatter(tA, locA, sp.t.dofmap(), sp.t.dofmap(), c);

    for (int r = 0; r < 2; ++r) {
      Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(ls, lt);
      for (int qi = 0; qi < nq; ++qi)
        for (int comp = 0; comp < 2; ++comp)
          loc -= q.w[qi] * sv[comp].col(qi) * tv[2 * r + comp].col(qi).transpose();
      scatter(tBs, loc, sp.sigma.rows[r].dofmap(), sp.t.dofmap(), c, r * nrow, 0);
    }

    {
      Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(lpt, lt);
      for (int qi = 0; qi < nq; ++qi)
        loc -= q.w[qi] * ptv[0].col(qi) * (tv[0].col(qi) + tv[3].col(qi)).transpose();
      scatter(tBp, loc, sp.pt.dofmap(), sp.t.dofmap(), c);
    }

    for (int r = 0; r < 2; ++r) {
      Eigen::MatrixXd locU = Eigen::MatrixXd::Zero(lu, ls);
      Eigen::MatrixXd locG = Eigen::MatrixXd::Zero(lg, ls);
      for (int qi = 0; qi < nq; ++qi) {
        locU -= q.w[qi] * uv[r].col(qi) * sdiv.col(qi).transpose();
        // eta : tau = g (tau_01 - tau_10); a row-0 trial carries tau_01 in its
        // y component, a row-1 trial carries tau_10 in its x component.
        if (r == 0)
          locG -= q.w[qi] * gv[0].col(qi) * sv[1].col(qi).transpose();
        else
          locG += q.w[qi] * gv[0].col(qi) * sv[0].col(qi).transpose();
      }
      scatter(tB1u, locU, sp.u.dofmap(), sp.sigma.rows[r].dofmap(), c, 0, r * nrow);
      scatter(tB1g, locG, sp.gam.dofmap(), sp.sigma.rows[r].dofmap(), c, 0, r * nrow);
    }

    {
      Eigen::MatrixXd locC = Eigen::MatrixXd::Zero(lpt, lpt);
      Eigen::MatrixXd locB2 = Eigen::MatrixXd::Zero(lp, lpt);
      Eigen::MatrixXd locMp = Eigen::MatrixXd::Zero(lp, lp);
      Eigen::MatrixXd locKp = Eigen::MatrixXd::Zero(lp, lp);
      const double k00 = par.kappa(0, 0), k01 = par.kappa(0, 1), k11 = par.kappa(1, 1);
      for (int qi = 0; qi < nq; ++qi) {
        locC += (il * q.w[qi]) * (ptv[0].col(qi) * ptv[0].col(qi).transpose());
        locB2 += par.alpha * il * q.w[qi] * pv[0].col(qi) * ptv[0].col(qi).transpose();
        locMp += (storage * q.w[qi]) * (pv[0].col(qi) * pv[0].col(qi).transpose());
        locKp += (q.w[qi] * k00 / par.mu_f) * (pgx.col(qi) * pgx.col(qi).transpose()) +
                 (q.w[qi] * k11 / par.mu_f) * (pgy.col(qi) * pgy.col(qi).transpose()) +
                 (q.w[qi] * k01 / par.mu_f) * (pgx.col(qi) * pgy.col(qi).transpose() +
                                               pgy.col(qi) * pgx.col(qi).transpose());
      }
      locC = (0.5 * (locC + locC.transpose())).eval();
      locMp = (0.5 * (locMp + locMp.transpose())).eval();
      locKp = (0.5 * (locKp + locKp.transpose())).eval();
      scatter(tC, locC, sp.pt.dofmap(), sp.pt.dofmap(), c);
      scatter(tB2, locB2, sp.p.dofmap(), sp.pt.dofmap(), c);
      scatter(tMp, locMp, sp.p.dofmap(), sp.p.dofmap(), c);
      scatter(tKp, locKp, sp.p.dofmap(), sp.p.dofmap(), c);
    }

    for (int qi = 0; qi < nq; ++qi) {
      // tr(tau) of a row-r trial is its r-th component
      for (int r = 0; r < 2; ++r)
        for (int i = 0; i < ls; ++i)
          out.trace_vec[r * nrow + sp.sigma.rows[r].dofmap().dof(c, i)] +=
              q.w[qi] * sv[r](i, qi);
      const Vec2 x = q.pts.row(qi).transpose();
      const Vec2 fx = par.f(x);
      for (int i = 0; i < lu; ++i)
        out.F_u[sp.u.dofmap().dof(c, i)] +=
            par.rho_s * q.w[qi] * (uv[0](i, qi) * fx.x() + uv[1](i, qi) * fx.y());
      const double mx = par.m(x);
      const Vec2 kg = par.kappa * par.g;
      for (int i = 0; i < lp; ++i)
        out.G_p[sp.p.dofmap().dof(c, i)] +=
            q.w[qi] * (-mx * pv[0](i, qi) +
                       par.rho_f * (kg.x() * pgx(i, qi) + kg.y() * pgy(i, qi)));
    }
  }

  out.A = compress(nt, nt, tA);
  out.Bs = compress(nsig, nt, tBs);
  out.Bp = compress(npt, nt, tBp);
  out.B1u = compress(nu, nsig, tB1u);
  out.B1g = compress(ng, nsig, tB1g);
  out.C = compress(npt, npt, tC);
  out.B2 = compress(np, npt, tB2);
  out.Mp = compress(np, np, tMp);
  out.Kp = compress(np, np, tKp);
  return out;
}

void add_displacement_boundary_load(const Mesh& mesh, const PoroSpaces& sp,
                                    const FacetPredicate& pred,
                                    const VectorField& u_exact,
                                    Eigen::VectorXd& load_sig, int quad_degree) {
  const QuadratureRule gl = interval_rule(quad_degree);
  const int nrow = sp.sigma.row_ndofs();
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.is_boundary_facet(f) || !pred(f, mesh)) continue;
    const Facet& fc = mesh.facet(f);
    const Vec2 a = mesh.vertex(fc.verts[0]), b = mesh.vertex(fc.verts[1]);
    const int c = fc.cell[0];
    const CellBasis bsig = sp.sigma.rows[0].cell_basis(c);
    PointList pts(gl.size(), 2);
    for (int i = 0; i < gl.size(); ++i)
      pts.row(i) = (a + gl.points(i, 0) * (b - a)).transpose();
    const auto sv = bsig.values(pts);
    for (int i = 0; i < gl.size(); ++i) {
      const double w = gl.weights[i] * fc.length;
      const Vec2 ue = u_exact(pts.row(i).transpose());
      for (int d = 0; d < bsig.ndofs(); ++d) {
        const double vn = sv[0](d, i) * fc.normal.x() + sv[1](d, i) * fc.normal.y();
        if (vn == 0.0) continue;
        for (int r = 0; r < 2; ++r)
          load_sig[r * nrow + sp.sigma.rows[r].dofmap().dof(c, d)] -=
              w * vn * (r == 0 ? ue.x() : ue.y());
      }
    }
  }
}

void add_flux_boundary_load(const Mesh& mesh, const PoroSpaces& sp,
                            const FacetPredicate& pred, const VectorField& flux,
                            Eigen::VectorXd& G_p, int quad_degree) {
  const QuadratureRule gl = interval_rule(quad_degree);
  for (int f = 0; f < mesh.num_facets(); ++f) {
    if (!mesh.is_boundary_facet(f) || !pred(f, mesh)) continue;
    const Facet& fc = mesh.facet(f);
    const Vec2 a = mesh.vertex(fc.verts[0]), b = mesh.vertex(fc.verts[1]);
    const int c = fc.cell[0];
    const CellBasis bp = sp.p.cell_basis(c);
    PointList pts(gl.size(), 2);
    for (int i = 0; i < gl.size(); ++i)
      pts.row(i) = (a + gl.points(i, 0) * (b - a)).transpose();
    const auto pvals = bp.values(pts);
    for (int i = 0; i < gl.size(); ++i) {
      const double w = gl.weights[i] * fc.length;
      const double wn = flux(pts.row(i).transpose()).dot(fc.normal);
      for (int d = 0; d < bp.ndofs(); ++d)
        G_p[sp.p.dofmap().dof(c, d)] -= w * wn * pvals[0](d, i);
    }
  }
}

SpMat assemble_coupling_Ht(const Mesh& mesh, const FESpace& t_space,
                           const FESpace& omega_space, double beta, int quad_degree) {
  const QuadratureRule rule = triangle_rule(quad_degree);
  std::vector<Triplet> trip;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellQuad q = map_quad(mesh, c, rule);
    const CellBasis bt = t_space.cell_basis(c);
    const CellBasis bo = omega_space.cell_basis(c);
    const auto tv = bt.values(q.pts);
    const auto ov = bo.values(q.pts);
    Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(bt.ndofs(), bo.ndofs());
    for (int qi = 0; qi < q.w.size(); ++qi)
      loc += beta * q.w[qi] * (tv[0].col(qi) + tv[3].col(qi)) * ov[0].col(qi).transpose();
    scatter(trip, loc, t_space.dofmap(), omega_space.dofmap(), c);
  }
  return compress(t_space.ndofs(), omega_space.ndofs(), trip);
}

void eval_sigma(const StressSpace& sigma_space, const Eigen::VectorXd& sigma_coeffs,
                int cell, const PointList& pts, std::vector<Mat2>& out) {
  const int nrow = sigma_space.row_ndofs();
  out.assign(pts.rows(), Mat2::Zero());
  for (int r = 0; r < 2; ++r) {
    const CellBasis b = sigma_space.rows[r].cell_basis(cell);
    const auto vals = b.values(pts);
    for (int d = 0; d < b.ndofs(); ++d) {
      const double cf =
          sigma_coeffs[r * nrow + sigma_space.rows[r].dofmap().dof(cell, d)];
      if (cf == 0.0) continue;
      for (int qi = 0; qi < pts.rows(); ++qi) {
        out[qi](r, 0) += cf * vals[0](d, qi);
        out[qi](r, 1) += cf * vals[1](d, qi);
      }
    }
  }
}

DiffusionBlocks assemble_diffusion(const Mesh& mesh, const FESpace& omega_space,
                                   const DiffusionLaw& law,
                                   const StressSpace* sigma_space,
                                   const Eigen::VectorXd* sigma_coeffs, double phi,
                                   const ScalarField& ell, int quad_degree) {
  const QuadratureRule rule = triangle_rule(quad_degree);
  std::vector<Triplet> tM, tK;
  DiffusionBlocks out;
  out.J = Eigen::VectorXd::Zero(omega_space.ndofs());

  std::vector<Mat2> sig;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellQuad q = map_quad(mesh, c, rule);
    const int nq = static_cast<int>(q.w.size());
    const CellBasis bo = omega_space.cell_basis(c);
    const auto ov = bo.values(q.pts);
    Eigen::MatrixXd gx, gy;
    bo.gradients(q.pts, gx, gy);

    if (sigma_space && sigma_coeffs)
      eval_sigma(*sigma_space, *sigma_coeffs, c, q.pts, sig);
    else
      sig.assign(nq, Mat2::Zero());

    const int lo = bo.ndofs();
    Eigen::MatrixXd locM = Eigen::MatrixXd::Zero(lo, lo);
    Eigen::MatrixXd locK = Eigen::MatrixXd::Zero(lo, lo);
    for (int qi = 0; qi < nq; ++qi) {
      locM += (phi * q.w[qi]) * (ov[0].col(qi) * ov[0].col(qi).transpose());
      Mat2 D;
      try {
        D = law.eval(sig[qi], &out.diag);
      } catch (const std::exception& e) {
        throw std::runtime_error("assemble_diffusion: law evaluation failed on cell " +
                                 std::to_string(c) + ": " + e.what());
      }
      locK += q.w[qi] * (D(0, 0) * gx.col(qi) * gx.col(qi).transpose() +
                         D(1, 1) * gy.col(qi) * gy.col(qi).transpose() +
                         D(0, 1) * gx.col(qi) * gy.col(qi).transpose() +
                         D(1, 0) * gy.col(qi) * gx.col(qi).transpose());
      const double lx = ell(q.pts.row(qi).transpose());
      for (int i = 0; i < lo; ++i)
        out.J[omega_space.dofmap().dof(c, i)] += phi * q.w[qi] * lx * ov[0](i, qi);
    }
    locM = (0.5 * (locM + locM.transpose())).eval();
    locK = (0.5 * (locK + locK.transpose())).eval();
    scatter(tM, locM, omega_space.dofmap(), omega_space.dofmap(), c);
    scatter(tK, locK, omega_space.dofmap(), omega_space.dofmap(), c);
  }
  out.Mass = compress(omega_space.ndofs(), omega_space.ndofs(), tM);
  out.Stiff = compress(omega_space.ndofs(), omega_space.ndofs(), tK);
  return out;
}

SpMat assemble_diffusion_sigma_jacobian(const Mesh& mesh, const FESpace& omega_space,
                                        const StressSpace& sigma_space,
                                        const Eigen::VectorXd& sigma_coeffs,
                                        const Eigen::VectorXd& omega_coeffs,
                                        const DiffusionLaw& law, int quad_degree,
                                        LawDiagnostics* diag) {
  const QuadratureRule rule = triangle_rule(quad_degree);
  const int nrow = sigma_space.row_ndofs();
  std::vector<Triplet> trip;
  std::vector<Mat2> sig;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellQuad q = map_quad(mesh, c, rule);
    const int nq = static_cast<int>(q.w.size());
    const CellBasis bo = omega_space.cell_basis(c);
    Eigen::MatrixXd gx, gy;
    bo.gradients(q.pts, gx, gy);
    eval_sigma(sigma_space, sigma_coeffs, c, q.pts, sig);

    // grad omega_h at quadrature points
    Eigen::MatrixXd grad_om(2, nq);
    grad_om.setZero();
    for (int d = 0; d < bo.ndofs(); ++d) {
      const double cf = omega_coeffs[omega_space.dofmap().dof(c, d)];
      if (cf == 0.0) continue;
      grad_om.row(0) += cf * gx.row(d);
      grad_om.row(1) += cf * gy.row(d);
    }

    const CellBasis bs = sigma_space.rows[0].cell_basis(c);
    const auto svv = bs.values(q.pts);
    Eigen::MatrixXd loc = Eigen::MatrixXd::Zero(bo.ndofs(), 2 * bs.ndofs());
    for (int qi = 0; qi < nq; ++qi) {
      const Vec2 go = grad_om.col(qi);
      for (int r = 0; r < 2; ++r) {
        for (int j = 0; j < bs.ndofs(); ++j) {
          Mat2 tau = Mat2::Zero();
          tau(r, 0) = svv[0](j, qi);
          tau(r, 1) = svv[1](j, qi);
          const Vec2 dgrad = law.derivative(sig[qi], tau, diag) * go;
          for (int i = 0; i < bo.ndofs(); ++i)
            loc(i, r * bs.ndofs() + j) +=
                q.w[qi] * (dgrad.x() * gx(i, qi) + dgrad.y() * gy(i, qi));
        }
      }
    }
    for (int i = 0; i < bo.ndofs(); ++i)
      for (int r = 0; r < 2; ++r)
        for (int j = 0; j < bs.ndofs(); ++j) {
          const double v = loc(i, r * bs.ndofs() + j);
          if (v != 0.0)
            trip.emplace_back(omega_space.dofmap().dof(c, i),
                              r * nrow + sigma_space.rows[r].dofmap().dof(c, j), v);
        }
  }
  return compress(omega_space.ndofs(), sigma_space.ndofs(), trip);
}

PoroSystem::PoroSystem(const Mesh& mesh, PoroSpaces& sp, const MaterialParams& par,
                       int quad_degree, double storage_scale)
    : sp_(&sp),
      blocks_(assemble_poro_blocks(mesh, sp, par, quad_degree)),
      storage_scale_(storage_scale) {}

void PoroSystem::set_history(const PoroState* history) {
  if (history)
    history_ = *history;
  else
    history_.reset();
}

namespace {

// Adds block entries into the monolithic triplet list, mapping full dofs to
// free indices through the given lookup callables.
template <class RowFree, class ColFree>
void add_block(std::vector<Triplet>& trip, const SpMat& M, double scale,
               int row_off, int col_off, RowFree row_free, ColFree col_free,
               bool transpose = false) {
  for (int k = 0; k < M.outerSize(); ++k)
    for (SpMat::InnerIterator it(M, k); it; ++it) {
      const int i = transpose ? static_cast<int>(it.col()) : static_cast<int>(it.row());
      const int j = transpose ? static_cast<int>(it.row()) : static_cast<int>(it.col());
      const int fi = row_free(i);
      if (fi < 0) continue;
      const int fj = col_free(j);
      if (fj < 0) continue;
      trip.emplace_back(row_off + fi, col_off + fj, scale * it.value());
    }
}

}  // namespace

void PoroSystem::compose(const SpMat& Ht) {
  Ht_ = Ht;
  const PoroSpaces& sp = *sp_;
  const auto off = sp.offsets();
  const int off_p = off[5];
  n_free_ = sp.total_free();
  const int mult_idx = off_p + sp.p.n_free();

  auto t_free = [&sp](int d) { return sp.t.free_index(d); };
  auto s_free = [&sp](int d) { return sp.sigma.free_index(d); };
  auto pt_free = [&sp](int d) { return sp.pt.free_index(d); };
  auto u_free = [&sp](int d) { return sp.u.free_index(d); };
  auto g_free = [&sp](int d) { return sp.gam.free_index(d); };
  auto p_free = [&sp](int d) { return sp.p.free_index(d); };

  std::vector<Triplet> trip;
  const double s = storage_scale_;

  add_block(trip, blocks_.A, 1.0, off[0], off[0], t_free, t_free);
  add_block(trip, blocks_.Bs, 1.0, off[0], off[1], t_free, s_free, true);   // (t, sig)
  add_block(trip, blocks_.Bp, 1.0, off[0], off[2], t_free, pt_free, true);  // (t, pt)

  add_block(trip, blocks_.Bs, 1.0, off[1], off[0], s_free, t_free);
  add_block(trip, blocks_.B1u, 1.0, off[1], off[3], s_free, u_free, true);  // (sig, u)
  add_block(trip, blocks_.B1g, 1.0, off[1], off[4], s_free, g_free, true);  // (sig, gam)

  add_block(trip, blocks_.Bp, 1.0, off[2], off[0], pt_free, t_free);
  add_block(trip, blocks_.C, -1.0, off[2], off[2], pt_free, pt_free);
  add_block(trip, blocks_.B2, 1.0, off[2], off[5], pt_free, p_free, true);  // (pt, p)

  add_block(trip, blocks_.B1u, 1.0, off[3], off[1], u_free, s_free);
  add_block(trip, blocks_.B1g, 1.0, off[4], off[1], g_free, s_free);

  add_block(trip, blocks_.B2, s, off[5], off[2], p_free, pt_free);  // (p, pt)
  add_block(trip, blocks_.Mp, -s, off[5], off[5], p_free, p_free);
  add_block(trip, blocks_.Kp, -1.0, off[5], off[5], p_free, p_free);

  border_ = Eigen::VectorXd::Zero(n_free_);
  if (sp.trace.active) {
    // dense constraint row/column kept out of the sparse core; the bordered
    // solver eliminates it without polluting the factorization fill
    trip.emplace_back(mult_idx, mult_idx, 1.0);
    for (int d = 0; d < sp.sigma.ndofs(); ++d) {
      const int fd = sp.sigma.free_index(d);
      if (fd >= 0) border_[off[1] + fd] = blocks_.trace_vec[d];
    }
  }

  K_ = compress(n_free_, n_free_, trip);
}

Eigen::VectorXd PoroSystem::restrict_state(const PoroState& st) const {
  const PoroSpaces& sp = *sp_;
  const auto off = sp.offsets();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_free_);
  for (int d = 0; d < sp.t.ndofs(); ++d)
    if (sp.t.free_index(d) >= 0) x[off[0] + sp.t.free_index(d)] = st.t[d];
  for (int d = 0; d < sp.sigma.ndofs(); ++d)
    if (sp.sigma.free_index(d) >= 0) x[off[1] + sp.sigma.free_index(d)] = st.sigma[d];
  for (int d = 0; d < sp.pt.ndofs(); ++d)
    if (sp.pt.free_index(d) >= 0) x[off[2] + sp.pt.free_index(d)] = st.pt[d];
  for (int d = 0; d < sp.u.ndofs(); ++d)
    if (sp.u.free_index(d) >= 0) x[off[3] + sp.u.free_index(d)] = st.u[d];
  for (int d = 0; d < sp.gam.ndofs(); ++d)
    if (sp.gam.free_index(d) >= 0) x[off[4] + sp.gam.free_index(d)] = st.gam[d];
  for (int d = 0; d < sp.p.ndofs(); ++d)
    if (sp.p.free_index(d) >= 0) x[off[5] + sp.p.free_index(d)] = st.p[d];
  if (sp.trace.active) x[n_free_ - 1] = st.mult;
  return x;
}

PoroState PoroSystem::expand(const Eigen::VectorXd& x_free) const {
  const PoroSpaces& sp = *sp_;
  const auto off = sp.offsets();
  PoroState st = PoroState::zeros(sp);
  for (int d = 0; d < sp.t.ndofs(); ++d)
    st.t[d] = sp.t.is_masked(d) ? sp.t.masked_value(d)
                                : x_free[off[0] + sp.t.free_index(d)];
  for (int d = 0; d < sp.sigma.ndofs(); ++d)
    st.sigma[d] = sp.sigma.is_masked(d) ? sp.sigma.masked_value(d)
                                        : x_free[off[1] + sp.sigma.free_index(d)];
  for (int d = 0; d < sp.pt.ndofs(); ++d)
    st.pt[d] = sp.pt.is_masked(d) ? sp.pt.masked_value(d)
                                  : x_free[off[2] + sp.pt.free_index(d)];
  for (int d = 0; d < sp.u.ndofs(); ++d)
    st.u[d] = sp.u.is_masked(d) ? sp.u.masked_value(d)
                                : x_free[off[3] + sp.u.free_index(d)];
  for (int d = 0; d < sp.gam.ndofs(); ++d)
    st.gam[d] = sp.gam.is_masked(d) ? sp.gam.masked_value(d)
                                    : x_free[off[4] + sp.gam.free_index(d)];
  for (int d = 0; d < sp.p.ndofs(); ++d)
    st.p[d] = sp.p.is_masked(d) ? sp.p.masked_value(d)
                                : x_free[off[5] + sp.p.free_index(d)];
  if (sp.trace.active) st.mult = x_free[n_free_ - 1];
  return st;
}

Eigen::VectorXd PoroSystem::residual(const PoroState& st,
                                     const Eigen::VectorXd& omega_full) const {
  const PoroSpaces& sp = *sp_;
  const double s = storage_scale_;

  Eigen::VectorXd R_t = blocks_.A * st.t + blocks_.Bs.transpose() * st.sigma +
                        blocks_.Bp.transpose() * st.pt - Ht_ * omega_full;
  Eigen::VectorXd R_sig = blocks_.Bs * st.t + blocks_.B1u.transpose() * st.u +
                          blocks_.B1g.transpose() * st.gam - blocks_.load_sig;
  if (sp.trace.active) R_sig += st.mult * blocks_.trace_vec;
  Eigen::VectorXd R_pt =
      blocks_.Bp * st.t - blocks_.C * st.pt + blocks_.B2.transpose() * st.p;
  Eigen::VectorXd R_u = blocks_.B1u * st.sigma - blocks_.F_u;
  Eigen::VectorXd R_g = blocks_.B1g * st.sigma;
  Eigen::VectorXd R_p = s * (blocks_.B2 * st.pt) - s * (blocks_.Mp * st.p) -
                        blocks_.Kp * st.p - blocks_.G_p;
  if (history_)
    R_p -= s * (blocks_.B2 * history_->pt) - s * (blocks_.Mp * history_->p);

  const auto off = sp.offsets();
  Eigen::VectorXd R = Eigen::VectorXd::Zero(n_free_);
  for (int d = 0; d < sp.t.ndofs(); ++d)
    if (sp.t.free_index(d) >= 0) R[off[0] + sp.t.free_index(d)] = R_t[d];
  for (int d = 0; d < sp.sigma.ndofs(); ++d)
    if (sp.sigma.free_index(d) >= 0) R[off[1] + sp.sigma.free_index(d)] = R_sig[d];
  for (int d = 0; d < sp.pt.ndofs(); ++d)
    if (sp.pt.free_index(d) >= 0) R[off[2] + sp.pt.free_index(d)] = R_pt[d];
  for (int d = 0; d < sp.u.ndofs(); ++d)
    if (sp.u.free_index(d) >= 0) R[off[3] + sp.u.free_index(d)] = R_u[d];
  for (int d = 0; d < sp.gam.ndofs(); ++d)
    if (sp.gam.free_index(d) >= 0) R[off[4] + sp.gam.free_index(d)] = R_g[d];
  for (int d = 0; d < sp.p.ndofs(); ++d)
    if (sp.p.free_index(d) >= 0) R[off[5] + sp.p.free_index(d)] = R_p[d];
  if (sp.trace.active)
    R[n_free_ - 1] = blocks_.trace_vec.dot(st.sigma) - sp.trace.target;
  return R;
}

Eigen::VectorXd PoroSystem::rhs(const Eigen::VectorXd& omega_full) const {
  // Solve K x_free = -residual(bc-only state): the expanded solution then
  // satisfies the full equations with the essential values in place.
  PoroState bc = PoroState::zeros(*sp_);
  for (int d = 0; d < sp_->sigma.ndofs(); ++d)
    if (sp_->sigma.is_masked(d)) bc.sigma[d] = sp_->sigma.masked_value(d);
  for (int d = 0; d < sp_->p.ndofs(); ++d)
    if (sp_->p.is_masked(d)) bc.p[d] = sp_->p.masked_value(d);
  for (int d = 0; d < sp_->t.ndofs(); ++d)
    if (sp_->t.is_masked(d)) bc.t[d] = sp_->t.masked_value(d);
  return -residual(bc, omega_full);
}

double divergence_residual_norm(const Mesh& mesh, const PoroSpaces& sp,
                                const Eigen::VectorXd& sigma_coeffs,
                                const VectorField& f, double rho_s, int quad_degree) {
  const QuadratureRule rule = triangle_rule(quad_degree);
  double acc = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const PushForward pf = affine_map(mesh.cell_vertices(c));
    PointList pts(rule.size(), 2);
    for (int i = 0; i < rule.size(); ++i)
      pts.row(i) = pf.map(Vec2(rule.points(i, 0), rule.points(i, 1))).transpose();

    Eigen::MatrixXd divs[2];
    for (int r = 0; r < 2; ++r)
      divs[r] = sp.sigma.rows[r].cell_basis(c).divergence(pts);
    for (int qi = 0; qi < rule.size(); ++qi) {
      Vec2 dv = Vec2::Zero();
      for (int r = 0; r < 2; ++r)
        for (int d = 0; d < divs[r].rows(); ++d)
          dv[r] += sigma_coeffs[r * sp.sigma.row_ndofs() +
                                sp.sigma.rows[r].dofmap().dof(c, d)] *
                   divs[r](d, qi);
      const Vec2 res = dv + rho_s * f(pts.row(qi).transpose());
      acc += rule.weights[qi] * pf.det * res.squaredNorm();
    }
  }
  return std::sqrt(acc);
}

double skew_residual_norm(const PoroSpaces& sp, const PoroBlocks& blocks,
                          const Eigen::VectorXd& sigma_coeffs) {
  (void)sp;
  const Eigen::VectorXd r = blocks.B1g * sigma_coeffs;
  return r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
}

double trace_constraint_residual(const PoroBlocks& blocks,
                                 const Eigen::VectorXd& sigma_coeffs, double target) {
  return std::abs(blocks.trace_vec.dot(sigma_coeffs) - target);
}

}  // namespace porodiff
