#include "doctest.h"

#include <cmath>
#include <random>

#include "porodiff/mms.hpp"
#include "porodiff/quadrature.hpp"

using namespace porodiff;

namespace {

DiffusionLaw example1_law() {
  DiffusionLaw law;
  law.kind = LawKind::ExpTrace;
  law.D0 = 0.01;
  law.eta0 = 1.0;
  law.eta1 = 0.01;
  return law;
}

// Independent residual oracle: evaluates the strong-form residuals of the
// governing system with high-order central differences on the closed-form
// fields, never using the hand-derived forcings being checked.
struct FdOracle {
  const ManufacturedCase& mc;
  const MaterialParams& par;
  const DiffusionLaw& law;
  double h = 1e-5;

  // fourth-order central differences
  template <class F>
  auto d4(const F& f, const Vec2& x, const Vec2& dir) const {
    return (-f(x + 2 * h * dir) + 8.0 * f(x + h * dir) - 8.0 * f(x - h * dir) +
            f(x - 2 * h * dir)) /
           (12.0 * h);
  }
  Vec2 grad(const ScalarField& f, const Vec2& x) const {
    return Vec2(d4(f, x, Vec2(1, 0)), d4(f, x, Vec2(0, 1)));
  }
  double div_vec(const VectorField& f, const Vec2& x) const {
    return d4(f, x, Vec2(1, 0)).x() + d4(f, x, Vec2(0, 1)).y();
  }
  Vec2 div_tensor(const TensorField& f, const Vec2& x) const {
    const Mat2 dx = d4(f, x, Vec2(1, 0)), dy = d4(f, x, Vec2(0, 1));
    return Vec2(dx(0, 0) + dy(0, 1), dx(1, 0) + dy(1, 1));
  }

  // momentum: -div sigma - rho_s f = 0
  double momentum_residual(const Vec2& x) const {
    return (div_tensor(mc.sigma, x) + par.rho_s * mc.f(x)).norm();
  }
  // mass: (c0 + a^2/l) p - (a/l) pt - div flux - m = 0
  double mass_residual(const Vec2& x) const {
    const double il = par.inv_lambda_s, al = par.alpha;
    return std::abs((par.c0 + al * al * il) * mc.p(x) - al * il * mc.ptilde(x) -
                    div_vec(mc.flux, x) - mc.m(x));
  }
  // tracer: phi w - div(D(sigma) grad w) - phi ell = 0
  double tracer_residual(const Vec2& x) const {
    VectorField dgrad = [this](const Vec2& y) {
      return (law.eval(mc.sigma(y)) * mc.grad_omega(y)).eval();
    };
    return std::abs(par.phi * mc.omega(x) - div_vec(dgrad, x) - par.phi * mc.ell(x));
  }
  // constitutive: sigma - 2 mu t + (pt + beta w) I = 0
  double constitutive_residual(const Vec2& x) const {
    const Mat2 r = mc.sigma(x) - 2.0 * par.mu_s * mc.t(x) +
                   (mc.ptilde(x) + par.beta * mc.omega(x)) * Mat2::Identity();
    return r.norm();
  }
  // total pressure: pt/l + tr t - (a/l) p = 0 and t = eps(u), gamma = grad u - t
  double kinematic_residual(const Vec2& x) const {
    const double il = par.inv_lambda_s;
    double r = std::abs(il * mc.ptilde(x) + mc.t(x).trace() - par.alpha * il * mc.p(x));
    // columns of grad u are the coordinate derivatives of the vector field
    Mat2 gradu;
    gradu.col(0) = d4(mc.u, x, Vec2(1, 0));
    gradu.col(1) = d4(mc.u, x, Vec2(0, 1));
    r += (0.5 * (gradu + gradu.transpose()) - mc.t(x)).norm();
    r += (gradu - mc.t(x) - mc.gamma(x)).norm();
    return r;
  }
};

}  // namespace

TEST_CASE("manufactured fields: point values from the printed formulas") {
  MaterialParams par = MaterialParams::unity();
  const ManufacturedCase mc = example1_case(par, example1_law());
  const Vec2 x(0.5, 0.5);
  // u(0.5,0.5) with lambda = 1
  const Vec2 u = mc.u(x);
  CHECK(u.x() == doctest::Approx(0.1 * (-std::cos(0.5) * std::sin(0.5) + 0.25))
                     .epsilon(1e-15));
  CHECK(u.y() == doctest::Approx(0.1 * (std::sin(0.5) * std::cos(0.5) + 0.25))
                     .epsilon(1e-15));
  CHECK(mc.p(x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mc.omega(Vec2(0.0, 0.0)) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("hand-derived forcings pass the independent finite-difference oracle") {
  for (double lambda : {1.0, 1e4}) {
    MaterialParams par = MaterialParams::unity();
    par.set_lambda(lambda);
    const DiffusionLaw law = example1_law();
    const ManufacturedCase mc = example1_case(par, law);
    const FdOracle oracle{mc, par, law};

    std::mt19937 rng(17);
    std::uniform_real_distribution<double> uni(0.05, 0.95);
    for (int i = 0; i < 25; ++i) {
      const Vec2 x(uni(rng), uni(rng));
      CHECK(oracle.momentum_residual(x) < 1e-9);
      CHECK(oracle.mass_residual(x) < 1e-9);
      CHECK(oracle.tracer_residual(x) < 1e-9);
      CHECK(oracle.constitutive_residual(x) < 1e-12);
      CHECK(oracle.kinematic_residual(x) < 1e-9);
    }
  }
}

TEST_CASE("patch-case forcings satisfy the oracle as well") {
  for (int k : {0, 1}) {
    MaterialParams par = MaterialParams::unity();
    DiffusionLaw law;
    law.kind = LawKind::Constant;
    law.D0 = 0.8;
    const ManufacturedCase mc = patch_case(par, law, k);
    const FdOracle oracle{mc, par, law};
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> uni(0.1, 0.9);
    for (int i = 0; i < 10; ++i) {
      const Vec2 x(uni(rng), uni(rng));
      CHECK(oracle.momentum_residual(x) < 1e-9);
      CHECK(oracle.mass_residual(x) < 1e-9);
      CHECK(oracle.tracer_residual(x) < 1e-9);
      CHECK(oracle.constitutive_residual(x) < 1e-12);
      CHECK(oracle.kinematic_residual(x) < 1e-9);
    }
  }
}

TEST_CASE("trace target for unity parameters matches the closed form") {
  // int tr sigma = 2 mu/(5 lambda) + 2/5 - 8 alpha/pi^2 - 2 beta (e - 1)
  MaterialParams par = MaterialParams::unity();
  const ManufacturedCase mc = example1_case(par, example1_law());
  const Mesh mesh = build_unit_square(16, BoundaryPartition::all_gamma());
  const double got = integrate_scalar(mesh, mc.trsig, 8);
  const double expect = 0.4 + 0.4 - 8.0 / (M_PI * M_PI) - 2.0 * (std::exp(1.0) - 1.0);
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("error norms vanish on injected exact interpolants of a representable case") {
  MaterialParams par = MaterialParams::unity();
  DiffusionLaw law;
  law.kind = LawKind::Constant;
  law.D0 = 0.5;
  const ManufacturedCase mc = patch_case(par, law, 1);
  const Mesh mesh = build_unit_square(2, BoundaryPartition::all_gamma());
  const PoroSpaces sp(mesh, 1);
  const FESpace om(mesh, ElementFamily::LagrangeP, 1);

  CoupledSolution sol;
  sol.poro = interpolate_state(mesh, sp, mc);
  sol.omega = interpolate_scalar_field(mesh, om, mc.omega);
  sol.converged = true;
  const ErrorTuple e = error_norms(mesh, sp, om, sol, mc, 8);
  for (int w = 0; w < 7; ++w) CHECK(e[w] < 1e-11);
}

TEST_CASE("norm computation against a dense one-cell evaluation") {
  // single reference triangle; compare error_norms of the zero solution with
  // directly integrated norms of the exact fields
  std::vector<Vec2> verts = {{0, 0}, {1, 0}, {0, 1}};
  std::vector<std::array<int, 3>> cells = {{0, 1, 2}};
  const Mesh mesh(std::move(verts), std::move(cells), BoundaryPartition::all_gamma());
  const PoroSpaces sp(mesh, 0);
  const FESpace om(mesh, ElementFamily::LagrangeP, 0);
  MaterialParams par = MaterialParams::unity();
  const ManufacturedCase mc = example1_case(par, example1_law());

  CoupledSolution zero;
  zero.poro = PoroState::zeros(sp);
  zero.omega = Eigen::VectorXd::Zero(om.ndofs());
  const ErrorTuple e = error_norms(mesh, sp, om, zero, mc, 8);

  const QuadratureRule rule = triangle_rule(8);
  double a_om = 0.0, a_gom = 0.0, a_u = 0.0;
  for (int i = 0; i < rule.size(); ++i) {
    const Vec2 x(rule.points(i, 0), rule.points(i, 1));
    a_om += rule.weights[i] * mc.omega(x) * mc.omega(x);
    a_gom += rule.weights[i] * mc.grad_omega(x).squaredNorm();
    a_u += rule.weights[i] * mc.u(x).squaredNorm();
  }
  CHECK(e.e1_om == doctest::Approx(std::sqrt(a_om + a_gom)).epsilon(1e-12));
  CHECK(e.e0_u == doctest::Approx(std::sqrt(a_u)).epsilon(1e-12));
}

TEST_CASE("csv layout mirrors the table format") {
  ConvergenceReport rep;
  ConvergenceRow r1, r2;
  r1.dofs = 100;
  r1.h = 0.5;
  r1.e = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0};
  r2.dofs = 400;
  r2.h = 0.25;
  r2.e = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
  rep.rows = {r1, r2};
  const std::string csv = rep.to_csv();
  CHECK(csv.find("dof,h,e0_t,rate,ediv_sig,rate,e0_ptilde,rate,e0_u,rate,e0_gam,"
                 "rate,e1_p,rate,e1_om,rate") == 0);
  CHECK(csv.find("--") != std::string::npos);  // first-row rates
  CHECK(rep.rate(1, 0) == doctest::Approx(1.0));
}

namespace {

// Natural-norm Gram of the stacked poro + tracer free dofs, used to measure
// discrete residual functionals in the dual norm.
Eigen::MatrixXd stacked_gram(const Mesh& mesh, const PoroSpaces& sp,
                             const FESpace& om) {
  const int np = sp.total_free();
  const int n = np + om.n_free();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  const QuadratureRule rule = triangle_rule(6);
  const auto off = sp.offsets();

  auto add = [&G](int gi, int gj, double v) {
    if (gi >= 0 && gj >= 0) G(gi, gj) += v;
  };
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const PushForward pf = affine_map(mesh.cell_vertices(c));
    PointList pts(rule.size(), 2);
    for (int i = 0; i < rule.size(); ++i)
      pts.row(i) = pf.map(Vec2(rule.points(i, 0), rule.points(i, 1))).transpose();

    const CellBasis bt = sp.t.cell_basis(c);
    const auto tv = bt.values(pts);
    const CellBasis bs = sp.sigma.rows[0].cell_basis(c);
    const auto sv = bs.values(pts);
    const Eigen::MatrixXd sdiv = bs.divergence(pts);
    const CellBasis bpt = sp.pt.cell_basis(c);
    const auto ptv = bpt.values(pts);
    const CellBasis bu = sp.u.cell_basis(c);
    const auto uv = bu.values(pts);
    const CellBasis bg = sp.gam.cell_basis(c);
    const auto gv = bg.values(pts);
    const CellBasis bp = sp.p.cell_basis(c);
    const auto pv = bp.values(pts);
    Eigen::MatrixXd pgx, pgy;
    bp.gradients(pts, pgx, pgy);
    const CellBasis bo = om.cell_basis(c);
    const auto ov = bo.values(pts);
    Eigen::MatrixXd ogx, ogy;
    bo.gradients(pts, ogx, ogy);

    for (int q = 0; q < rule.size(); ++q) {
      const double w = rule.weights[q] * pf.det;
      for (int i = 0; i < bt.ndofs(); ++i)
        for (int j = 0; j < bt.ndofs(); ++j) {
          double dot = 0;
          for (int cpp = 0; cpp < 4; ++cpp) dot += tv[cpp](i, q) * tv[cpp](j, q);
          add(off[0] + sp.t.free_index(sp.t.dofmap().dof(c, i)),
              off[0] + sp.t.free_index(sp.t.dofmap().dof(c, j)), w * dot);
        }
      for (int r = 0; r < 2; ++r)
        for (int i = 0; i < bs.ndofs(); ++i)
          for (int j = 0; j < bs.ndofs(); ++j) {
            const int gi = sp.sigma.free_index(r * sp.sigma.row_ndofs() +
                                               sp.sigma.rows[r].dofmap().dof(c, i));
            const int gj = sp.sigma.free_index(r * sp.sigma.row_ndofs() +
                                               sp.sigma.rows[r].dofmap().dof(c, j));
            add(off[1] + gi, off[1] + gj,
                w * (sv[0](i, q) * sv[0](j, q) + sv[1](i, q) * sv[1](j, q) +
                     sdiv(i, q) * sdiv(j, q)));
          }
      for (int i = 0; i < bpt.ndofs(); ++i)
        for (int j = 0; j < bpt.ndofs(); ++j)
          add(off[2] + sp.pt.free_index(sp.pt.dofmap().dof(c, i)),
              off[2] + sp.pt.free_index(sp.pt.dofmap().dof(c, j)),
              w * ptv[0](i, q) * ptv[0](j, q));
      for (int i = 0; i < bu.ndofs(); ++i)
        for (int j = 0; j < bu.ndofs(); ++j)
          add(off[3] + sp.u.free_index(sp.u.dofmap().dof(c, i)),
              off[3] + sp.u.free_index(sp.u.dofmap().dof(c, j)),
              w * (uv[0](i, q) * uv[0](j, q) + uv[1](i, q) * uv[1](j, q)));
      for (int i = 0; i < bg.ndofs(); ++i)
        for (int j = 0; j < bg.ndofs(); ++j)
          add(off[4] + sp.gam.free_index(sp.gam.dofmap().dof(c, i)),
              off[4] + sp.gam.free_index(sp.gam.dofmap().dof(c, j)),
              w * 2.0 * gv[0](i, q) * gv[0](j, q));
      for (int i = 0; i < bp.ndofs(); ++i)
        for (int j = 0; j < bp.ndofs(); ++j)
          add(off[5] + sp.p.free_index(sp.p.dofmap().dof(c, i)),
              off[5] + sp.p.free_index(sp.p.dofmap().dof(c, j)),
              w * (pv[0](i, q) * pv[0](j, q) + pgx(i, q) * pgx(j, q) +
                   pgy(i, q) * pgy(j, q)));
      for (int i = 0; i < bo.ndofs(); ++i)
        for (int j = 0; j < bo.ndofs(); ++j) {
          const int gi = om.free_index(om.dofmap().dof(c, i));
          const int gj = om.free_index(om.dofmap().dof(c, j));
          add(gi >= 0 ? np + gi : -1, gj >= 0 ? np + gj : -1,
              w * (ov[0](i, q) * ov[0](j, q) + ogx(i, q) * ogx(j, q) +
                   ogy(i, q) * ogy(j, q)));
        }
    }
  }
  if (sp.trace.active) G(np - 1, np - 1) = 1.0;
  return G;
}

}  // namespace

TEST_CASE("Galerkin consistency: interpolated exact fields leave an O(h^(k+1)) residual") {
  MaterialParams par = MaterialParams::unity();
  const DiffusionLaw law = example1_law();
  const ManufacturedCase mc = example1_case(par, law);
  SolverOptions opt;
  opt.mode = SolverOptions::Mode::Picard;

  for (int k : {0, 1}) {
    std::vector<double> hs, res;
    for (int n : {2, 4, 8}) {
      MmsProblem prob = setup_mms_problem(n, k, par, law, mc, opt);
      const PoroState st = interpolate_state(*prob.mesh, *prob.spaces, prob.mc);
      const Eigen::VectorXd om =
          interpolate_scalar_field(*prob.mesh, *prob.omega_space, prob.mc.omega);
      const Eigen::VectorXd R = prob.driver->coupled_residual(st, om);
      const Eigen::MatrixXd G =
          stacked_gram(*prob.mesh, *prob.spaces, *prob.omega_space);
      const Eigen::VectorXd z = Eigen::LLT<Eigen::MatrixXd>(G).solve(R);
      res.push_back(std::sqrt(std::max(0.0, R.dot(z))));
      hs.push_back(prob.mesh->meshsize());
    }
    const double slope = (std::log(res.front()) - std::log(res.back())) /
                         (std::log(hs.front()) - std::log(hs.back()));
    CHECK(slope >= k + 0.8);
  }
}
