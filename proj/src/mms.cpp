#include "porodiff/mms.hpp"

#include <cmath>
#include <sstream>

#include "porodiff/quadrature.hpp"

namespace porodiff {

namespace {

// div(D(sigma(x)) grad w) by the chain rule through the constitutive
// derivative; valid for every law variant.
double div_D_grad(const DiffusionLaw& law, const Mat2& sig, const Mat2& dsig_dx,
                  const Mat2& dsig_dy, const Vec2& grad_w, const Mat2& hess_w) {
  const Mat2 D = law.eval(sig);
  const Mat2 Dx = law.derivative(sig, dsig_dx);
  const Mat2 Dy = law.derivative(sig, dsig_dy);
  double v = 0.0;
  // sum_i d_i (sum_j D_ij d_j w)
  v += Dx(0, 0) * grad_w.x() + Dx(0, 1) * grad_w.y();
  v += Dy(1, 0) * grad_w.x() + Dy(1, 1) * grad_w.y();
  v += D(0, 0) * hess_w(0, 0) + D(0, 1) * hess_w(0, 1) + D(1, 0) * hess_w(1, 0) +
       D(1, 1) * hess_w(1, 1);
  return v;
}

}  // namespace

ManufacturedCase example1_case(const MaterialParams& par, const DiffusionLaw& law) {
  const double mu = par.mu_s, il = par.inv_lambda_s, al = par.alpha, be = par.beta;
  const double pi = M_PI;

  ManufacturedCase mc;
  mc.omega = [pi](const Vec2& x) {
    return std::exp(x.x()) + std::cos(pi * x.x()) * std::cos(pi * x.y());
  };
  mc.grad_omega = [pi](const Vec2& x) {
    return Vec2(std::exp(x.x()) - pi * std::sin(pi * x.x()) * std::cos(pi * x.y()),
                -pi * std::cos(pi * x.x()) * std::sin(pi * x.y()));
  };
  auto hess_omega = [pi](const Vec2& x) {
    Mat2 h;
    h(0, 0) = std::exp(x.x()) - pi * pi * std::cos(pi * x.x()) * std::cos(pi * x.y());
    h(0, 1) = pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y());
    h(1, 0) = h(0, 1);
    h(1, 1) = -pi * pi * std::cos(pi * x.x()) * std::cos(pi * x.y());
    return h;
  };

  mc.u = [il](const Vec2& x) {
    return Vec2(0.1 * (-std::cos(x.x()) * std::sin(x.y()) + x.x() * x.x() * il),
                0.1 * (std::sin(x.x()) * std::cos(x.y()) + x.y() * x.y() * il));
  };
  // grad u entries
  auto du = [il](const Vec2& x) {
    Mat2 g;
    g(0, 0) = 0.1 * (std::sin(x.x()) * std::sin(x.y()) + 2.0 * x.x() * il);
    g(0, 1) = 0.1 * (-std::cos(x.x()) * std::cos(x.y()));
    g(1, 0) = 0.1 * (std::cos(x.x()) * std::cos(x.y()));
    g(1, 1) = 0.1 * (-std::sin(x.x()) * std::sin(x.y()) + 2.0 * x.y() * il);
    return g;
  };
  mc.t = [du](const Vec2& x) {
    const Mat2 g = du(x);
    return (0.5 * (g + g.transpose())).eval();
  };
  mc.gamma = [du](const Vec2& x) {
    const Mat2 g = du(x);
    return (0.5 * (g - g.transpose())).eval();
  };

  mc.p = [pi](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  mc.grad_p = [pi](const Vec2& x) {
    return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()),
                pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
  };
  // lambda div u = (x + y) / 5 independently of lambda
  mc.ptilde = [al, p = mc.p](const Vec2& x) {
    return al * p(x) - (x.x() + x.y()) / 5.0;
  };
  auto grad_ptilde = [al, gp = mc.grad_p](const Vec2& x) {
    return (al * gp(x) - Vec2(0.2, 0.2)).eval();
  };

  mc.sigma = [mu, be, t = mc.t, pt = mc.ptilde, om = mc.omega](const Vec2& x) {
    return (2.0 * mu * t(x) - (pt(x) + be * om(x)) * Mat2::Identity()).eval();
  };
  mc.trsig = [sig = mc.sigma](const Vec2& x) { return sig(x).trace(); };

  // d(sigma)/dx and /dy, needed for the tracer forcing via the chain rule
  auto dsig_dx = [mu, il, be, grad_ptilde, gom = mc.grad_omega](const Vec2& x) {
    Mat2 d = Mat2::Zero();
    d(0, 0) = 2.0 * mu * 0.1 * (std::cos(x.x()) * std::sin(x.y()) + 2.0 * il);
    d(1, 1) = 2.0 * mu * 0.1 * (-std::cos(x.x()) * std::sin(x.y()));
    const double dscalar = grad_ptilde(x).x() + be * gom(x).x();
    d(0, 0) -= dscalar;
    d(1, 1) -= dscalar;
    return d;
  };
  auto dsig_dy = [mu, il, be, grad_ptilde, gom = mc.grad_omega](const Vec2& x) {
    Mat2 d = Mat2::Zero();
    d(0, 0) = 2.0 * mu * 0.1 * (std::sin(x.x()) * std::cos(x.y()));
    d(1, 1) = 2.0 * mu * 0.1 * (-std::sin(x.x()) * std::cos(x.y()) + 2.0 * il);
    const double dscalar = grad_ptilde(x).y() + be * gom(x).y();
    d(0, 0) -= dscalar;
    d(1, 1) -= dscalar;
    return d;
  };
  mc.div_sigma = [dsig_dx, dsig_dy](const Vec2& x) {
    return Vec2(dsig_dx(x)(0, 0), dsig_dy(x)(1, 1));
  };
  mc.f = [rs = par.rho_s, ds = mc.div_sigma](const Vec2& x) {
    return (-ds(x) / rs).eval();
  };

  mc.flux = [kap = par.kappa, muf = par.mu_f, rf = par.rho_f, g = par.g,
             gp = mc.grad_p](const Vec2& x) {
    return (kap * (gp(x) / muf) - rf * (kap * g)).eval();
  };
  mc.m = [par, p = mc.p, pt = mc.ptilde, pi](const Vec2& x) {
    const double il = par.inv_lambda_s, al = par.alpha;
    const double pxx = -pi * pi * std::sin(pi * x.x()) * std::sin(pi * x.y());
    const double pyy = pxx;
    const double pxy = pi * pi * std::cos(pi * x.x()) * std::cos(pi * x.y());
    const double divflux = (par.kappa(0, 0) * pxx + 2.0 * par.kappa(0, 1) * pxy +
                            par.kappa(1, 1) * pyy) /
                           par.mu_f;
    return (par.c0 + al * al * il) * p(x) - al * il * pt(x) - divflux;
  };
  mc.ell = [law, phi = par.phi, om = mc.omega, gom = mc.grad_omega, hess_omega,
            sig = mc.sigma, dsig_dx, dsig_dy](const Vec2& x) {
    const double dd =
        div_D_grad(law, sig(x), dsig_dx(x), dsig_dy(x), gom(x), hess_omega(x));
    return om(x) - dd / phi;
  };
  return mc;
}

ManufacturedCase patch_case(const MaterialParams& par, const DiffusionLaw& law, int k) {
  const double al = par.alpha, be = par.beta, mu = par.mu_s;

  Mat2 gradu = Mat2::Zero();
  Vec2 u0(0.07, -0.03);
  double p0 = 0.4;
  Vec2 gp = Vec2::Zero();
  if (k >= 1) {
    // divergence-free linear displacement, linear pressure
    gradu << 0.3, 0.1, 0.2, -0.3;
    gp = Vec2(0.5, -0.3);
    p0 = 0.2;
  }
  const Mat2 tC = 0.5 * (gradu + gradu.transpose());
  const Mat2 gC = 0.5 * (gradu - gradu.transpose());

  ManufacturedCase mc;
  mc.u = [u0, gradu](const Vec2& x) { return (u0 + gradu * x).eval(); };
  mc.t = [tC](const Vec2&) { return tC; };
  mc.gamma = [gC](const Vec2&) { return gC; };
  mc.p = [p0, gp](const Vec2& x) { return p0 + gp.dot(x); };
  mc.grad_p = [gp](const Vec2&) { return gp; };
  mc.ptilde = [al, p = mc.p](const Vec2& x) { return al * p(x); };  // div u = 0
  mc.omega = [](const Vec2& x) { return 0.3 + 0.2 * x.x() - 0.1 * x.y(); };
  mc.grad_omega = [](const Vec2&) { return Vec2(0.2, -0.1); };

  mc.sigma = [mu, be, tC, pt = mc.ptilde, om = mc.omega](const Vec2& x) {
    return (2.0 * mu * tC - (pt(x) + be * om(x)) * Mat2::Identity()).eval();
  };
  mc.trsig = [sig = mc.sigma](const Vec2& x) { return sig(x).trace(); };
  mc.div_sigma = [al, be, gp, gom = mc.grad_omega](const Vec2& x) {
    return (-(al * gp + be * gom(x))).eval();
  };
  mc.f = [rs = par.rho_s, ds = mc.div_sigma](const Vec2& x) {
    return (-ds(x) / rs).eval();
  };
  mc.flux = [kap = par.kappa, muf = par.mu_f, rf = par.rho_f, g = par.g,
             gp](const Vec2&) { return (kap * (gp / muf) - rf * (kap * g)).eval(); };
  mc.m = [par, p = mc.p, pt = mc.ptilde](const Vec2& x) {
    const double il = par.inv_lambda_s, al = par.alpha;
    return (par.c0 + al * al * il) * p(x) - al * il * pt(x);
  };
  mc.ell = [law, phi = par.phi, om = mc.omega, gom = mc.grad_omega,
            sig = mc.sigma](const Vec2& x) {
    // constant-law patch: D is constant, grad omega constant
    Mat2 zero = Mat2::Zero();
    const double dd = div_D_grad(law, sig(x), zero, zero, gom(x), Mat2::Zero());
    return om(x) - dd / phi;
  };
  return mc;
}

double integrate_scalar(const Mesh& mesh, const ScalarField& f, int quad_degree) {
  const QuadratureRule rule = triangle_rule(quad_degree);
  double acc = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const PushForward pf = affine_map(mesh.cell_vertices(c));
    for (int i = 0; i < rule.size(); ++i) {
      const Vec2 x = pf.map(Vec2(rule.points(i, 0), rule.points(i, 1)));
      acc += rule.weights[i] * pf.det * f(x);
    }
  }
  return acc;
}

ErrorTuple error_norms(const Mesh& mesh, const PoroSpaces& sp, const FESpace& om_space,
                       const CoupledSolution& sol, const ManufacturedCase& mc,
                       int quad_degree) {
  const QuadratureRule rule = triangle_rule(quad_degree);
  double a_t = 0, a_sig = 0, a_div = 0, a_pt = 0, a_u = 0, a_g = 0;
  double a_p = 0, a_gp = 0, a_om = 0, a_gom = 0;

  std::vector<Mat2> sig_h;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const PushForward pf = affine_map(mesh.cell_vertices(c));
    PointList pts(rule.size(), 2);
    for (int i = 0; i < rule.size(); ++i)
      pts.row(i) = pf.map(Vec2(rule.points(i, 0), rule.points(i, 1))).transpose();

    const CellBasis bt = sp.t.cell_basis(c);
    const CellBasis bpt = sp.pt.cell_basis(c);
    const CellBasis bu = sp.u.cell_basis(c);
    const CellBasis bg = sp.gam.cell_basis(c);
    const CellBasis bp = sp.p.cell_basis(c);
    const CellBasis bo = om_space.cell_basis(c);

    const auto tv = bt.values(pts);
    const auto ptv = bpt.values(pts);
    const auto uvv = bu.values(pts);
    const auto gvv = bg.values(pts);
    const auto pv = bp.values(pts);
    const auto ov = bo.values(pts);
    Eigen::MatrixXd pgx, pgy, ogx, ogy;
    bp.gradients(pts, pgx, pgy);
    bo.gradients(pts, ogx, ogy);

    eval_sigma(sp.sigma, sol.poro.sigma, c, pts, sig_h);
    Eigen::MatrixXd sdiv[2];
    for (int r = 0; r < 2; ++r)
      sdiv[r] = sp.sigma.rows[r].cell_basis(c).divergence(pts);

    for (int qi = 0; qi < rule.size(); ++qi) {
      const double w = rule.weights[qi] * pf.det;
      const Vec2 x = pts.row(qi).transpose();

      Mat2 th = Mat2::Zero();
      for (int d = 0; d < bt.ndofs(); ++d) {
        const double cf = sol.poro.t[sp.t.dofmap().dof(c, d)];
        th(0, 0) += cf * tv[0](d, qi);
        th(0, 1) += cf * tv[1](d, qi);
        th(1, 0) += cf * tv[2](d, qi);
        th(1, 1) += cf * tv[3](d, qi);
      }
      a_t += w * (th - mc.t(x)).squaredNorm();

      a_sig += w * (sig_h[qi] - mc.sigma(x)).squaredNorm();
      Vec2 dh = Vec2::Zero();
      for (int r = 0; r < 2; ++r)
        for (int d = 0; d < sdiv[r].rows(); ++d)
          dh[r] += sol.poro.sigma[r * sp.sigma.row_ndofs() +
                                  sp.sigma.rows[r].dofmap().dof(c, d)] *
                   sdiv[r](d, qi);
      a_div += w * (dh - mc.div_sigma(x)).squaredNorm();

      double pth = 0;
      for (int d = 0; d < bpt.ndofs(); ++d)
        pth += sol.poro.pt[sp.pt.dofmap().dof(c, d)] * ptv[0](d, qi);
      a_pt += w * (pth - mc.ptilde(x)) * (pth - mc.ptilde(x));

      Vec2 uh = Vec2::Zero();
      for (int d = 0; d < bu.ndofs(); ++d) {
        const double cf = sol.poro.u[sp.u.dofmap().dof(c, d)];
        uh.x() += cf * uvv[0](d, qi);
        uh.y() += cf * uvv[1](d, qi);
      }
      a_u += w * (uh - mc.u(x)).squaredNorm();

      double gh = 0;
      for (int d = 0; d < bg.ndofs(); ++d)
        gh += sol.poro.gam[sp.gam.dofmap().dof(c, d)] * gvv[0](d, qi);
      // skew tensor error: two off-diagonal entries
      const double gex = mc.gamma(x)(0, 1);
      a_g += w * 2.0 * (gh - gex) * (gh - gex);

      double ph = 0;
      Vec2 gph = Vec2::Zero();
      for (int d = 0; d < bp.ndofs(); ++d) {
        const double cf = sol.poro.p[sp.p.dofmap().dof(c, d)];
        ph += cf * pv[0](d, qi);
        gph += cf * Vec2(pgx(d, qi), pgy(d, qi));
      }
      a_p += w * (ph - mc.p(x)) * (ph - mc.p(x));
      a_gp += w * (gph - mc.grad_p(x)).squaredNorm();

      double oh = 0;
      Vec2 goh = Vec2::Zero();
      for (int d = 0; d < bo.ndofs(); ++d) {
        const double cf = sol.omega[om_space.dofmap().dof(c, d)];
        oh += cf * ov[0](d, qi);
        goh += cf * Vec2(ogx(d, qi), ogy(d, qi));
      }
      a_om += w * (oh - mc.omega(x)) * (oh - mc.omega(x));
      a_gom += w * (goh - mc.grad_omega(x)).squaredNorm();
    }
  }

  ErrorTuple e;
  e.e0_t = std::sqrt(a_t);
  e.ediv_sig = std::sqrt(a_sig + a_div);
  e.e0_pt = std::sqrt(a_pt);
  e.e0_u = std::sqrt(a_u);
  e.e0_gam = std::sqrt(a_g);
  e.e1_p = std::sqrt(a_p + a_gp);
  e.e1_om = std::sqrt(a_om + a_gom);
  return e;
}

MmsProblem setup_mms_problem(int n, int k, MaterialParams par, const DiffusionLaw& law,
                             const ManufacturedCase& mc, const SolverOptions& opt) {
  MmsProblem prob;
  prob.mc = mc;
  par.m = mc.m;
  par.ell = mc.ell;
  par.f = mc.f;

  prob.mesh = std::make_unique<Mesh>(build_unit_square(n, BoundaryPartition::all_gamma()));
  prob.spaces = std::make_unique<PoroSpaces>(*prob.mesh, k);
  prob.spaces->trace.active = true;
  prob.spaces->trace.target = integrate_scalar(*prob.mesh, mc.trsig, 8);

  prob.omega_space = std::make_unique<FESpace>(*prob.mesh, ElementFamily::LagrangeP, k);
  prob.omega_space->apply_dirichlet(on_all_boundary(), mc.omega);

  prob.driver = std::make_unique<CoupledDriver>(*prob.mesh, *prob.spaces,
                                                *prob.omega_space, par, law, opt);
  const int edge_qd = 2 * k + 6;
  add_displacement_boundary_load(*prob.mesh, *prob.spaces, on_all_boundary(), mc.u,
                                 prob.driver->poro().load_sig(), edge_qd);
  add_flux_boundary_load(*prob.mesh, *prob.spaces, on_all_boundary(), mc.flux,
                         prob.driver->poro().G_p(), edge_qd);
  prob.driver->finalize();
  return prob;
}

PoroState interpolate_state(const Mesh& mesh, const PoroSpaces& sp,
                            const ManufacturedCase& mc) {
  PoroState st = PoroState::zeros(sp);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    {
      const CellBasis b = sp.t.cell_basis(c);
      const Eigen::VectorXd dofs = b.interpolate_tensor(mc.t);
      for (int d = 0; d < b.ndofs(); ++d) st.t[sp.t.dofmap().dof(c, d)] = dofs[d];
    }
    for (int r = 0; r < 2; ++r) {
      const CellBasis b = sp.sigma.rows[r].cell_basis(c);
      const Eigen::VectorXd dofs = b.interpolate_vector(
          [&mc, r](const Vec2& x) { return Vec2(mc.sigma(x)(r, 0), mc.sigma(x)(r, 1)); });
      for (int d = 0; d < b.ndofs(); ++d)
        st.sigma[r * sp.sigma.row_ndofs() + sp.sigma.rows[r].dofmap().dof(c, d)] = dofs[d];
    }
    {
      const CellBasis b = sp.pt.cell_basis(c);
      const Eigen::VectorXd dofs = b.interpolate(mc.ptilde);
      for (int d = 0; d < b.ndofs(); ++d) st.pt[sp.pt.dofmap().dof(c, d)] = dofs[d];
    }
    {
      const CellBasis b = sp.u.cell_basis(c);
      const Eigen::VectorXd dofs = b.interpolate_vector(mc.u);
      for (int d = 0; d < b.ndofs(); ++d) st.u[sp.u.dofmap().dof(c, d)] = dofs[d];
    }
    {
      const CellBasis b = sp.gam.cell_basis(c);
      const Eigen::VectorXd dofs =
          b.interpolate([&mc](const Vec2& x) { return mc.gamma(x)(0, 1); });
      for (int d = 0; d < b.ndofs(); ++d) st.gam[sp.gam.dofmap().dof(c, d)] = dofs[d];
    }
    {
      const CellBasis b = sp.p.cell_basis(c);
      const Eigen::VectorXd dofs = b.interpolate(mc.p);
      for (int d = 0; d < b.ndofs(); ++d) st.p[sp.p.dofmap().dof(c, d)] = dofs[d];
    }
  }
  return st;
}

Eigen::VectorXd interpolate_scalar_field(const Mesh& mesh, const FESpace& space,
                                         const ScalarField& f) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(space.ndofs());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellBasis b = space.cell_basis(c);
    const Eigen::VectorXd dofs = b.interpolate(f);
    for (int d = 0; d < b.ndofs(); ++d) out[space.dofmap().dof(c, d)] = dofs[d];
  }
  return out;
}

double ConvergenceReport::rate(int lvl, int which) const {
  if (lvl <= 0 || lvl >= static_cast<int>(rows.size())) return 0.0;
  return std::log2(rows[lvl - 1].e[which] / rows[lvl].e[which]);
}

std::string ConvergenceReport::to_csv() const {
  std::ostringstream os;
  os << "dof,h,e0_t,rate,ediv_sig,rate,e0_ptilde,rate,e0_u,rate,e0_gam,rate,e1_p,"
        "rate,e1_om,rate\n";
  os.precision(10);
  for (size_t l = 0; l < rows.size(); ++l) {
    os << rows[l].dofs << "," << rows[l].h;
    for (int w = 0; w < 7; ++w) {
      os << "," << rows[l].e[w] << ",";
      if (l == 0)
        os << "--";
      else
        os << rate(static_cast<int>(l), w);
    }
    os << "\n";
  }
  return os.str();
}

ConvergenceReport run_convergence(int n0, int levels, int k, const MaterialParams& par,
                                  const DiffusionLaw& law, const SolverOptions& opt,
                                  const LevelSink& on_level) {
  ConvergenceReport rep;
  const ManufacturedCase mc = example1_case(par, law);
  for (int l = 0; l < levels; ++l) {
    const int n = n0 << l;
    MmsProblem prob = setup_mms_problem(n, k, par, law, mc, opt);
    const CoupledSolution sol = prob.driver->solve();
    if (on_level) on_level(l, sol);
    ConvergenceRow row;
    row.dofs = prob.spaces->total_free() + prob.omega_space->n_free();
    row.h = prob.mesh->meshsize();
    row.converged = sol.converged;
    row.iterations = sol.iterations;
    if (!sol.converged) rep.partial = true;
    row.e = error_norms(*prob.mesh, *prob.spaces, *prob.omega_space, sol, mc,
                        std::min(8, 2 * (k + 1) + 4));
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace porodiff
