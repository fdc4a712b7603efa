#include "porodiff/app.hpp"

#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "porodiff/quadrature.hpp"

namespace porodiff {

using nlohmann::json;

std::pair<double, double> lame_from_E_nu(double E, double nu) {
  if (!(E > 0.0)) throw std::invalid_argument("lame_from_E_nu: E must be positive");
  if (!(nu >= 0.0) || nu >= 0.5)
    throw std::invalid_argument("lame_from_E_nu: nu must lie in [0, 0.5)");
  const double mu = E / (2.0 * (1.0 + nu));
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  return {mu, lambda};
}

MaterialParams slab_params() {
  MaterialParams par;
  const auto [mu, lambda] = lame_from_E_nu(800.0, 0.495);
  par.mu_s = mu;
  par.set_lambda(lambda);
  par.c0 = 2e-8;
  par.alpha = 1.0;
  par.kappa = 1e-8 * Mat2::Identity();
  par.mu_f = 0.7;
  par.rho_s = 1e-3;
  par.rho_f = 1e-3;
  par.g = Vec2::Zero();
  par.beta = 0.45;
  par.phi = 0.2;
  par.m = zero_scalar();
  par.ell = zero_scalar();
  par.f = zero_vector();
  return par;
}

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) ok = true;
    if (!ok)
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace

RunConfig parse_config_json(const std::string& json_text) {
  RunConfig cfg;
  const json j = json::parse(json_text);
  check_keys(j, "root",
             {"experiment", "k", "n0", "levels", "nx", "ny", "params", "law",
              "solver", "transient", "robust_param", "robust_values", "outdir",
              "write_vtk"});
  cfg.experiment = j.value("experiment", cfg.experiment);
  if (cfg.experiment != "convergence" && cfg.experiment != "robustness" &&
      cfg.experiment != "slab")
    throw std::invalid_argument("config: experiment must be convergence|robustness|slab");
  cfg.k = j.value("k", cfg.k);
  if (cfg.k != 0 && cfg.k != 1)
    throw std::invalid_argument("config: element order k must be 0 or 1");
  cfg.n0 = j.value("n0", cfg.n0);
  cfg.levels = j.value("levels", cfg.levels);
  cfg.nx = j.value("nx", cfg.nx);
  cfg.ny = j.value("ny", cfg.ny);
  cfg.outdir = j.value("outdir", cfg.outdir);
  cfg.write_vtk = j.value("write_vtk", cfg.write_vtk);
  cfg.robust_param = j.value("robust_param", cfg.robust_param);
  if (j.contains("robust_values"))
    cfg.robust_values = j["robust_values"].get<std::vector<double>>();

  if (j.contains("params")) {
    const json& p = j["params"];
    check_keys(p, "params",
               {"mu_s", "lambda_s", "inv_lambda_s", "E", "nu", "c0", "alpha", "kappa",
                "mu_f", "rho_s", "rho_f", "beta", "phi"});
    if (p.contains("E") || p.contains("nu")) {
      const auto [mu, lambda] = lame_from_E_nu(p.at("E").get<double>(),
                                               p.at("nu").get<double>());
      cfg.params.mu_s = mu;
      cfg.params.set_lambda(lambda);
    }
    if (p.contains("mu_s")) cfg.params.mu_s = p["mu_s"].get<double>();
    if (p.contains("lambda_s")) cfg.params.set_lambda(p["lambda_s"].get<double>());
    if (p.contains("inv_lambda_s")) cfg.params.inv_lambda_s = p["inv_lambda_s"].get<double>();
    if (p.contains("c0")) cfg.params.c0 = p["c0"].get<double>();
    if (p.contains("alpha")) cfg.params.alpha = p["alpha"].get<double>();
    if (p.contains("kappa"))
      cfg.params.kappa = p["kappa"].get<double>() * Mat2::Identity();
    if (p.contains("mu_f")) cfg.params.mu_f = p["mu_f"].get<double>();
    if (p.contains("rho_s")) cfg.params.rho_s = p["rho_s"].get<double>();
    if (p.contains("rho_f")) cfg.params.rho_f = p["rho_f"].get<double>();
    if (p.contains("beta")) cfg.params.beta = p["beta"].get<double>();
    if (p.contains("phi")) cfg.params.phi = p["phi"].get<double>();
  }

  if (j.contains("law")) {
    const json& l = j["law"];
    check_keys(l, "law", {"kind", "D0", "eta0", "eta1", "eta2", "eta"});
    if (l.contains("kind")) cfg.law.kind = law_from_string(l["kind"].get<std::string>());
    if (l.contains("D0")) cfg.law.D0 = l["D0"].get<double>();
    if (l.contains("eta0")) cfg.law.eta0 = l["eta0"].get<double>();
    if (l.contains("eta1")) cfg.law.eta1 = l["eta1"].get<double>();
    if (l.contains("eta2")) cfg.law.eta2 = l["eta2"].get<double>();
    if (l.contains("eta")) cfg.law.eta = l["eta"].get<double>();
  }

  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver", {"mode", "tol_rel", "tol_abs", "max_iter", "relaxation"});
    if (s.contains("mode")) {
      const std::string m = s["mode"].get<std::string>();
      if (m == "picard")
        cfg.solver.mode = SolverOptions::Mode::Picard;
      else if (m == "newton")
        cfg.solver.mode = SolverOptions::Mode::Newton;
      else
        throw std::invalid_argument("config: solver.mode must be picard|newton");
    }
    if (s.contains("tol_rel")) cfg.solver.tol_rel = s["tol_rel"].get<double>();
    if (s.contains("tol_abs")) cfg.solver.tol_abs = s["tol_abs"].get<double>();
    if (s.contains("max_iter")) cfg.solver.max_iter = s["max_iter"].get<int>();
    if (s.contains("relaxation")) cfg.solver.relaxation = s["relaxation"].get<double>();
  }

  if (j.contains("transient")) {
    const json& t = j["transient"];
    check_keys(t, "transient",
               {"dt", "t_end", "p0_mmHg", "p0_pa", "ramp_amplitude_mmHg",
                "ramp_amplitude_pa", "ramp_t0", "omega_in"});
    if (t.contains("dt")) cfg.transient.dt = t["dt"].get<double>();
    if (t.contains("t_end")) cfg.transient.t_end = t["t_end"].get<double>();
    if (t.contains("p0_mmHg"))
      cfg.transient.p0_pa = t["p0_mmHg"].get<double>() * kPaPerMmHg;
    if (t.contains("p0_pa")) cfg.transient.p0_pa = t["p0_pa"].get<double>();
    if (t.contains("ramp_amplitude_mmHg"))
      cfg.transient.ramp_amplitude_pa =
          t["ramp_amplitude_mmHg"].get<double>() * kPaPerMmHg;
    if (t.contains("ramp_amplitude_pa"))
      cfg.transient.ramp_amplitude_pa = t["ramp_amplitude_pa"].get<double>();
    if (t.contains("ramp_t0")) cfg.transient.ramp_t0 = t["ramp_t0"].get<double>();
    if (t.contains("omega_in")) cfg.transient.omega_in = t["omega_in"].get<double>();
  }
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["experiment"] = cfg.experiment;
  j["k"] = cfg.k;
  j["n0"] = cfg.n0;
  j["levels"] = cfg.levels;
  j["nx"] = cfg.nx;
  j["ny"] = cfg.ny;
  j["outdir"] = cfg.outdir;
  j["write_vtk"] = cfg.write_vtk;
  j["robust_param"] = cfg.robust_param;
  j["robust_values"] = cfg.robust_values;
  j["params"] = {{"mu_s", cfg.params.mu_s},
                 {"inv_lambda_s", cfg.params.inv_lambda_s},
                 {"c0", cfg.params.c0},
                 {"alpha", cfg.params.alpha},
                 {"kappa", cfg.params.kappa(0, 0)},
                 {"mu_f", cfg.params.mu_f},
                 {"rho_s", cfg.params.rho_s},
                 {"rho_f", cfg.params.rho_f},
                 {"beta", cfg.params.beta},
                 {"phi", cfg.params.phi}};
  j["law"] = {{"kind", to_string(cfg.law.kind)}, {"D0", cfg.law.D0},
              {"eta0", cfg.law.eta0},           {"eta1", cfg.law.eta1},
              {"eta2", cfg.law.eta2},           {"eta", cfg.law.eta}};
  j["solver"] = {
      {"mode", cfg.solver.mode == SolverOptions::Mode::Picard ? "picard" : "newton"},
      {"tol_rel", cfg.solver.tol_rel},
      {"tol_abs", cfg.solver.tol_abs},
      {"max_iter", cfg.solver.max_iter},
      {"relaxation", cfg.solver.relaxation}};
  j["transient"] = {{"dt", cfg.transient.dt},
                    {"t_end", cfg.transient.t_end},
                    {"p0_pa", cfg.transient.p0_pa},
                    {"ramp_amplitude_pa", cfg.transient.ramp_amplitude_pa},
                    {"ramp_t0", cfg.transient.ramp_t0},
                    {"omega_in", cfg.transient.omega_in}};
  return j.dump(2);
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
}

void write_iteration_log(std::ostream& os, int level_or_step,
                         const CoupledSolution& sol) {
  for (const auto& r : sol.log) {
    json line = {{"level", level_or_step},
                 {"iter", r.iter},
                 {"increment", r.increment},
                 {"residual", r.residual},
                 {"wall_time", r.seconds}};
    os << line.dump() << "\n";
  }
}

}  // namespace

SlabResult run_slab(const RunConfig& cfg, std::string vtk_path) {
  const MaterialParams par = slab_params();
  const TransientConfig& tc = cfg.transient;

  // bottom clamped and no-flux (Gamma), everything else stress/pressure data
  BoundaryPartition part{[](const Vec2& x) {
    return x.y() < 1e-12 ? BoundaryTag::Gamma : BoundaryTag::Sigma;
  }};
  const Mesh mesh = build_rectangle(1.0, 1.0, cfg.nx, cfg.ny, part);
  PoroSpaces sp(mesh, cfg.k);
  FESpace om(mesh, ElementFamily::LagrangeP, cfg.k);

  const double alpha = par.alpha;
  auto traction_top = [&tc, alpha](double t) {
    const double ptop = tc.ramp_amplitude_pa * std::atan(t / tc.ramp_t0);
    return [ptop, alpha](const Vec2&) { return Vec2(0.0, -alpha * ptop); };
  };
  auto p_top = [&tc](double t) {
    const double v = tc.ramp_amplitude_pa * std::atan(t / tc.ramp_t0);
    return [v](const Vec2&) { return v; };
  };

  // sigma n = -alpha p_top n on top, zero traction on the vertical walls
  sp.sigma.apply_traction(on_sides({Side::Top}), traction_top(0.0));
  sp.sigma.apply_traction(on_sides({Side::Left, Side::Right}), zero_vector());
  sp.trace.active = false;
  // p = p_in(t) on top, p0 on the walls; zero flux at the bottom (natural)
  sp.p.apply_dirichlet(on_sides({Side::Top}), p_top(0.0));
  sp.p.apply_dirichlet(on_sides({Side::Left, Side::Right}),
                       [&tc](const Vec2&) { return tc.p0_pa; });
  // omega fixed on the top, zero diffusive flux elsewhere (natural)
  om.apply_dirichlet(on_sides({Side::Top}),
                     [&tc](const Vec2&) { return tc.omega_in; });

  CoupledDriver driver(mesh, sp, om, par, cfg.law, cfg.solver, 1.0 / tc.dt);
  driver.finalize();

  CoupledSolution state;
  state.poro = PoroState::zeros(sp);
  state.omega = Eigen::VectorXd::Zero(om.ndofs());
  state.converged = true;

  TransientScenario scen;
  scen.dt = tc.dt;
  scen.t_end = tc.t_end;
  scen.update_boundary = [&](double t) {
    sp.sigma.update_traction_values(on_sides({Side::Top}), traction_top(t));
    sp.p.update_dirichlet_values(on_sides({Side::Top}), p_top(t));
  };
  SlabResult res;
  std::ofstream itlog;
  if (!vtk_path.empty()) itlog.open(vtk_path + ".iterations.jsonl");
  scen.on_step = [&res, &itlog](double, int step, const CoupledSolution& s) {
    res.steps = step;
    if (!s.log.empty())
      res.max_step_residual = std::max(res.max_step_residual, s.log.back().residual);
    if (itlog.is_open()) write_iteration_log(itlog, step, s);
  };
  solve_transient(driver, scen, state);
  res.load_norm = driver.load_norm();
  res.clamp_count = driver.law_diagnostics().clamp_count;

  // diagnostics and acceptance measures on the final state
  const QuadratureRule rule = triangle_rule(4);
  double mass_lower = 0.0, area_lower = 0.0, xmom = 0.0;
  res.trsig_min = 1e300;
  res.trsig_max = -1e300;
  double trsig_acc = 0.0, area_acc = 0.0;
  std::vector<Mat2> sig;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const PushForward pf = affine_map(mesh.cell_vertices(c));
    PointList pts(rule.size(), 2);
    for (int i = 0; i < rule.size(); ++i)
      pts.row(i) = pf.map(Vec2(rule.points(i, 0), rule.points(i, 1))).transpose();
    const CellBasis bo = om.cell_basis(c);
    const auto ov = bo.values(pts);
    eval_sigma(sp.sigma, state.poro.sigma, c, pts, sig);
    const bool lower = mesh.cell_centroid(c).y() < 0.5;
    for (int qi = 0; qi < rule.size(); ++qi) {
      const double w = rule.weights[qi] * pf.det;
      double oh = 0.0;
      for (int d = 0; d < bo.ndofs(); ++d)
        oh += state.omega[om.dofmap().dof(c, d)] * ov[0](d, qi);
      if (lower) {
        mass_lower += w * oh;
        area_lower += w;
      }
      xmom += w * (pts(qi, 0) - 0.5) * oh;
      const double tr = sig[qi].trace();
      res.trsig_min = std::min(res.trsig_min, tr);
      res.trsig_max = std::max(res.trsig_max, tr);
      trsig_acc += w * tr;
      area_acc += w;
    }
  }
  res.lower_half_mean = mass_lower / area_lower;
  res.first_x_moment = xmom;
  res.trsig_mean = trsig_acc / area_acc;

  if (!vtk_path.empty()) emit_fields_vtk(vtk_path, mesh, sp, om, state, cfg.law);
  return res;
}

void emit_fields_vtk(const std::string& path, const Mesh& mesh, const PoroSpaces& sp,
                     const FESpace& om_space, const CoupledSolution& sol,
                     const DiffusionLaw& law) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit_fields_vtk: cannot open " + path);
  out.precision(12);
  out << "# vtk DataFile Version 2.0\n";
  out << "porodiff fields\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (int v = 0; v < mesh.num_vertices(); ++v)
    out << mesh.vertex(v).x() << " " << mesh.vertex(v).y() << " 0\n";
  out << "CELLS " << mesh.num_cells() << " " << 4 * mesh.num_cells() << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c)
    out << "3 " << mesh.cell(c)[0] << " " << mesh.cell(c)[1] << " " << mesh.cell(c)[2]
        << "\n";
  out << "CELL_TYPES " << mesh.num_cells() << "\n";
  for (int c = 0; c < mesh.num_cells(); ++c) out << "5\n";

  // vertex values: p and omega are nodal; u is averaged over adjacent cells
  std::vector<double> pv(mesh.num_vertices(), 0.0), ov(mesh.num_vertices(), 0.0);
  std::vector<Vec2> uv(mesh.num_vertices(), Vec2::Zero());
  std::vector<int> count(mesh.num_vertices(), 0);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    PointList pts(3, 2);
    for (int v = 0; v < 3; ++v)
      pts.row(v) = mesh.vertex(mesh.cell(c)[v]).transpose();
    const CellBasis bu = sp.u.cell_basis(c);
    const auto uvv = bu.values(pts);
    for (int v = 0; v < 3; ++v) {
      const int gv = mesh.cell(c)[v];
      Vec2 uval = Vec2::Zero();
      for (int d = 0; d < bu.ndofs(); ++d) {
        const double cf = sol.poro.u[sp.u.dofmap().dof(c, d)];
        uval += cf * Vec2(uvv[0](d, v), uvv[1](d, v));
      }
      uv[gv] += uval;
      count[gv] += 1;
    }
  }
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    pv[v] = sol.poro.p[sp.p.dofmap().vertex_dofs[v]];
    ov[v] = sol.omega[om_space.dofmap().vertex_dofs[v]];
    if (count[v] > 0) uv[v] /= count[v];
  }

  out << "POINT_DATA " << mesh.num_vertices() << "\n";
  out << "SCALARS p double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) out << pv[v] << "\n";
  out << "SCALARS omega double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) out << ov[v] << "\n";
  out << "VECTORS u double\n";
  for (int v = 0; v < mesh.num_vertices(); ++v)
    out << uv[v].x() << " " << uv[v].y() << " 0\n";

  out << "CELL_DATA " << mesh.num_cells() << "\n";
  std::vector<Mat2> sig;
  std::vector<std::string> names = {"ptilde", "tr_sigma", "sigma_xx", "sigma_xy",
                                    "sigma_yy", "D_eig_min", "D_eig_max"};
  std::vector<std::vector<double>> data(names.size(),
                                        std::vector<double>(mesh.num_cells(), 0.0));
  for (int c = 0; c < mesh.num_cells(); ++c) {
    PointList mid(1, 2);
    mid.row(0) = mesh.cell_centroid(c).transpose();
    const CellBasis bpt = sp.pt.cell_basis(c);
    const auto ptv = bpt.values(mid);
    double pth = 0.0;
    for (int d = 0; d < bpt.ndofs(); ++d)
      pth += sol.poro.pt[sp.pt.dofmap().dof(c, d)] * ptv[0](d, 0);
    eval_sigma(sp.sigma, sol.poro.sigma, c, mid, sig);
    const Mat2 D = law.eval(sig[0]);
    const double mean = 0.5 * (D(0, 0) + D(1, 1));
    const double r = std::sqrt(0.25 * (D(0, 0) - D(1, 1)) * (D(0, 0) - D(1, 1)) +
                               D(0, 1) * D(1, 0));
    data[0][c] = pth;
    data[1][c] = sig[0].trace();
    data[2][c] = sig[0](0, 0);
    data[3][c] = 0.5 * (sig[0](0, 1) + sig[0](1, 0));
    data[4][c] = sig[0](1, 1);
    data[5][c] = mean - r;
    data[6][c] = mean + r;
  }
  for (size_t i = 0; i < names.size(); ++i) {
    out << "SCALARS " << names[i] << " double 1\nLOOKUP_TABLE default\n";
    for (int c = 0; c < mesh.num_cells(); ++c) out << data[i][c] << "\n";
  }
}

int run_experiment(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.outdir);
  const double t0 = std::clock() / double(CLOCKS_PER_SEC);

  json prov;
  prov["version"] = "porodiff 1.0.0";
  prov["config"] = json::parse(config_to_json(cfg));

  if (cfg.experiment == "convergence") {
    std::ofstream itlog(cfg.outdir + "/iterations.jsonl");
    const ConvergenceReport rep = run_convergence(
        cfg.n0, cfg.levels, cfg.k, cfg.params, cfg.law, cfg.solver,
        [&itlog](int level, const CoupledSolution& sol) {
          write_iteration_log(itlog, level, sol);
        });
    write_text(cfg.outdir + "/convergence_k" + std::to_string(cfg.k) + ".csv",
               rep.to_csv());
    std::cout << rep.to_csv();
    prov["partial"] = rep.partial;
  } else if (cfg.experiment == "robustness") {
    for (double v : cfg.robust_values) {
      MaterialParams par = cfg.params;
      if (cfg.robust_param == "lambda_s")
        par.set_lambda(v);
      else if (cfg.robust_param == "kappa")
        par.kappa = v * Mat2::Identity();
      else if (cfg.robust_param == "alpha")
        par.alpha = v;
      else if (cfg.robust_param == "mu_f")
        par.mu_f = v;
      else if (cfg.robust_param == "c0")
        par.c0 = v;
      else
        throw std::invalid_argument("robustness: unknown parameter " + cfg.robust_param);
      const ConvergenceReport rep =
          run_convergence(cfg.n0, cfg.levels, cfg.k, par, cfg.law, cfg.solver);
      std::ostringstream name;
      name << cfg.outdir << "/robustness_" << cfg.robust_param << "_" << v << ".csv";
      write_text(name.str(), rep.to_csv());
      std::cout << "# " << cfg.robust_param << " = " << v << "\n" << rep.to_csv();
    }
  } else if (cfg.experiment == "slab") {
    const std::string vtk =
        cfg.write_vtk ? cfg.outdir + "/slab_" + to_string(cfg.law.kind) + ".vtk" : "";
    const SlabResult res = run_slab(cfg, vtk);
    json out = {{"law", to_string(cfg.law.kind)},
                {"lower_half_mean", res.lower_half_mean},
                {"first_x_moment", res.first_x_moment},
                {"trsig_min", res.trsig_min},
                {"trsig_mean", res.trsig_mean},
                {"trsig_max", res.trsig_max},
                {"steps", res.steps},
                {"eigenvalue_clamps", res.clamp_count}};
    write_text(cfg.outdir + "/slab_" + to_string(cfg.law.kind) + ".json", out.dump(2));
    std::cout << out.dump(2) << "\n";
  }

  prov["wall_time_s"] = std::clock() / double(CLOCKS_PER_SEC) - t0;
  write_text(cfg.outdir + "/provenance.json", prov.dump(2));
  return 0;
}

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"porodiff: mixed FEM for poroelasticity coupled to stress-assisted diffusion"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--k", cfg.k, "element order (0 or 1)");
    sub->add_option("--outdir", cfg.outdir, "output directory");
    sub->add_option("--law", [&cfg](const std::vector<std::string>& v) {
      cfg.law.kind = law_from_string(v.at(0));
      return true;
    }, "diffusion law (constant|exptrace|isoexp|quadratic|hinderedexp)");
    sub->add_option("--D0", cfg.law.D0, "law coefficient D0");
    sub->add_option("--eta0", cfg.law.eta0, "law coefficient eta0");
    sub->add_option("--eta1", cfg.law.eta1, "law coefficient eta1");
    sub->add_option("--eta2", cfg.law.eta2, "law coefficient eta2");
    sub->add_option("--eta", cfg.law.eta, "law coefficient eta");
    sub->add_option("--mode", [&cfg](const std::vector<std::string>& v) {
      if (v.at(0) == "picard") cfg.solver.mode = SolverOptions::Mode::Picard;
      else if (v.at(0) == "newton") cfg.solver.mode = SolverOptions::Mode::Newton;
      else throw CLI::ValidationError("--mode", "picard|newton");
      return true;
    }, "nonlinear driver (picard|newton)");
    sub->add_option("--tol-rel", cfg.solver.tol_rel, "relative increment tolerance");
    sub->add_option("--tol-abs", cfg.solver.tol_abs, "absolute residual tolerance");
    sub->add_option("--max-iter", cfg.solver.max_iter, "nonlinear iteration cap");
    sub->add_option("--relaxation", cfg.solver.relaxation, "picard relaxation in (0,1]");
  };

  CLI::App* conv = app.add_subcommand("convergence", "manufactured-solution rate study");
  add_common(conv);
  conv->add_option("--levels", cfg.levels, "number of refinement levels");
  conv->add_option("--n0", cfg.n0, "coarsest mesh subdivision");

  CLI::App* rob = app.add_subcommand("robustness", "rate study under parameter sweeps");
  add_common(rob);
  rob->add_option("--levels", cfg.levels, "number of refinement levels");
  rob->add_option("--n0", cfg.n0, "coarsest mesh subdivision");
  rob->add_option("--param", cfg.robust_param, "parameter to sweep");
  rob->add_option("--values", cfg.robust_values, "sweep values")->delimiter(',');

  CLI::App* slab = app.add_subcommand("slab", "transient tracer infiltration");
  add_common(slab);
  slab->add_option("--nx", cfg.nx, "cells along x");
  slab->add_option("--ny", cfg.ny, "cells along y");
  slab->add_option("--dt", cfg.transient.dt, "time step [s]");
  slab->add_option("--tend", cfg.transient.t_end, "final time [s]");
  slab->add_flag("--vtk", cfg.write_vtk, "write VTK snapshots");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot open config " + config_path);
      std::stringstream ss;
      ss << in.rdbuf();
      // file values first, then the flags stomp them on a re-parse
      cfg = parse_config_json(ss.str());
      app.clear();
      app.parse(argc, argv);
    }
    if (conv->parsed()) cfg.experiment = "convergence";
    if (rob->parsed()) cfg.experiment = "robustness";
    if (slab->parsed()) cfg.experiment = "slab";
    return run_experiment(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace porodiff
