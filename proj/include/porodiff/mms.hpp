#pragma once

#include <memory>
#include <string>
#include <vector>

#include "porodiff/coupler.hpp"
#include "porodiff/forms.hpp"

namespace porodiff {

using TensorField = std::function<Mat2(const Vec2&)>;

// Closed-form exact fields plus the forcings that make them solve the
// governing system. All derived members are hand-derived closed forms; the
// verification tests check them against an independent finite-difference
// oracle before any convergence run.
struct ManufacturedCase {
  ScalarField omega, p, ptilde, trsig;
  VectorField u, grad_p, grad_omega, flux;  // flux = kappa/mu_f grad p - rho_f kappa g
  TensorField t, gamma, sigma;
  VectorField div_sigma;
  ScalarField m, ell;
  VectorField f;
};

// Example-1 smooth solutions on the unit square (trigonometric/exponential
// fields, displacement with the 1/lambda_s quadratic part).
ManufacturedCase example1_case(const MaterialParams& par, const DiffusionLaw& law);

// Globally representable cases for the patch test (constant law):
// k = 0: constant u and p, linear tracer; k = 1: linear u, p, tracer.
ManufacturedCase patch_case(const MaterialParams& par, const DiffusionLaw& law, int k);

double integrate_scalar(const Mesh& mesh, const ScalarField& f, int quad_degree);

// Errors in the natural norms: L2 for strain, total pressure, displacement,
// rotation; H(div) for stress; H1 for fluid pressure and tracer.
struct ErrorTuple {
  double e0_t = 0, ediv_sig = 0, e0_pt = 0, e0_u = 0, e0_gam = 0, e1_p = 0, e1_om = 0;
  double operator[](int i) const {
    const double v[7] = {e0_t, ediv_sig, e0_pt, e0_u, e0_gam, e1_p, e1_om};
    return v[i];
  }
};

ErrorTuple error_norms(const Mesh& mesh, const PoroSpaces& sp, const FESpace& om_space,
                       const CoupledSolution& sol, const ManufacturedCase& mc,
                       int quad_degree);

// One fully-prepared Example-1 style verification problem on the unit square
// with Gamma on the whole boundary, natural displacement/flux loads and the
// active trace constraint.
struct MmsProblem {
  std::unique_ptr<Mesh> mesh;
  std::unique_ptr<PoroSpaces> spaces;
  std::unique_ptr<FESpace> omega_space;
  std::unique_ptr<CoupledDriver> driver;
  ManufacturedCase mc;
};

MmsProblem setup_mms_problem(int n, int k, MaterialParams par, const DiffusionLaw& law,
                             const ManufacturedCase& mc, const SolverOptions& opt);

// Interpolants of the exact fields (canonical moments / nodes / local L2
// projections), used by consistency tests and the patch test.
PoroState interpolate_state(const Mesh& mesh, const PoroSpaces& sp,
                            const ManufacturedCase& mc);
Eigen::VectorXd interpolate_scalar_field(const Mesh& mesh, const FESpace& space,
                                         const ScalarField& f);

struct ConvergenceRow {
  int dofs = 0;
  double h = 0.0;
  ErrorTuple e;
  bool converged = true;
  int iterations = 0;
};

struct ConvergenceReport {
  int dim = 2;  // reserved for a future 3D extension
  std::vector<ConvergenceRow> rows;
  bool partial = false;

  // rate of error column `which` between rows lvl-1 and lvl (h halving)
  double rate(int lvl, int which) const;
  std::string to_csv() const;
};

using LevelSink = std::function<void(int level, const CoupledSolution&)>;

ConvergenceReport run_convergence(int n0, int levels, int k, const MaterialParams& par,
                                  const DiffusionLaw& law, const SolverOptions& opt,
                                  const LevelSink& on_level = {});

}  // namespace porodiff
