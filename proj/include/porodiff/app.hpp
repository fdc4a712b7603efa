#pragma once

#include <string>
#include <vector>

#include "porodiff/coupler.hpp"
#include "porodiff/mms.hpp"

namespace porodiff {

// mmHg -> Pa; the slab boundary data are quoted in mmHg.
inline constexpr double kPaPerMmHg = 133.322387415;

// mu_s = E / (2 (1 + nu)), lambda_s = E nu / ((1 + nu)(1 - 2 nu)).
// nu = 0 yields lambda_s = 0, which MaterialParams rejects downstream.
std::pair<double, double> lame_from_E_nu(double E, double nu);

struct TransientConfig {
  double dt = 50.0;
  double t_end = 1800.0;
  double p0_pa = 9.0 * kPaPerMmHg;          // side-wall fluid pressure
  double ramp_amplitude_pa = 0.5 * kPaPerMmHg;  // p_top(t) = amp * atan(t / t0)
  double ramp_t0 = 10.0;
  double omega_in = 1.0;  // tracer concentration held on the top
};

struct RunConfig {
  std::string experiment = "convergence";  // convergence | robustness | slab
  int k = 0;
  int n0 = 4;
  int levels = 5;
  int nx = 64, ny = 64;
  MaterialParams params = MaterialParams::unity();
  DiffusionLaw law{LawKind::ExpTrace, 0.01, 1.0, 0.01};
  SolverOptions solver;
  TransientConfig transient;
  std::string robust_param = "lambda_s";
  std::vector<double> robust_values = {1.0, 1e2, 1e4, 1e8};
  std::string outdir = "out";
  bool write_vtk = false;
};

// JSON config with strict schema (unknown keys rejected), plus one-to-one
// command line overrides in the CLI layer.
RunConfig parse_config_json(const std::string& json_text);
std::string config_to_json(const RunConfig& cfg);

// Slab parameters of the transient infiltration experiment.
MaterialParams slab_params();

struct SlabResult {
  double lower_half_mean = 0.0;  // mean tracer over y < height/2
  double first_x_moment = 0.0;   // int (x - cx) omega dx
  double trsig_min = 0.0, trsig_mean = 0.0, trsig_max = 0.0;
  int steps = 0;
  long clamp_count = 0;
  double max_step_residual = 0.0;
  double load_norm = 0.0;
};

// Runs the transient slab with the configured law; writes VTK snapshots when
// requested. The final-state fields stay available through the out-params.
SlabResult run_slab(const RunConfig& cfg, std::string vtk_path = "");

void emit_fields_vtk(const std::string& path, const Mesh& mesh, const PoroSpaces& sp,
                     const FESpace& om_space, const CoupledSolution& sol,
                     const DiffusionLaw& law);

int run_experiment(const RunConfig& cfg);
int cli_main(int argc, const char* const* argv);

}  // namespace porodiff
