#pragma once

#include <string>

#include <Eigen/Dense>

namespace porodiff {

using Mat2 = Eigen::Matrix2d;

// Stress-dependent diffusivity laws. All evaluate to a symmetric 2x2 tensor
// whose eigenvalues are kept above a positivity floor of 1e-8 * D0 (the
// hindered and quadratic variants can otherwise degenerate).
//
//   Constant     D0 I
//   ExpTrace     eta0 D0 I + eta1 exp(-eta1 tr s) I
//   IsoExp       D0 I + D0 exp(-eta0 tr s) I
//   Quadratic    eta0 D0 I - eta2 D0 s + eta2 D0 s^2
//   HinderedExp  (D0 - D0 exp(-eta |tr s|)) I
enum class LawKind { Constant, ExpTrace, IsoExp, Quadratic, HinderedExp };

LawKind law_from_string(const std::string& name);
std::string to_string(LawKind kind);

struct LawDiagnostics {
  long clamp_count = 0;    // eigenvalue floored
  long kink_count = 0;     // one-sided derivative taken at tr s = 0
};

struct DiffusionLaw {
  LawKind kind = LawKind::Constant;
  double D0 = 1.0;
  double eta0 = 1.0;
  double eta1 = 0.01;
  double eta2 = 1e-5;
  double eta = 2e-5;

  double floor() const { return 1e-8 * D0; }

  Mat2 eval(const Mat2& sigma, LawDiagnostics* diag = nullptr) const;

  // Directional derivative dD/dsigma[dsigma] of the unfloored law. At the
  // |tr s| kink of HinderedExp the right-sided derivative is returned and the
  // kink counter is bumped.
  Mat2 derivative(const Mat2& sigma, const Mat2& dsigma,
                  LawDiagnostics* diag = nullptr) const;

  // Analytic Lipschitz constant valid for Frobenius norms of arguments
  // bounded by `radius` (prop-style bound used by the sampling test).
  double lipschitz_bound(double radius) const;
};

}  // namespace porodiff
