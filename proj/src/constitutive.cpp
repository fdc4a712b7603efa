#include "porodiff/constitutive.hpp"

#include <cmath>
#include <stdexcept>

namespace porodiff {

LawKind law_from_string(const std::string& name) {
  if (name == "constant") return LawKind::Constant;
  if (name == "exptrace") return LawKind::ExpTrace;
  if (name == "isoexp") return LawKind::IsoExp;
  if (name == "quadratic") return LawKind::Quadratic;
  if (name == "hinderedexp") return LawKind::HinderedExp;
  throw std::invalid_argument("unknown diffusion law '" + name +
                              "' (constant|exptrace|isoexp|quadratic|hinderedexp)");
}

std::string to_string(LawKind kind) {
  switch (kind) {
    case LawKind::Constant: return "constant";
    case LawKind::ExpTrace: return "exptrace";
    case LawKind::IsoExp: return "isoexp";
    case LawKind::Quadratic: return "quadratic";
    case LawKind::HinderedExp: return "hinderedexp";
  }
  return "?";
}

namespace {

Mat2 floor_spd(const Mat2& d, double eps, LawDiagnostics* diag) {
  // Closed-form symmetric 2x2 eigendecomposition.
  const double a = d(0, 0), b = 0.5 * (d(0, 1) + d(1, 0)), c = d(1, 1);
  const double mean = 0.5 * (a + c);
  const double r = std::sqrt(0.25 * (a - c) * (a - c) + b * b);
  const double l1 = mean - r, l2 = mean + r;
  if (l1 >= eps) {
    Mat2 sym;
    sym << a, b, b, c;
    return sym;
  }
  if (diag) ++diag->clamp_count;
  const double f1 = std::max(l1, eps), f2 = std::max(l2, eps);
  Eigen::Vector2d v1;
  if (r > 1e-300) {
    if (std::abs(b) > 1e-300 * std::abs(a - c))
      v1 = Eigen::Vector2d(l1 - c, b).normalized();
    else
      v1 = a <= c ? Eigen::Vector2d(1, 0) : Eigen::Vector2d(0, 1);
  } else {
    v1 = Eigen::Vector2d(1, 0);
  }
  const Eigen::Vector2d v2(-v1.y(), v1.x());
  return f1 * v1 * v1.transpose() + f2 * v2 * v2.transpose();
}

}  // namespace

Mat2 DiffusionLaw::eval(const Mat2& sigma, LawDiagnostics* diag) const {
  if (!sigma.allFinite())
    throw std::invalid_argument("DiffusionLaw::eval: non-finite stress input");
  const double tr = sigma.trace();
  switch (kind) {
    case LawKind::Constant:
      return floor_spd(D0 * Mat2::Identity(), floor(), diag);
    case LawKind::ExpTrace:
      return floor_spd((eta0 * D0 + eta1 * std::exp(-eta1 * tr)) * Mat2::Identity(),
                       floor(), diag);
    case LawKind::IsoExp:
      return floor_spd((D0 + D0 * std::exp(-eta0 * tr)) * Mat2::Identity(), floor(),
                       diag);
    case LawKind::Quadratic: {
      const Mat2 sym = 0.5 * (sigma + sigma.transpose());
      const Mat2 d = eta0 * D0 * Mat2::Identity() - eta2 * D0 * sym +
                     eta2 * D0 * sym * sym;
      return floor_spd(d, floor(), diag);
    }
    case LawKind::HinderedExp:
      return floor_spd((D0 - D0 * std::exp(-eta * std::abs(tr))) * Mat2::Identity(),
                       floor(), diag);
  }
  throw std::logic_error("DiffusionLaw::eval: unreachable");
}

Mat2 DiffusionLaw::derivative(const Mat2& sigma, const Mat2& dsigma,
                              LawDiagnostics* diag) const {
  if (!sigma.allFinite() || !dsigma.allFinite())
    throw std::invalid_argument("DiffusionLaw::derivative: non-finite input");
  const double tr = sigma.trace();
  const double dtr = dsigma.trace();
  switch (kind) {
    case LawKind::Constant:
      return Mat2::Zero();
    case LawKind::ExpTrace:
      return -eta1 * eta1 * std::exp(-eta1 * tr) * dtr * Mat2::Identity();
    case LawKind::IsoExp:
      return -eta0 * D0 * std::exp(-eta0 * tr) * dtr * Mat2::Identity();
    case LawKind::Quadratic: {
      const Mat2 s = 0.5 * (sigma + sigma.transpose());
      const Mat2 ds = 0.5 * (dsigma + dsigma.transpose());
      return -eta2 * D0 * ds + eta2 * D0 * (s * ds + ds * s);
    }
    case LawKind::HinderedExp: {
      if (tr == 0.0 && diag) ++diag->kink_count;
      const double sign = tr >= 0.0 ? 1.0 : -1.0;  // one-sided at the kink
      return D0 * eta * sign * std::exp(-eta * std::abs(tr)) * dtr * Mat2::Identity();
    }
  }
  throw std::logic_error("DiffusionLaw::derivative: unreachable");
}

double DiffusionLaw::lipschitz_bound(double radius) const {
  // |tr s| <= sqrt(2) ||s||_F and ||scalar * I||_F = sqrt(2) |scalar|.
  const double trmax = std::sqrt(2.0) * radius;
  switch (kind) {
    case LawKind::Constant:
      return 0.0;
    case LawKind::ExpTrace:
      return 2.0 * eta1 * eta1 * std::exp(eta1 * trmax);
    case LawKind::IsoExp:
      return 2.0 * eta0 * D0 * std::exp(eta0 * trmax);
    case LawKind::Quadratic:
      return eta2 * D0 * (1.0 + 2.0 * radius) * 2.0;
    case LawKind::HinderedExp:
      return 2.0 * D0 * eta;
  }
  return 0.0;
}

}  // namespace porodiff
