#include "porodiff/quadrature.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace porodiff {

namespace {

struct TriPoint {
  double x, y, w;
};

// Appends the S3 orbit of a barycentric point (a,a,1-2a): permutations of the
// first barycentric coordinate pattern. For a centroid pass a = 1/3.
void orbit3(std::vector<TriPoint>& pts, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  pts.push_back({a, a, w});
  pts.push_back({b, a, w});
  pts.push_back({a, b, w});
}

// Appends the 6-point orbit of barycentric (a, b, 1-a-b).
void orbit6(std::vector<TriPoint>& pts, double a, double b, double w) {
  const double c = 1.0 - a - b;
  pts.push_back({a, b, w});
  pts.push_back({b, a, w});
  pts.push_back({a, c, w});
  pts.push_back({c, a, w});
  pts.push_back({b, c, w});
  pts.push_back({c, b, w});
}

QuadratureRule pack(const std::vector<TriPoint>& pts, int degree) {
  QuadratureRule r;
  r.points.resize(static_cast<int>(pts.size()), 2);
  r.weights.resize(static_cast<int>(pts.size()));
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
    r.points(i, 0) = pts[i].x;
    r.points(i, 1) = pts[i].y;
    // Tabulated weights are normalized to sum 1; reference triangle area is 1/2.
    r.weights[i] = 0.5 * pts[i].w;
  }
  r.exactness_degree = degree;
  return r;
}

}  // namespace

QuadratureRule triangle_rule(int degree) {
  if (degree < 1 || degree > 8)
    throw std::invalid_argument(
        "triangle_rule: unsupported degree (supported range is 1..8)");

  std::vector<TriPoint> pts;
  switch (degree) {
    case 1:
      pts.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0});
      return pack(pts, 1);
    case 2:
      orbit3(pts, 1.0 / 6.0, 1.0 / 3.0);
      return pack(pts, 2);
    case 3:
    case 4:
      // Dunavant degree-4 rule (6 points, positive weights).
      orbit3(pts, 0.091576213509771, 0.109951743655322);
      orbit3(pts, 0.445948490915965, 0.223381589678011);
      return pack(pts, 4);
    case 5:
      // Dunavant degree-5 rule (7 points).
      pts.push_back({1.0 / 3.0, 1.0 / 3.0, 0.225});
      orbit3(pts, 0.101286507323456, 0.125939180544827);
      orbit3(pts, 0.470142064105115, 0.132394152788506);
      return pack(pts, 5);
    case 6:
      // Dunavant degree-6 rule (12 points).
      orbit3(pts, 0.063089014491502, 0.050844906370207);
      orbit3(pts, 0.249286745170910, 0.116786275726379);
      orbit6(pts, 0.053145049844817, 0.310352451033784, 0.082851075618374);
      return pack(pts, 6);
    case 7:
    case 8:
      // Dunavant degree-8 rule (16 points, positive weights).
      pts.push_back({1.0 / 3.0, 1.0 / 3.0, 0.144315607677787168});
      orbit3(pts, 0.459292588292723156, 0.0950916342672846248);
      orbit3(pts, 0.170569307751760207, 0.10321737053471825);
      orbit3(pts, 0.0505472283170309755, 0.0324584976231980803);
      orbit6(pts, 0.00839477740995760534, 0.263112829634638113, 0.0272303141744349943);
      return pack(pts, 8);
    default:
      break;
  }
  throw std::logic_error("triangle_rule: unreachable");
}

QuadratureRule interval_rule(int degree) {
  if (degree < 1)
    throw std::invalid_argument("interval_rule: degree must be >= 1");
  const int n = (degree + 2) / 2;  // n-point Gauss exact to 2n-1

  // Newton iteration on Legendre polynomials over [-1,1].
  Eigen::VectorXd x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    x[i] = t;
    w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }

  QuadratureRule r;
  r.points.resize(n, 2);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    r.points(i, 0) = 0.5 * (1.0 - x[i]);  // map to [0,1], ascending
    r.points(i, 1) = 0.0;
    r.weights[i] = 0.5 * w[i];
  }
  r.exactness_degree = 2 * n - 1;
  return r;
}

}  // namespace porodiff
