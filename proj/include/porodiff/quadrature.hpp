#pragma once

#include <Eigen/Dense>

namespace porodiff {

// Rule on the reference triangle {(x,y): x,y >= 0, x+y <= 1} or on the unit
// interval [0,1]. Weights sum to the reference measure (1/2 resp. 1) and are
// all positive. Immutable value object.
struct QuadratureRule {
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;  // interval rules use column 0
  Eigen::VectorXd weights;
  int exactness_degree = 0;

  int size() const { return static_cast<int>(weights.size()); }
};

// Symmetric positive-weight rule, exact to at least `degree` in [1,8].
QuadratureRule triangle_rule(int degree);

// Gauss-Legendre on [0,1], exact to at least `degree` (degree >= 1).
QuadratureRule interval_rule(int degree);

}  // namespace porodiff
