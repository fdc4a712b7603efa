#pragma once

#include <array>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "porodiff/mesh.hpp"

namespace porodiff {

using Mat2 = Eigen::Matrix2d;
using PointList = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Families of the AFW-based discretization of order k:
//   LagrangeP       continuous scalar P_{k+1}          (fluid pressure, tracer)
//   DGScalar        discontinuous scalar P_k           (total pressure)
//   DGVector        discontinuous vector P_k           (displacement)
//   DGSkew          discontinuous skew tensor P_k      (rotation; one scalar
//                   component g per basis, gamma = [[0,g],[-g,0]])
//   BdmRow          H(div)-conforming BDM_{k+1} vector  (one stress row)
//   DGTensor        discontinuous full tensor P_{k+1}  (strain)
enum class ElementFamily { LagrangeP, DGScalar, DGVector, DGSkew, BdmRow, DGTensor };

// Polynomial degree of the family for order-k elements.
int family_degree(ElementFamily fam, int k);
int family_ncomp(ElementFamily fam);

// Affine map F(xhat) = B xhat + b with det B > 0 and the contravariant Piola
// transform v = B vhat / det B (which maps div as div v = divhat / det B and
// preserves edge normal fluxes).
struct PushForward {
  Mat2 B;
  Vec2 b;
  double det;

  Vec2 map(const Vec2& xhat) const { return B * xhat + b; }
  Vec2 piola(const Vec2& vhat) const { return B * vhat / det; }
  double piola_div(double divhat) const { return divhat / det; }
};

// Map taking the reference triangle (0,0),(1,0),(0,1) to the given cell.
PushForward affine_map(const std::array<Vec2, 3>& phys);

// Canonical frame of one cell edge: parameterized x(s) = a + s (b - a),
// s in [0,1], with a fixed normal n. On mesh cells the frame is global
// (a = lower vertex id, n outward from the facet's owner cell), so the two
// cells sharing a facet agree on every edge degree of freedom.
struct EdgeFrame {
  Vec2 a, b, n;
  double length() const { return (b - a).norm(); }
};

struct CellGeometry {
  std::array<Vec2, 3> verts;  // counterclockwise
  std::array<EdgeFrame, 3> edges;  // local edge i opposite vertex i

  double area() const;
  Vec2 centroid() const;
  double diameter() const;
};

CellGeometry cell_geometry(const Mesh& mesh, int cell);
// Reference triangle with self-consistent canonical edge frames.
CellGeometry reference_geometry();

// Basis of one family on one (physical) cell, constructed against the global
// degrees of freedom: nodal values for Lagrange, canonical edge moments plus
// interior moments for BDM, plain scaled monomials for the L2 families.
class CellBasis {
 public:
  CellBasis(const CellGeometry& geom, ElementFamily fam, int k);

  ElementFamily family() const { return fam_; }
  int order() const { return k_; }
  int ndofs() const { return ndofs_; }
  int ncomp() const { return family_ncomp(fam_); }
  const CellGeometry& geometry() const { return geom_; }

  // values[c](i, q) = component c of basis i at point q. Points are physical.
  std::vector<Eigen::MatrixXd> values(const PointList& pts) const;
  // Gradients, defined for the scalar H1/L2 families only.
  void gradients(const PointList& pts, Eigen::MatrixXd& gx, Eigen::MatrixXd& gy) const;
  // Row divergence, defined for BdmRow.
  Eigen::MatrixXd divergence(const PointList& pts) const;

  // Applies the element's degrees of freedom to an arbitrary smooth function
  // (the local interpolation operator). Scalar families take a scalar
  // function; BdmRow/DGVector take a vector function; DGTensor a 2x2 tensor;
  // DGSkew the scalar component g.
  Eigen::VectorXd interpolate(const std::function<double(const Vec2&)>& f) const;
  Eigen::VectorXd interpolate_vector(
      const std::function<Vec2(const Vec2&)>& f) const;
  Eigen::VectorXd interpolate_tensor(
      const std::function<Mat2(const Vec2&)>& f) const;

  // DOF-evaluation matrix of the constructed basis; identity iff unisolvent.
  Eigen::MatrixXd dof_matrix() const;

 private:
  CellGeometry geom_;
  ElementFamily fam_;
  int k_;
  int ndofs_;
  int scalar_dim_;        // dim P_d on the cell
  Vec2 center_;
  double scale_;
  // Coefficients of each basis function in the (component-expanded) scaled
  // monomial basis: coeff_(m, i) = weight of monomial-block m in basis i.
  Eigen::MatrixXd coeff_;

  Eigen::MatrixXd monomial_values(const PointList& pts, int degree) const;
  void monomial_gradients(const PointList& pts, int degree, Eigen::MatrixXd& gx,
                          Eigen::MatrixXd& gy) const;
  Eigen::MatrixXd dof_functionals_on_monomials() const;
  Eigen::VectorXd apply_functionals(
      const std::function<Eigen::VectorXd(const Vec2&)>& f) const;
};

}  // namespace porodiff
