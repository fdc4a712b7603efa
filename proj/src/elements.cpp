#include "porodiff/elements.hpp"

#include <cmath>
#include <stdexcept>

#include "porodiff/quadrature.hpp"

namespace porodiff {

namespace {

int scalar_space_dim(int degree) { return (degree + 1) * (degree + 2) / 2; }

// Shifted Legendre polynomials on [0,1].
double legendre01(int j, double s) {
  switch (j) {
    case 0: return 1.0;
    case 1: return 2.0 * s - 1.0;
    case 2: return 6.0 * s * s - 6.0 * s + 1.0;
    case 3: return 20.0 * s * s * s - 30.0 * s * s + 12.0 * s - 1.0;
    default: throw std::invalid_argument("legendre01: order not supported");
  }
}

std::array<EdgeFrame, 3> canonical_edges(const std::array<Vec2, 3>& v,
                                         const std::array<int, 3>& ids) {
  static constexpr int ev[3][2] = {{1, 2}, {2, 0}, {0, 1}};
  std::array<EdgeFrame, 3> edges;
  for (int e = 0; e < 3; ++e) {
    int la = ev[e][0], lb = ev[e][1];
    if (ids[la] > ids[lb]) std::swap(la, lb);
    EdgeFrame fr;
    fr.a = v[la];
    fr.b = v[lb];
    const Vec2 d = fr.b - fr.a;
    Vec2 n(d.y(), -d.x());
    n.normalize();
    if (n.dot(v[e] - fr.a) > 0.0) n = -n;  // outward: away from opposite vertex
    fr.n = n;
    edges[e] = fr;
  }
  return edges;
}

}  // namespace

int family_degree(ElementFamily fam, int k) {
  switch (fam) {
    case ElementFamily::LagrangeP:
    case ElementFamily::BdmRow:
    case ElementFamily::DGTensor:
      return k + 1;
    case ElementFamily::DGScalar:
    case ElementFamily::DGVector:
    case ElementFamily::DGSkew:
      return k;
  }
  return 0;
}

int family_ncomp(ElementFamily fam) {
  switch (fam) {
    case ElementFamily::LagrangeP:
    case ElementFamily::DGScalar:
    case ElementFamily::DGSkew:
      return 1;
    case ElementFamily::DGVector:
    case ElementFamily::BdmRow:
      return 2;
    case ElementFamily::DGTensor:
      return 4;
  }
  return 0;
}

PushForward affine_map(const std::array<Vec2, 3>& phys) {
  PushForward pf;
  pf.B.col(0) = phys[1] - phys[0];
  pf.B.col(1) = phys[2] - phys[0];
  pf.b = phys[0];
  pf.det = pf.B.determinant();
  if (pf.det <= 0.0)
    throw std::invalid_argument("affine_map: degenerate cell (det <= 0)");
  return pf;
}

double CellGeometry::area() const {
  return 0.5 * ((verts[1] - verts[0]).x() * (verts[2] - verts[0]).y() -
                (verts[2] - verts[0]).x() * (verts[1] - verts[0]).y());
}

Vec2 CellGeometry::centroid() const { return (verts[0] + verts[1] + verts[2]) / 3.0; }

double CellGeometry::diameter() const {
  return std::max({(verts[1] - verts[0]).norm(), (verts[2] - verts[1]).norm(),
                   (verts[0] - verts[2]).norm()});
}

CellGeometry cell_geometry(const Mesh& mesh, int cell) {
  CellGeometry g;
  g.verts = mesh.cell_vertices(cell);
  for (int e = 0; e < 3; ++e) {
    const Facet& f = mesh.facet(mesh.cell_facet(cell, e));
    g.edges[e] = {mesh.vertex(f.verts[0]), mesh.vertex(f.verts[1]), f.normal};
  }
  return g;
}

CellGeometry reference_geometry() {
  CellGeometry g;
  g.verts = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  g.edges = canonical_edges(g.verts, {0, 1, 2});
  return g;
}

CellBasis::CellBasis(const CellGeometry& geom, ElementFamily fam, int k)
    : geom_(geom), fam_(fam), k_(k) {
  if (k < 0) throw std::invalid_argument("CellBasis: order must be >= 0");
  const int degree = family_degree(fam, k);
  if (fam == ElementFamily::LagrangeP && degree > 2)
    throw std::invalid_argument("CellBasis: Lagrange degree > 2 not implemented");
  if (fam == ElementFamily::BdmRow && degree > 2)
    throw std::invalid_argument("CellBasis: BDM degree > 2 not implemented");

  scalar_dim_ = scalar_space_dim(degree);
  center_ = geom_.centroid();
  scale_ = geom_.diameter();
  ndofs_ = family_ncomp(fam_) * scalar_dim_;

  switch (fam_) {
    case ElementFamily::DGScalar:
    case ElementFamily::DGVector:
    case ElementFamily::DGSkew:
    case ElementFamily::DGTensor:
      coeff_ = Eigen::MatrixXd::Identity(ndofs_, ndofs_);
      break;
    case ElementFamily::LagrangeP:
    case ElementFamily::BdmRow: {
      const Eigen::MatrixXd V = dof_functionals_on_monomials();
      Eigen::FullPivLU<Eigen::MatrixXd> lu(V);
      if (!lu.isInvertible())
        throw std::runtime_error("CellBasis: degenerate DOF set (basis not unisolvent)");
      coeff_ = lu.inverse();
      break;
    }
  }
}

Eigen::MatrixXd CellBasis::monomial_values(const PointList& pts, int degree) const {
  const int npts = static_cast<int>(pts.rows());
  Eigen::MatrixXd m(scalar_space_dim(degree), npts);
  for (int q = 0; q < npts; ++q) {
    const double xi = (pts(q, 0) - center_.x()) / scale_;
    const double eta = (pts(q, 1) - center_.y()) / scale_;
    int idx = 0;
    for (int d = 0; d <= degree; ++d)
      for (int b = 0; b <= d; ++b)  // term xi^(d-b) eta^b
        m(idx++, q) = std::pow(xi, d - b) * std::pow(eta, b);
  }
  return m;
}

void CellBasis::monomial_gradients(const PointList& pts, int degree,
                                   Eigen::MatrixXd& gx, Eigen::MatrixXd& gy) const {
  const int npts = static_cast<int>(pts.rows());
  const int dim = scalar_space_dim(degree);
  gx.resize(dim, npts);
  gy.resize(dim, npts);
  for (int q = 0; q < npts; ++q) {
    const double xi = (pts(q, 0) - center_.x()) / scale_;
    const double eta = (pts(q, 1) - center_.y()) / scale_;
    int idx = 0;
    for (int d = 0; d <= degree; ++d) {
      for (int b = 0; b <= d; ++b) {
        const int a = d - b;
        gx(idx, q) = a > 0 ? a * std::pow(xi, a - 1) * std::pow(eta, b) / scale_ : 0.0;
        gy(idx, q) = b > 0 ? b * std::pow(xi, a) * std::pow(eta, b - 1) / scale_ : 0.0;
        ++idx;
      }
    }
  }
}

Eigen::MatrixXd CellBasis::dof_functionals_on_monomials() const {
  const int degree = family_degree(fam_, k_);

  if (fam_ == ElementFamily::LagrangeP) {
    // Nodal: vertices, then (for P2) local-edge midpoints.
    const int nn = degree == 1 ? 3 : 6;
    PointList nodes(nn, 2);
    for (int v = 0; v < 3; ++v) nodes.row(v) = geom_.verts[v].transpose();
    if (degree == 2)
      for (int e = 0; e < 3; ++e)
        nodes.row(3 + e) = (0.5 * (geom_.edges[e].a + geom_.edges[e].b)).transpose();
    return monomial_values(nodes, degree).transpose();
  }

  // BdmRow: vector monomials (m_i, 0), (0, m_i); edge normal moments against
  // shifted Legendre polynomials, then interior moments for degree 2.
  const int D = scalar_dim_;
  const int n = 2 * D;
  const int per_edge = degree + 1;
  Eigen::MatrixXd V(n, n);

  const QuadratureRule edge_q = interval_rule(2 * degree + 2);
  for (int e = 0; e < 3; ++e) {
    const EdgeFrame& fr = geom_.edges[e];
    for (int j = 0; j < per_edge; ++j) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      for (int q = 0; q < edge_q.size(); ++q) {
        const double s = edge_q.points(q, 0);
        PointList pt(1, 2);
        pt.row(0) = (fr.a + s * (fr.b - fr.a)).transpose();
        const Eigen::MatrixXd m = monomial_values(pt, degree);
        const double w = edge_q.weights[q] * legendre01(j, s);
        for (int i = 0; i < D; ++i) {
          row(i) += w * m(i, 0) * fr.n.x();
          row(D + i) += w * m(i, 0) * fr.n.y();
        }
      }
      V.row(e * per_edge + j) = row;
    }
  }

  if (degree == 2) {
    // Interior moments: componentwise means and one bubble-curl moment.
    const QuadratureRule vol_q = triangle_rule(6);
    const PushForward pf = affine_map(geom_.verts);
    // Barycentric gradients on the physical cell.
    const Mat2 Jinv_t = pf.B.inverse().transpose();
    const Vec2 gl1 = Jinv_t * Vec2(1, 0), gl2 = Jinv_t * Vec2(0, 1);
    const Vec2 gl0 = -gl1 - gl2;
    const double area = geom_.area();
    const double hK = geom_.diameter();

    std::array<Eigen::RowVectorXd, 3> rows;
    for (auto& r : rows) r = Eigen::RowVectorXd::Zero(n);
    for (int q = 0; q < vol_q.size(); ++q) {
      PointList pt(1, 2);
      pt.row(0) = pf.map(Vec2(vol_q.points(q, 0), vol_q.points(q, 1))).transpose();
      const Eigen::MatrixXd m = monomial_values(pt, degree);
      const double w = vol_q.weights[q] * pf.det / area;  // mean-normalized
      const double l0 = 1.0 - vol_q.points(q, 0) - vol_q.points(q, 1);
      const double l1 = vol_q.points(q, 0), l2 = vol_q.points(q, 1);
      const Vec2 grad_b = gl0 * l1 * l2 + gl1 * l0 * l2 + gl2 * l0 * l1;
      const Vec2 curl_b(grad_b.y(), -grad_b.x());
      for (int i = 0; i < D; ++i) {
        rows[0](i) += w * m(i, 0);
        rows[1](D + i) += w * m(i, 0);
        rows[2](i) += w * hK * curl_b.x() * m(i, 0);
        rows[2](D + i) += w * hK * curl_b.y() * m(i, 0);
      }
    }
    for (int r = 0; r < 3; ++r) V.row(3 * per_edge + r) = rows[r];
  }
  return V;
}

std::vector<Eigen::MatrixXd> CellBasis::values(const PointList& pts) const {
  const int degree = family_degree(fam_, k_);
  const Eigen::MatrixXd m = monomial_values(pts, degree);
  const int npts = static_cast<int>(pts.rows());
  const int nc = ncomp();
  std::vector<Eigen::MatrixXd> out(nc, Eigen::MatrixXd::Zero(ndofs_, npts));

  switch (fam_) {
    case ElementFamily::LagrangeP:
    case ElementFamily::DGScalar:
    case ElementFamily::DGSkew:
      out[0] = coeff_.transpose() * m;
      return out;
    case ElementFamily::DGVector:
      out[0].topRows(scalar_dim_) = m;
      out[1].bottomRows(scalar_dim_) = m;
      return out;
    case ElementFamily::DGTensor:
      for (int c = 0; c < 4; ++c) out[c].middleRows(c * scalar_dim_, scalar_dim_) = m;
      return out;
    case ElementFamily::BdmRow:
      // basis i = sum_j coeff_(j, i) * vector-monomial j
      out[0] = coeff_.transpose().leftCols(scalar_dim_) * m;
      out[1] = coeff_.transpose().rightCols(scalar_dim_) * m;
      return out;
  }
  return out;
}

void CellBasis::gradients(const PointList& pts, Eigen::MatrixXd& gx,
                          Eigen::MatrixXd& gy) const {
  if (fam_ != ElementFamily::LagrangeP)
    throw std::invalid_argument(
        "CellBasis: gradients defined for the H1 Lagrange family only");
  Eigen::MatrixXd mgx, mgy;
  monomial_gradients(pts, family_degree(fam_, k_), mgx, mgy);
  gx = coeff_.transpose() * mgx;
  gy = coeff_.transpose() * mgy;
}

Eigen::MatrixXd CellBasis::divergence(const PointList& pts) const {
  if (fam_ != ElementFamily::BdmRow)
    throw std::invalid_argument("CellBasis: divergence defined for BdmRow only");
  Eigen::MatrixXd mgx, mgy;
  monomial_gradients(pts, family_degree(fam_, k_), mgx, mgy);
  return coeff_.transpose().leftCols(scalar_dim_) * mgx +
         coeff_.transpose().rightCols(scalar_dim_) * mgy;
}

Eigen::VectorXd CellBasis::apply_functionals(
    const std::function<Eigen::VectorXd(const Vec2&)>& f) const {
  // L2 families: local projection in the monomial basis.
  if (fam_ != ElementFamily::LagrangeP && fam_ != ElementFamily::BdmRow) {
    const int degree = family_degree(fam_, k_);
    const QuadratureRule q = triangle_rule(std::min(8, 2 * degree + 4));
    const PushForward pf = affine_map(geom_.verts);
    PointList pts(q.size(), 2);
    for (int i = 0; i < q.size(); ++i)
      pts.row(i) = pf.map(Vec2(q.points(i, 0), q.points(i, 1))).transpose();
    const auto vals = values(pts);
    const int nc = ncomp();
    Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(ndofs_, ndofs_);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(ndofs_);
    for (int i = 0; i < q.size(); ++i) {
      const double w = q.weights[i] * pf.det;
      const Eigen::VectorXd fv = f(pts.row(i).transpose());
      for (int c = 0; c < nc; ++c) {
        mass += w * vals[c].col(i) * vals[c].col(i).transpose();
        rhs += w * fv[c] * vals[c].col(i);
      }
    }
    return mass.ldlt().solve(rhs);
  }

  if (fam_ == ElementFamily::LagrangeP) {
    const int degree = family_degree(fam_, k_);
    const int nn = degree == 1 ? 3 : 6;
    Eigen::VectorXd dofs(nn);
    for (int v = 0; v < 3; ++v) dofs[v] = f(geom_.verts[v])[0];
    if (degree == 2)
      for (int e = 0; e < 3; ++e)
        dofs[3 + e] = f(0.5 * (geom_.edges[e].a + geom_.edges[e].b))[0];
    return dofs;
  }

  // BdmRow: canonical moments.
  const int degree = family_degree(fam_, k_);
  const int per_edge = degree + 1;
  Eigen::VectorXd dofs = Eigen::VectorXd::Zero(ndofs_);
  const QuadratureRule edge_q = interval_rule(2 * degree + 6);
  for (int e = 0; e < 3; ++e) {
    const EdgeFrame& fr = geom_.edges[e];
    for (int q = 0; q < edge_q.size(); ++q) {
      const double s = edge_q.points(q, 0);
      const Vec2 x = fr.a + s * (fr.b - fr.a);
      const Eigen::VectorXd fv = f(x);
      const double vn = fv[0] * fr.n.x() + fv[1] * fr.n.y();
      for (int j = 0; j < per_edge; ++j)
        dofs[e * per_edge + j] += edge_q.weights[q] * vn * legendre01(j, s);
    }
  }
  if (degree == 2) {
    const QuadratureRule vol_q = triangle_rule(8);
    const PushForward pf = affine_map(geom_.verts);
    const Mat2 Jinv_t = pf.B.inverse().transpose();
    const Vec2 gl1 = Jinv_t * Vec2(1, 0), gl2 = Jinv_t * Vec2(0, 1);
    const Vec2 gl0 = -gl1 - gl2;
    const double area = geom_.area();
    const double hK = geom_.diameter();
    for (int q = 0; q < vol_q.size(); ++q) {
      const double l1 = vol_q.points(q, 0), l2 = vol_q.points(q, 1);
      const double l0 = 1.0 - l1 - l2;
      const Vec2 x = pf.map(Vec2(l1, l2));
      const Eigen::VectorXd fv = f(x);
      const double w = vol_q.weights[q] * pf.det / area;
      const Vec2 grad_b = gl0 * l1 * l2 + gl1 * l0 * l2 + gl2 * l0 * l1;
      const Vec2 curl_b(grad_b.y(), -grad_b.x());
      dofs[3 * per_edge + 0] += w * fv[0];
      dofs[3 * per_edge + 1] += w * fv[1];
      dofs[3 * per_edge + 2] += w * hK * (curl_b.x() * fv[0] + curl_b.y() * fv[1]);
    }
  }
  return dofs;
}

Eigen::VectorXd CellBasis::interpolate(const std::function<double(const Vec2&)>& f) const {
  return apply_functionals([&](const Vec2& x) {
    Eigen::VectorXd v(1);
    v[0] = f(x);
    return v;
  });
}

Eigen::VectorXd CellBasis::interpolate_vector(
    const std::function<Vec2(const Vec2&)>& f) const {
  return apply_functionals([&](const Vec2& x) {
    Eigen::VectorXd v(2);
    v.head<2>() = f(x);
    return v;
  });
}

Eigen::VectorXd CellBasis::interpolate_tensor(
    const std::function<Mat2(const Vec2&)>& f) const {
  if (fam_ != ElementFamily::DGTensor)
    throw std::invalid_argument("interpolate_tensor: DGTensor only");
  return apply_functionals([&](const Vec2& x) {
    const Mat2 t = f(x);
    Eigen::VectorXd v(4);
    v << t(0, 0), t(0, 1), t(1, 0), t(1, 1);
    return v;
  });
}

Eigen::MatrixXd CellBasis::dof_matrix() const {
  switch (fam_) {
    case ElementFamily::LagrangeP:
    case ElementFamily::BdmRow:
      return dof_functionals_on_monomials() * coeff_;
    default:
      return Eigen::MatrixXd::Identity(ndofs_, ndofs_);
  }
}

}  // namespace porodiff
