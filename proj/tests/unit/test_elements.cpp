#include "doctest.h"

#include <cmath>
#include <random>

#include "porodiff/elements.hpp"
#include "porodiff/mesh.hpp"
#include "porodiff/quadrature.hpp"
#include "porodiff/spaces.hpp"

using namespace porodiff;

TEST_CASE("Lagrange P1 is nodal: identity at vertices") {
  const CellGeometry g = reference_geometry();
  const CellBasis el(g, ElementFamily::LagrangeP, 0);
  PointList pts(3, 2);
  for (int v = 0; v < 3; ++v) pts.row(v) = g.verts[v].transpose();
  const auto vals = el.values(pts);
  for (int i = 0; i < 3; ++i)
    for (int q = 0; q < 3; ++q)
      CHECK(vals[0](i, q) == doctest::Approx(i == q ? 1.0 : 0.0).epsilon(1e-13));
}

TEST_CASE("DG P0 is constant 1") {
  const CellBasis el(reference_geometry(), ElementFamily::DGScalar, 0);
  REQUIRE(el.ndofs() == 1);
  PointList pts(3, 2);
  pts << 0.2, 0.3, 0.1, 0.1, 0.4, 0.5;
  const auto vals = el.values(pts);
  for (int q = 0; q < 3; ++q) CHECK(vals[0](0, q) == doctest::Approx(1.0));
}

TEST_CASE("gradient request on an L2-only family raises") {
  const CellBasis el(reference_geometry(), ElementFamily::DGVector, 0);
  PointList pts(1, 2);
  pts << 0.25, 0.25;
  Eigen::MatrixXd gx, gy;
  CHECK_THROWS(el.gradients(pts, gx, gy));
}

TEST_CASE("BDM1 row: 6 functions, unisolvent, Kronecker edge moments") {
  for (bool physical : {false, true}) {
    CellGeometry g = reference_geometry();
    if (physical) {
      const Mesh m = build_unit_square(2, BoundaryPartition::all_gamma());
      g = cell_geometry(m, 3);
    }
    const CellBasis el(g, ElementFamily::BdmRow, 0);
    REQUIRE(el.ndofs() == 6);
    const Eigen::MatrixXd D = el.dof_matrix();
    CHECK((D - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("BDM2 row: 12 functions, unisolvent") {
  const Mesh m = build_unit_square(3, BoundaryPartition::all_gamma());
  for (int c : {0, 7, 11}) {
    const CellBasis el(cell_geometry(m, c), ElementFamily::BdmRow, 1);
    REQUIRE(el.ndofs() == 12);
    const Eigen::MatrixXd D = el.dof_matrix();
    CHECK((D - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("skew family has one scalar component per basis function") {
  const CellBasis el(reference_geometry(), ElementFamily::DGSkew, 0);
  CHECK(el.ndofs() == 1);
  CHECK(el.ncomp() == 1);
  const CellBasis el1(reference_geometry(), ElementFamily::DGSkew, 1);
  CHECK(el1.ndofs() == 3);
}

TEST_CASE("piola map: identity, uniform scaling, flux preservation") {
  const std::array<Vec2, 3> ref = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  const PushForward id = affine_map(ref);
  CHECK(id.det == doctest::Approx(1.0));
  const Vec2 v(0.3, -0.7);
  CHECK((id.piola(v) - v).norm() < 1e-15);

  // Uniform scaling by s: det = s^2, v = vhat / s.
  const double s = 2.5;
  const PushForward sc = affine_map({Vec2(0, 0), Vec2(s, 0), Vec2(0, s)});
  CHECK(sc.det == doctest::Approx(s * s));
  CHECK((sc.piola(v) - v / s).norm() < 1e-14);

  // Degenerate (clockwise) cell rejected.
  CHECK_THROWS(affine_map({Vec2(0, 0), Vec2(0, 1), Vec2(1, 0)}));

  // Edge flux preservation for random affine maps: the integral of v.n over a
  // physical edge equals the reference-edge moment.
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  auto vhat = [](const Vec2& xh) {
    return Vec2(xh.x() * xh.x() + 0.5, xh.x() * xh.y() - 0.25);
  };
  const QuadratureRule q = interval_rule(10);
  auto det_of = [](const std::array<Vec2, 3>& p) {
    return (p[1] - p[0]).x() * (p[2] - p[0]).y() -
           (p[2] - p[0]).x() * (p[1] - p[0]).y();
  };
  for (int trial = 0; trial < 3; ++trial) {
    std::array<Vec2, 3> phys;
    do {
      for (auto& p : phys) p = Vec2(unif(rng), unif(rng));
    } while (det_of(phys) < 0.1);
    const PushForward pf = affine_map(phys);
    for (int e = 0; e < 3; ++e) {
      const Vec2 ah = ref[(e + 1) % 3], bh = ref[(e + 2) % 3];
      const Vec2 a = pf.map(ah), b = pf.map(bh);
      // reference moment of vhat.nhat over reference edge
      Vec2 dh = bh - ah;
      Vec2 nh(dh.y(), -dh.x());
      Vec2 d = b - a;
      Vec2 n(d.y(), -d.x());
      // physical normal consistent with the reference one under the map:
      // Piola preserves int v.n against the co-normal scaling; both sides use
      // the un-normalized rotated tangent so lengths cancel.
      double ref_moment = 0.0, phys_moment = 0.0;
      for (int i = 0; i < q.size(); ++i) {
        const double t = q.points(i, 0);
        const Vec2 xh = ah + t * dh;
        ref_moment += q.weights[i] * vhat(xh).dot(nh);
        phys_moment += q.weights[i] * pf.piola(vhat(xh)).dot(n);
      }
      CHECK(phys_moment == doctest::Approx(ref_moment).epsilon(1e-12));
    }
  }
}

TEST_CASE("dofmap counts") {
  const Mesh m2 = build_unit_square(2, BoundaryPartition::all_gamma());
  CHECK(build_dofmap(m2, ElementFamily::LagrangeP, 0).ndofs == 9);
  CHECK(build_dofmap(m2, ElementFamily::DGVector, 0).ndofs == 16);

  const Mesh m1 = build_unit_square(1, BoundaryPartition::all_gamma());
  CHECK(build_dofmap(m1, ElementFamily::BdmRow, 0).ndofs == 10);

  // P2 Lagrange on n=2: 9 vertices + 16 facets.
  CHECK(build_dofmap(m2, ElementFamily::LagrangeP, 1).ndofs == 25);
}

TEST_CASE("Hdiv dofmap: shared facet moments appear in both adjacent cells") {
  const Mesh m = build_unit_square(2, BoundaryPartition::all_gamma());
  const DofMap dm = build_dofmap(m, ElementFamily::BdmRow, 0);
  for (int f = 0; f < m.num_facets(); ++f) {
    const Facet& fc = m.facet(f);
    if (fc.cell[1] < 0) continue;
    for (int j = 0; j < 2; ++j) {
      const int g = dm.facet_dofs[f][j];
      bool found0 = false, found1 = false;
      for (int i = 0; i < dm.dofs_per_cell; ++i) {
        if (dm.dof(fc.cell[0], i) == g) found0 = true;
        if (dm.dof(fc.cell[1], i) == g) found1 = true;
      }
      CHECK(found0);
      CHECK(found1);
    }
  }
}

TEST_CASE("BDM1 interpolation of a linear field is exact; P1 interpolation of a linear scalar") {
  const Mesh m = build_unit_square(2, BoundaryPartition::all_gamma());
  auto linear_vec = [](const Vec2& x) { return Vec2(0.5 * x.x() - 0.25 * x.y() + 1.0, x.x() + 2.0 * x.y()); };
  auto linear_scalar = [](const Vec2& x) { return 3.0 * x.x() - 2.0 * x.y() + 0.5; };

  const QuadratureRule q = triangle_rule(6);
  for (int c = 0; c < m.num_cells(); ++c) {
    const CellGeometry g = cell_geometry(m, c);
    const PushForward pf = affine_map(g.verts);
    PointList pts(q.size(), 2);
    for (int i = 0; i < q.size(); ++i)
      pts.row(i) = pf.map(Vec2(q.points(i, 0), q.points(i, 1))).transpose();

    const CellBasis bdm(g, ElementFamily::BdmRow, 0);
    const Eigen::VectorXd dofs = bdm.interpolate_vector(linear_vec);
    const auto vals = bdm.values(pts);
    for (int i = 0; i < q.size(); ++i) {
      Vec2 vh = Vec2::Zero();
      for (int d = 0; d < bdm.ndofs(); ++d)
        vh += dofs[d] * Vec2(vals[0](d, i), vals[1](d, i));
      CHECK((vh - linear_vec(pts.row(i).transpose())).norm() < 1e-12);
    }

    const CellBasis lag(g, ElementFamily::LagrangeP, 0);
    const Eigen::VectorXd sd = lag.interpolate(linear_scalar);
    const auto svals = lag.values(pts);
    for (int i = 0; i < q.size(); ++i) {
      double vh = 0.0;
      for (int d = 0; d < lag.ndofs(); ++d) vh += sd[d] * svals[0](d, i);
      CHECK(vh == doctest::Approx(linear_scalar(pts.row(i).transpose())).epsilon(1e-12));
    }
  }
}

TEST_CASE("commuting diagram at k=0: div of BDM interpolant is the P0 projection of div") {
  // v = (x^2, x y), div v = 3 x; elementwise averages must agree.
  const Mesh m = build_unit_square(3, BoundaryPartition::all_gamma());
  auto v = [](const Vec2& x) { return Vec2(x.x() * x.x(), x.x() * x.y()); };

  const QuadratureRule q = triangle_rule(6);
  for (int c = 0; c < m.num_cells(); ++c) {
    const CellGeometry g = cell_geometry(m, c);
    const PushForward pf = affine_map(g.verts);
    const CellBasis bdm(g, ElementFamily::BdmRow, 0);
    const Eigen::VectorXd dofs = bdm.interpolate_vector(v);

    PointList pts(q.size(), 2);
    for (int i = 0; i < q.size(); ++i)
      pts.row(i) = pf.map(Vec2(q.points(i, 0), q.points(i, 1))).transpose();
    const Eigen::MatrixXd dv = bdm.divergence(pts);

    double avg_div_interp = 0.0, avg_div_exact = 0.0, area = 0.0;
    for (int i = 0; i < q.size(); ++i) {
      const double w = q.weights[i] * pf.det;
      area += w;
      double dh = 0.0;
      for (int d = 0; d < bdm.ndofs(); ++d) dh += dofs[d] * dv(d, i);
      avg_div_interp += w * dh;
      avg_div_exact += w * 3.0 * pts(i, 0);
    }
    CHECK(avg_div_interp / area == doctest::Approx(avg_div_exact / area).epsilon(1e-12));
  }
}
