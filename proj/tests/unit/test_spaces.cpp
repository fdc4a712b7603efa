#include "doctest.h"

#include <cmath>

#include "porodiff/mesh.hpp"
#include "porodiff/quadrature.hpp"
#include "porodiff/spaces.hpp"

using namespace porodiff;

TEST_CASE("normal-trace mask counts on the n=1 all-Sigma mesh, k=0") {
  const Mesh m = build_unit_square(1, BoundaryPartition::all_sigma());
  // One stress row: 10 DOFs, 2 moments on each of 4 boundary edges masked.
  FESpace row(m, ElementFamily::BdmRow, 0);
  row.apply_normal_trace_bc(on_tag(BoundaryTag::Sigma),
                            [](const Vec2&) { return Vec2::Zero(); });
  int masked = 0;
  for (int d = 0; d < row.ndofs(); ++d) masked += row.is_masked(d) ? 1 : 0;
  CHECK(row.ndofs() == 10);
  CHECK(masked == 8);               // 2 moments x 4 boundary edges per row
  CHECK(row.n_free() + masked == row.ndofs());
  // Two rows give 16 masked of 20.
  CHECK(2 * masked == 16);
}

TEST_CASE("masked normal trace vanishes along Sigma edges") {
  const Mesh m = build_unit_square(2, BoundaryPartition::all_sigma());
  FESpace row(m, ElementFamily::BdmRow, 0);
  row.apply_normal_trace_bc(on_tag(BoundaryTag::Sigma),
                            [](const Vec2&) { return Vec2::Zero(); });

  // Any field in the masked space: free coefficients arbitrary, masked ones
  // at their prescribed (zero) values.
  Eigen::VectorXd coeffs(row.ndofs());
  for (int d = 0; d < row.ndofs(); ++d)
    coeffs[d] = row.is_masked(d) ? row.masked_value(d) : 0.7 + 0.3 * d;

  const QuadratureRule q = interval_rule(8);
  for (int f = 0; f < m.num_facets(); ++f) {
    if (!m.is_boundary_facet(f)) continue;
    const Facet& fc = m.facet(f);
    const Vec2 a = m.vertex(fc.verts[0]), b = m.vertex(fc.verts[1]);
    const int c = fc.cell[0];
    const CellBasis basis(cell_geometry(m, c), ElementFamily::BdmRow, 0);
    double integral = 0.0;
    for (int i = 0; i < q.size(); ++i) {
      PointList pt(1, 2);
      pt.row(0) = (a + q.points(i, 0) * (b - a)).transpose();
      const auto vals = basis.values(pt);
      Vec2 v = Vec2::Zero();
      for (int d = 0; d < basis.ndofs(); ++d)
        v += coeffs[row.dofmap().dof(c, d)] * Vec2(vals[0](d, 0), vals[1](d, 0));
      integral += q.weights[i] * fc.length * std::abs(v.dot(fc.normal));
    }
    CHECK(integral < 1e-13);
  }
}

TEST_CASE("empty Sigma leaves no masks and activates the trace constraint") {
  const Mesh m = build_unit_square(2, BoundaryPartition::all_gamma());
  FESpace row(m, ElementFamily::BdmRow, 0);
  row.apply_normal_trace_bc(on_tag(BoundaryTag::Sigma),
                            [](const Vec2&) { return Vec2::Zero(); });
  CHECK(row.n_free() == row.ndofs());

  bool has_sigma = false;
  for (int f = 0; f < m.num_facets(); ++f)
    if (m.is_boundary_facet(f) && m.facet(f).tag == BoundaryTag::Sigma)
      has_sigma = true;
  TraceConstraint tc;
  tc.active = !has_sigma;
  CHECK(tc.active);
}

TEST_CASE("homogeneous Dirichlet on P1, n=2: 8 masked, 1 interior free") {
  const Mesh m = build_unit_square(2, BoundaryPartition::all_gamma());
  FESpace sp(m, ElementFamily::LagrangeP, 0);
  sp.apply_dirichlet(on_all_boundary(), [](const Vec2&) { return 0.0; });
  CHECK(sp.ndofs() == 9);
  CHECK(sp.n_free() == 1);
  for (int d = 0; d < sp.ndofs(); ++d)
    if (sp.is_masked(d)) CHECK(sp.masked_value(d) == 0.0);
}

TEST_CASE("boundary interpolation reproduces the tracer datum at boundary vertices") {
  auto omega_exact = [](const Vec2& x) {
    return std::exp(x.x()) + std::cos(M_PI * x.x()) * std::cos(M_PI * x.y());
  };
  const Mesh m = build_unit_square(4, BoundaryPartition::all_gamma());
  FESpace sp(m, ElementFamily::LagrangeP, 0);
  sp.apply_dirichlet(on_tag(BoundaryTag::Gamma), omega_exact);
  for (int v = 0; v < m.num_vertices(); ++v) {
    const int dof = sp.dofmap().vertex_dofs[v];
    if (!sp.is_masked(dof)) continue;
    CHECK(sp.masked_value(dof) == doctest::Approx(omega_exact(m.vertex(v))).epsilon(1e-15));
  }
}

TEST_CASE("linear boundary datum is reproduced exactly by P1 interpolation") {
  auto g = [](const Vec2& x) { return 2.0 * x.x() - 0.5 * x.y() + 0.25; };
  const Mesh m = build_unit_square(3, BoundaryPartition::all_gamma());
  FESpace sp(m, ElementFamily::LagrangeP, 0);
  sp.apply_dirichlet(on_all_boundary(), g);
  for (int v = 0; v < m.num_vertices(); ++v) {
    const int dof = sp.dofmap().vertex_dofs[v];
    if (sp.is_masked(dof))
      CHECK(sp.masked_value(dof) == doctest::Approx(g(m.vertex(v))).epsilon(1e-15));
  }
}

TEST_CASE("Dirichlet on a non-H1 space raises") {
  const Mesh m = build_unit_square(2, BoundaryPartition::all_gamma());
  FESpace dg(m, ElementFamily::DGScalar, 0);
  CHECK_THROWS(dg.apply_dirichlet(on_all_boundary(), [](const Vec2&) { return 0.0; }));
  FESpace lag(m, ElementFamily::LagrangeP, 0);
  CHECK_THROWS(lag.apply_normal_trace_bc(on_all_boundary(),
                                         [](const Vec2&) { return Vec2::Zero(); }));
}

TEST_CASE("free + masked = total for a P2 space with partial boundary") {
  const BoundaryPartition half{[](const Vec2& x) {
    return x.x() < 0.5 ? BoundaryTag::Gamma : BoundaryTag::Sigma;
  }};
  const Mesh m = build_unit_square(4, half);
  FESpace sp(m, ElementFamily::LagrangeP, 1);
  sp.apply_dirichlet(on_tag(BoundaryTag::Gamma), [](const Vec2& x) { return x.x(); });
  int masked = 0;
  for (int d = 0; d < sp.ndofs(); ++d) masked += sp.is_masked(d) ? 1 : 0;
  CHECK(masked + sp.n_free() == sp.ndofs());
  CHECK(masked > 0);
}

TEST_CASE("nonzero prescribed traction sets first edge moments to the traction moment") {
  const Mesh m = build_rectangle(1.0, 1.0, 2, 2, BoundaryPartition::all_sigma());
  FESpace row(m, ElementFamily::BdmRow, 0);
  // constant traction component: row value t0 = 3 on top edges
  row.apply_normal_trace_bc(on_sides({Side::Top}),
                            [](const Vec2&) { return Vec2(3.0, 0.0); });
  for (int f = 0; f < m.num_facets(); ++f) {
    if (!m.is_boundary_facet(f) || m.boundary_side(f) != Side::Top) continue;
    const Facet& fc = m.facet(f);
    const int d0 = row.dofmap().facet_dofs[f][0];
    const int d1 = row.dofmap().facet_dofs[f][1];
    // normal on top is (0, 1): v.n = 3*0 + 0*1... traction=(3,0): (3,0).(0,1)=0
    CHECK(row.masked_value(d0) == doctest::Approx(0.0));
    CHECK(row.masked_value(d1) == doctest::Approx(0.0));
    CHECK((fc.normal - Vec2(0, 1)).norm() < 1e-14);
  }
  // and with a traction aligned with the normal the 0th moment is its value
  FESpace row2(m, ElementFamily::BdmRow, 0);
  row2.apply_normal_trace_bc(on_sides({Side::Top}),
                             [](const Vec2&) { return Vec2(0.0, -2.5); });
  for (int f = 0; f < m.num_facets(); ++f) {
    if (!m.is_boundary_facet(f) || m.boundary_side(f) != Side::Top) continue;
    CHECK(row2.masked_value(row2.dofmap().facet_dofs[f][0]) ==
          doctest::Approx(-2.5).epsilon(1e-14));
    CHECK(row2.masked_value(row2.dofmap().facet_dofs[f][1]) ==
          doctest::Approx(0.0));
  }
}
