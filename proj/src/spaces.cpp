#include "porodiff/spaces.hpp"

#include <stdexcept>

#include "porodiff/quadrature.hpp"

namespace porodiff {

Conformity family_conformity(ElementFamily fam) {
  switch (fam) {
    case ElementFamily::LagrangeP: return Conformity::H1;
    case ElementFamily::BdmRow: return Conformity::Hdiv;
    default: return Conformity::L2;
  }
}

DofMap build_dofmap(const Mesh& mesh, ElementFamily fam, int k) {
  DofMap dm;
  const int nc = mesh.num_cells();
  const int nv = mesh.num_vertices();
  const int ne = mesh.num_facets();
  const int degree = family_degree(fam, k);

  switch (family_conformity(fam)) {
    case Conformity::H1: {
      // Vertices first, then (P2) one node per facet.
      dm.dofs_per_cell = degree == 1 ? 3 : 6;
      dm.ndofs = degree == 1 ? nv : nv + ne;
      dm.cell_dofs.resize(static_cast<size_t>(nc) * dm.dofs_per_cell);
      dm.vertex_dofs.resize(nv);
      for (int v = 0; v < nv; ++v) dm.vertex_dofs[v] = v;
      dm.facet_dofs.assign(ne, {});
      for (int c = 0; c < nc; ++c) {
        for (int v = 0; v < 3; ++v) dm.cell_dofs[c * dm.dofs_per_cell + v] = mesh.cell(c)[v];
        if (degree == 2)
          for (int e = 0; e < 3; ++e)
            dm.cell_dofs[c * dm.dofs_per_cell + 3 + e] = nv + mesh.cell_facet(c, e);
      }
      if (degree == 2)
        for (int f = 0; f < ne; ++f) dm.facet_dofs[f] = {nv + f};
      return dm;
    }
    case Conformity::Hdiv: {
      const int per_edge = degree + 1;
      const int n_int = degree == 2 ? 3 : 0;
      dm.dofs_per_cell = 3 * per_edge + n_int;
      dm.ndofs = ne * per_edge + nc * n_int;
      dm.cell_dofs.resize(static_cast<size_t>(nc) * dm.dofs_per_cell);
      dm.facet_dofs.assign(ne, {});
      for (int f = 0; f < ne; ++f)
        for (int j = 0; j < per_edge; ++j) dm.facet_dofs[f].push_back(f * per_edge + j);
      for (int c = 0; c < nc; ++c) {
        for (int e = 0; e < 3; ++e) {
          const int f = mesh.cell_facet(c, e);
          for (int j = 0; j < per_edge; ++j)
            dm.cell_dofs[c * dm.dofs_per_cell + e * per_edge + j] = f * per_edge + j;
        }
        for (int i = 0; i < n_int; ++i)
          dm.cell_dofs[c * dm.dofs_per_cell + 3 * per_edge + i] =
              ne * per_edge + c * n_int + i;
      }
      return dm;
    }
    case Conformity::L2: {
      const CellBasis proto(reference_geometry(), fam, k);
      dm.dofs_per_cell = proto.ndofs();
      dm.ndofs = nc * dm.dofs_per_cell;
      dm.cell_dofs.resize(static_cast<size_t>(nc) * dm.dofs_per_cell);
      for (int c = 0; c < nc; ++c)
        for (int i = 0; i < dm.dofs_per_cell; ++i)
          dm.cell_dofs[c * dm.dofs_per_cell + i] = c * dm.dofs_per_cell + i;
      return dm;
    }
  }
  throw std::logic_error("build_dofmap: unreachable");
}

FESpace::FESpace(const Mesh& mesh, ElementFamily fam, int k)
    : mesh_(&mesh), fam_(fam), k_(k), conf_(family_conformity(fam)),
      dofmap_(build_dofmap(mesh, fam, k)) {
  masked_.assign(dofmap_.ndofs, 0);
  masked_value_.assign(dofmap_.ndofs, 0.0);
  rebuild_free_indices();
}

void FESpace::rebuild_free_indices() {
  free_index_.assign(dofmap_.ndofs, -1);
  n_free_ = 0;
  for (int d = 0; d < dofmap_.ndofs; ++d)
    if (!masked_[d]) free_index_[d] = n_free_++;
}

void FESpace::apply_normal_trace_bc(
    const FacetPredicate& facet_pred,
    const std::function<Vec2(const Vec2&)>& traction) {
  if (conf_ != Conformity::Hdiv)
    throw std::invalid_argument("apply_normal_trace_bc: requires an Hdiv space");
  update_normal_trace_values(facet_pred, traction);
  rebuild_free_indices();
}

void FESpace::update_normal_trace_values(
    const FacetPredicate& facet_pred,
    const std::function<Vec2(const Vec2&)>& traction) {
  for (int f = 0; f < mesh_->num_facets(); ++f) {
    if (!mesh_->is_boundary_facet(f) || !facet_pred(f, *mesh_)) continue;
    const Vec2 n = mesh_->facet(f).normal;
    auto only_f = [f](int g, const Mesh&) { return g == f; };
    update_normal_component_values(
        only_f, [&traction, n](const Vec2& x) { return traction(x).dot(n); });
  }
}

void FESpace::apply_normal_component_bc(
    const FacetPredicate& facet_pred, const std::function<double(const Vec2&)>& g) {
  if (conf_ != Conformity::Hdiv)
    throw std::invalid_argument("apply_normal_component_bc: requires an Hdiv space");
  update_normal_component_values(facet_pred, g);
  rebuild_free_indices();
}

void FESpace::update_normal_component_values(
    const FacetPredicate& facet_pred, const std::function<double(const Vec2&)>& g) {
  const int degree = family_degree(fam_, k_);
  const int per_edge = degree + 1;
  const QuadratureRule q = interval_rule(2 * degree + 6);
  auto legendre = [](int j, double s) {
    switch (j) {
      case 0: return 1.0;
      case 1: return 2.0 * s - 1.0;
      default: return 6.0 * s * s - 6.0 * s + 1.0;
    }
  };
  for (int f = 0; f < mesh_->num_facets(); ++f) {
    const Facet& fc = mesh_->facet(f);
    if (!mesh_->is_boundary_facet(f) || !facet_pred(f, *mesh_)) continue;
    const Vec2 a = mesh_->vertex(fc.verts[0]);
    const Vec2 b = mesh_->vertex(fc.verts[1]);
    for (int j = 0; j < per_edge; ++j) {
      double mom = 0.0;
      for (int i = 0; i < q.size(); ++i) {
        const double s = q.points(i, 0);
        const Vec2 x = a + s * (b - a);
        mom += q.weights[i] * g(x) * legendre(j, s);
      }
      const int dof = dofmap_.facet_dofs[f][j];
      masked_[dof] = 1;
      masked_value_[dof] = mom;
    }
  }
}

void FESpace::apply_dirichlet(
    const FacetPredicate& facet_pred,
    const std::function<double(const Vec2&)>& g) {
  if (conf_ != Conformity::H1)
    throw std::invalid_argument("apply_dirichlet: requires an H1 space");
  update_dirichlet_values(facet_pred, g);
  rebuild_free_indices();
}

void FESpace::update_dirichlet_values(
    const FacetPredicate& facet_pred,
    const std::function<double(const Vec2&)>& g) {
  for (int f = 0; f < mesh_->num_facets(); ++f) {
    const Facet& fc = mesh_->facet(f);
    if (!mesh_->is_boundary_facet(f) || !facet_pred(f, *mesh_)) continue;
    for (int v : fc.verts) {
      const int dof = dofmap_.vertex_dofs[v];
      masked_[dof] = 1;
      masked_value_[dof] = g(mesh_->vertex(v));
    }
    for (int dof : dofmap_.facet_dofs[f]) {
      masked_[dof] = 1;
      masked_value_[dof] = g(mesh_->facet_midpoint(f));
    }
  }
}

Eigen::VectorXd FESpace::eval_field(const Eigen::VectorXd& coeffs, int cell,
                                    const PointList& pts, int comp) const {
  const CellBasis basis = cell_basis(cell);
  const auto vals = basis.values(pts);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(pts.rows());
  for (int i = 0; i < basis.ndofs(); ++i)
    out += coeffs[dofmap_.dof(cell, i)] * vals[comp].row(i).transpose();
  return out;
}

FacetPredicate on_tag(BoundaryTag tag) {
  return [tag](int f, const Mesh& m) { return m.facet(f).tag == tag; };
}

FacetPredicate on_sides(std::initializer_list<Side> sides) {
  std::vector<Side> list(sides);
  return [list](int f, const Mesh& m) {
    const Side s = m.boundary_side(f);
    for (Side want : list)
      if (s == want) return true;
    return false;
  };
}

FacetPredicate on_all_boundary() {
  return [](int, const Mesh&) { return true; };
}

}  // namespace porodiff
