#pragma once

#include <functional>
#include <vector>

#include "porodiff/elements.hpp"
#include "porodiff/mesh.hpp"

namespace porodiff {

enum class Conformity { H1, Hdiv, L2 };

// Selects boundary facets by index.
using FacetPredicate = std::function<bool(int, const Mesh&)>;

// Global degree-of-freedom layout for one scalar/vector/tensor-row family.
// Shared DOFs are identified across cells for H1 (vertices, facet nodes) and
// Hdiv (canonical facet moments); L2 families number cell-by-cell.
struct DofMap {
  int ndofs = 0;
  int dofs_per_cell = 0;
  std::vector<int> cell_dofs;           // ncells x dofs_per_cell, row-major
  std::vector<std::vector<int>> facet_dofs;  // global dofs attached to each facet
  std::vector<int> vertex_dofs;         // H1 only; -1 otherwise

  int dof(int cell, int local) const { return cell_dofs[cell * dofs_per_cell + local]; }
};

DofMap build_dofmap(const Mesh& mesh, ElementFamily fam, int k);
Conformity family_conformity(ElementFamily fam);

// Function space over the whole mesh: element family + dofmap + essential
// boundary mask. Immutable after boundary conditions are applied.
class FESpace {
 public:
  FESpace(const Mesh& mesh, ElementFamily fam, int k);

  const Mesh& mesh() const { return *mesh_; }
  ElementFamily family() const { return fam_; }
  int order() const { return k_; }
  Conformity conformity() const { return conf_; }
  const DofMap& dofmap() const { return dofmap_; }
  int ndofs() const { return dofmap_.ndofs; }
  int n_free() const { return n_free_; }
  // Global dof -> index among free dofs, or -1 if masked.
  int free_index(int dof) const { return free_index_[dof]; }
  bool is_masked(int dof) const { return masked_[dof] != 0; }
  double masked_value(int dof) const { return masked_value_[dof]; }

  CellBasis cell_basis(int cell) const {
    return CellBasis(cell_geometry(*mesh_, cell), fam_, k_);
  }

  // Masks all canonical facet-moment DOFs on facets selected by `facet_pred`
  // to the moments of the prescribed normal trace `traction` (sigma n).
  // Requires an Hdiv space.
  void apply_normal_trace_bc(const FacetPredicate& facet_pred,
                             const std::function<Vec2(const Vec2&)>& traction);

  // Masks nodal DOFs on the closure of selected facets to interpolated g.
  // Requires an H1 space.
  void apply_dirichlet(const FacetPredicate& facet_pred,
                       const std::function<double(const Vec2&)>& g);

  // Re-interpolates the prescribed values on the already-masked DOFs (used by
  // transient drivers whose boundary data are time ramps).
  void update_dirichlet_values(const FacetPredicate& facet_pred,
                               const std::function<double(const Vec2&)>& g);
  void update_normal_trace_values(const FacetPredicate& facet_pred,
                                  const std::function<Vec2(const Vec2&)>& traction);

  // Scalar variants prescribing the normal component v.n = g directly (used
  // for one row of a stress tensor whose traction vector is given).
  void apply_normal_component_bc(const FacetPredicate& facet_pred,
                                 const std::function<double(const Vec2&)>& g);
  void update_normal_component_values(const FacetPredicate& facet_pred,
                                      const std::function<double(const Vec2&)>& g);

  // Evaluate a coefficient field on one cell at physical points; `comp`
  // selects the value component.
  Eigen::VectorXd eval_field(const Eigen::VectorXd& coeffs, int cell,
                             const PointList& pts, int comp) const;

 private:
  const Mesh* mesh_;
  ElementFamily fam_;
  int k_;
  Conformity conf_;
  DofMap dofmap_;
  std::vector<char> masked_;
  std::vector<double> masked_value_;
  std::vector<int> free_index_;
  int n_free_ = 0;

  void rebuild_free_indices();
};

// Facet predicates for the common cases.
FacetPredicate on_tag(BoundaryTag tag);
FacetPredicate on_sides(std::initializer_list<Side> sides);
FacetPredicate on_all_boundary();

// Scalar constraint int_Omega tr(sigma_h) dx = target, imposed through one
// real Lagrange multiplier. Active only when no Sigma facets exist (the
// normal stress trace is otherwise pinned by the essential conditions).
struct TraceConstraint {
  bool active = false;
  double target = 0.0;
};

}  // namespace porodiff
