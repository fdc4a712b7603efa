#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace porodiff {

using Vec2 = Eigen::Vector2d;

enum class BoundaryTag { Interior, Gamma, Sigma };

// Side labels of an axis-aligned rectangle, used by per-field boundary
// condition predicates (the slab experiment assigns conditions per side).
enum class Side { Bottom, Right, Top, Left, None };

// Classifies a boundary facet by its midpoint.
struct BoundaryPartition {
  std::function<BoundaryTag(const Vec2&)> classify;

  static BoundaryPartition all_gamma();
  static BoundaryPartition all_sigma();
};

struct Facet {
  // Global vertex ids, verts[0] < verts[1]. The facet is parameterized
  // from verts[0] to verts[1]; s in [0,1].
  std::array<int, 2> verts;
  // Adjacent cells: cell[0] is the owner (smaller cell index); cell[1] is
  // the neighbor or -1 for boundary facets.
  std::array<int, 2> cell{-1, -1};
  std::array<int, 2> local_edge{-1, -1};
  BoundaryTag tag = BoundaryTag::Interior;
  // Unit normal, outward from the owner cell.
  Vec2 normal = Vec2::Zero();
  double length = 0.0;
};

// Conforming triangulation of an axis-aligned rectangle. Cells are
// counterclockwise vertex triples; local edge i is opposite local vertex i.
// Immutable after construction.
class Mesh {
 public:
  // Direct construction from raw vertex/cell arrays (used by single-cell
  // oracle meshes in tests). Boundary facets are tagged by `partition`.
  Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells,
       const BoundaryPartition& partition);

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_facets() const { return static_cast<int>(facets_.size()); }

  const Vec2& vertex(int v) const { return vertices_[v]; }
  const std::array<int, 3>& cell(int c) const { return cells_[c]; }
  const Facet& facet(int f) const { return facets_[f]; }
  const std::vector<Facet>& facets() const { return facets_; }
  int cell_facet(int c, int local_edge) const { return cell_facets_[c][local_edge]; }

  std::array<Vec2, 3> cell_vertices(int c) const;
  double cell_area(int c) const;
  Vec2 cell_centroid(int c) const;
  double cell_diameter(int c) const;
  // Largest cell diameter.
  double meshsize() const;

  bool is_boundary_facet(int f) const { return facets_[f].cell[1] < 0; }
  Side boundary_side(int f) const;  // by facet midpoint, structured meshes only
  Vec2 facet_midpoint(int f) const;

  // Structured provenance (set by the rectangle builders); refine_uniform
  // requires it.
  bool structured() const { return structured_; }
  double width() const { return width_; }
  double height() const { return height_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  const BoundaryPartition& partition() const { return partition_; }

  // Legacy-VTK ASCII export of the triangulation.
  void write_vtk(const std::string& path) const;

 private:
  friend Mesh build_rectangle(double, double, int, int, const BoundaryPartition&);

  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> cells_;
  std::vector<Facet> facets_;
  std::vector<std::array<int, 3>> cell_facets_;
  BoundaryPartition partition_;

  bool structured_ = false;
  double width_ = 0.0, height_ = 0.0;
  int nx_ = 0, ny_ = 0;

  void build_facets();
  void check_invariants() const;
};

// n x n grid of squares on (0,1)^2, each split along the bottom-left to
// top-right diagonal; h = sqrt(2)/n.
Mesh build_unit_square(int n, const BoundaryPartition& partition);

// As build_unit_square, scaled to width x height with nx x ny squares.
Mesh build_rectangle(double width, double height, int nx, int ny,
                     const BoundaryPartition& partition);

// Splits every cell into 4 similar children (h halves exactly); requires a
// structured mesh. Tags are re-derived from the stored partition.
Mesh refine_uniform(const Mesh& m);

}  // namespace porodiff
