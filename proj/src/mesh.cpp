#include "porodiff/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace porodiff {

BoundaryPartition BoundaryPartition::all_gamma() {
  return {[](const Vec2&) { return BoundaryTag::Gamma; }};
}

BoundaryPartition BoundaryPartition::all_sigma() {
  return {[](const Vec2&) { return BoundaryTag::Sigma; }};
}

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells,
           const BoundaryPartition& partition)
    : vertices_(std::move(vertices)), cells_(std::move(cells)), partition_(partition) {
  build_facets();
  check_invariants();
}

std::array<Vec2, 3> Mesh::cell_vertices(int c) const {
  const auto& k = cells_[c];
  return {vertices_[k[0]], vertices_[k[1]], vertices_[k[2]]};
}

double Mesh::cell_area(int c) const {
  const auto v = cell_vertices(c);
  return 0.5 * ((v[1].x() - v[0].x()) * (v[2].y() - v[0].y()) -
                (v[2].x() - v[0].x()) * (v[1].y() - v[0].y()));
}

Vec2 Mesh::cell_centroid(int c) const {
  const auto v = cell_vertices(c);
  return (v[0] + v[1] + v[2]) / 3.0;
}

double Mesh::cell_diameter(int c) const {
  const auto v = cell_vertices(c);
  return std::max({(v[1] - v[0]).norm(), (v[2] - v[1]).norm(), (v[0] - v[2]).norm()});
}

double Mesh::meshsize() const {
  double h = 0.0;
  for (int c = 0; c < num_cells(); ++c) h = std::max(h, cell_diameter(c));
  return h;
}

Vec2 Mesh::facet_midpoint(int f) const {
  const auto& fc = facets_[f];
  return 0.5 * (vertices_[fc.verts[0]] + vertices_[fc.verts[1]]);
}

Side Mesh::boundary_side(int f) const {
  if (!is_boundary_facet(f)) return Side::None;
  const Vec2 m = facet_midpoint(f);
  const double tol = 1e-12 * std::max({width_, height_, 1.0});
  if (std::abs(m.y()) < tol) return Side::Bottom;
  if (std::abs(m.y() - height_) < tol) return Side::Top;
  if (std::abs(m.x()) < tol) return Side::Left;
  if (std::abs(m.x() - width_) < tol) return Side::Right;
  return Side::None;
}

void Mesh::build_facets() {
  // Local edge i of cell (v0,v1,v2) is opposite vertex i.
  static constexpr int edge_verts[3][2] = {{1, 2}, {2, 0}, {0, 1}};

  std::map<std::array<int, 2>, int> facet_of;
  cell_facets_.assign(cells_.size(), {-1, -1, -1});

  for (int c = 0; c < num_cells(); ++c) {
    for (int e = 0; e < 3; ++e) {
      int a = cells_[c][edge_verts[e][0]];
      int b = cells_[c][edge_verts[e][1]];
      std::array<int, 2> key{std::min(a, b), std::max(a, b)};
      auto it = facet_of.find(key);
      if (it == facet_of.end()) {
        Facet f;
        f.verts = key;
        f.cell[0] = c;
        f.local_edge[0] = e;
        facet_of.emplace(key, static_cast<int>(facets_.size()));
        cell_facets_[c][e] = static_cast<int>(facets_.size());
        facets_.push_back(f);
      } else {
        Facet& f = facets_[it->second];
        if (f.cell[1] >= 0)
          throw std::runtime_error("mesh: facet shared by more than two cells");
        f.cell[1] = c;
        f.local_edge[1] = e;
        // Owner is the smaller adjacent cell index; facets are discovered in
        // ascending cell order, so cell[0] is already the owner.
        cell_facets_[c][e] = it->second;
      }
    }
  }

  for (auto& f : facets_) {
    const Vec2 a = vertices_[f.verts[0]];
    const Vec2 b = vertices_[f.verts[1]];
    const Vec2 d = b - a;
    f.length = d.norm();
    // Normal outward from the owner: rotate the tangent and orient away from
    // the owner's opposite vertex.
    Vec2 n(d.y(), -d.x());
    n /= f.length;
    const int opp = cells_[f.cell[0]][f.local_edge[0]];
    if (n.dot(vertices_[opp] - a) > 0.0) n = -n;
    f.normal = n;
    if (f.cell[1] < 0) {
      f.tag = partition_.classify(0.5 * (a + b));
      if (f.tag == BoundaryTag::Interior)
        throw std::runtime_error("mesh: boundary facet left untagged by partition");
    }
  }
}

void Mesh::check_invariants() const {
  for (int c = 0; c < num_cells(); ++c) {
    if (cell_area(c) <= 0.0)
      throw std::runtime_error("mesh: cell " + std::to_string(c) +
                               " has non-positive signed area");
  }
  const int euler = num_vertices() - num_facets() + num_cells();
  if (euler != 1)
    throw std::runtime_error("mesh: Euler relation violated (nv-ne+nc=" +
                             std::to_string(euler) + ")");
}

Mesh build_rectangle(double width, double height, int nx, int ny,
                     const BoundaryPartition& partition) {
  if (width <= 0.0 || height <= 0.0)
    throw std::invalid_argument("build_rectangle: dimensions must be positive");
  if (nx < 1 || ny < 1)
    throw std::invalid_argument("build_rectangle: nx, ny must be >= 1");

  std::vector<Vec2> verts;
  verts.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      verts.emplace_back(width * i / nx, height * j / ny);

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };

  // Every square split along the bottom-left to top-right diagonal.
  std::vector<std::array<int, 3>> cells;
  cells.reserve(static_cast<size_t>(2) * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      cells.push_back({v00, v10, v11});
      cells.push_back({v00, v11, v01});
    }
  }

  Mesh m(std::move(verts), std::move(cells), partition);
  m.structured_ = true;
  m.width_ = width;
  m.height_ = height;
  m.nx_ = nx;
  m.ny_ = ny;
  return m;
}

Mesh build_unit_square(int n, const BoundaryPartition& partition) {
  return build_rectangle(1.0, 1.0, n, n, partition);
}

Mesh refine_uniform(const Mesh& m) {
  if (!m.structured())
    throw std::invalid_argument(
        "refine_uniform: mesh provenance is not structured; tag inheritance "
        "undefined");
  return build_rectangle(m.width(), m.height(), 2 * m.nx(), 2 * m.ny(),
                         m.partition());
}

void Mesh::write_vtk(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("mesh: cannot open " + path);
  out << "# vtk DataFile Version 2.0\n";
  out << "porodiff mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << num_vertices() << " double\n";
  out.precision(17);
  for (const auto& v : vertices_) out << v.x() << " " << v.y() << " 0\n";
  out << "CELLS " << num_cells() << " " << 4 * num_cells() << "\n";
  for (const auto& c : cells_) out << "3 " << c[0] << " " << c[1] << " " << c[2] << "\n";
  out << "CELL_TYPES " << num_cells() << "\n";
  for (int c = 0; c < num_cells(); ++c) out << "5\n";
}

}  // namespace porodiff
