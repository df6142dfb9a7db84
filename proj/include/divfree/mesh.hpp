#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "divfree/types.hpp"

namespace divfree {

struct SegmentRule;

/// Affine map x = origin + jacobian * xhat from the reference triangle
/// (0,0), (1,0), (0,1).
struct CellGeometry {
  Vec2 origin;
  Mat2 jacobian;
  Mat2 inverse_jacobian;
  double det = 0.0;

  Vec2 map(const Vec2& ref) const { return origin + jacobian * ref; }
  Vec2 pullback(const Vec2& x) const { return inverse_jacobian * (x - origin); }
};

/// Mesh edge. The normal points out of plus_cell, i.e. toward minus_cell for
/// interior facets and outward on the boundary. Facet parameter s runs from
/// vertices[0] to vertices[1] (vertices[0] < vertices[1]).
struct Facet {
  std::array<int, 2> vertices{};
  Vec2 normal = Vec2::Zero();
  double length = 0.0;
  int plus_cell = -1;
  int minus_cell = -1;
  /// Local edge index of this facet inside plus_cell / minus_cell.
  std::array<int, 2> local_edge{-1, -1};
  /// True when the cell's local edge runs from vertices[1] to vertices[0].
  std::array<bool, 2> reversed{false, false};

  bool is_boundary() const { return minus_cell < 0; }
};

/// Facet seen from one cell; sign is +1 when the cell's outward normal equals
/// the facet normal.
struct CellFacet {
  int facet = -1;
  int sign = 0;
};

/// Conforming triangulation of a planar domain. Immutable after construction.
///
/// Local edge i of a cell is opposite local vertex i and runs from vertex
/// (i+1)%3 to vertex (i+2)%3, so with counterclockwise cells its outward
/// normal is the clockwise rotation of that tangent.
class Mesh {
 public:
  /// Builds facets and geometry. Throws GeometryError on non-positive cell
  /// area or a facet shared by more than two cells, InputError on bad indices.
  Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells);

  const std::vector<Vec2>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& cells() const { return cells_; }
  const std::vector<Facet>& facets() const { return facets_; }
  const std::array<CellFacet, 3>& cell_facets(int cell) const { return cell_facets_[cell]; }
  const CellGeometry& geometry(int cell) const { return geometry_[cell]; }

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  int num_facets() const { return static_cast<int>(facets_.size()); }
  int num_boundary_facets() const;

  double area(int cell) const { return 0.5 * geometry_[cell].det; }
  /// Longest edge of the cell.
  double diameter(int cell) const { return diameter_[cell]; }
  double h_max() const { return h_max_; }
  double h_min() const { return h_min_; }

  /// Process-unique identifier used to tag coefficient vectors.
  std::uint64_t id() const { return id_; }

 private:
  std::vector<Vec2> vertices_;
  std::vector<std::array<int, 3>> cells_;
  std::vector<Facet> facets_;
  std::vector<std::array<CellFacet, 3>> cell_facets_;
  std::vector<CellGeometry> geometry_;
  std::vector<double> diameter_;
  double h_max_ = 0.0;
  double h_min_ = 0.0;
  std::uint64_t id_ = 0;
};

/// Vertices of the reference triangle.
inline Vec2 reference_vertex(int i) {
  switch (i) {
    case 0: return {0.0, 0.0};
    case 1: return {1.0, 0.0};
    default: return {0.0, 1.0};
  }
}

/// Point on local edge `edge` of the reference triangle at local parameter t.
inline Vec2 reference_edge_point(int edge, double t) {
  return (1.0 - t) * reference_vertex((edge + 1) % 3) + t * reference_vertex((edge + 2) % 3);
}

/// Structured n x n grid of the unit square, each square split along its
/// (x,y)->(x+h,y+h) diagonal. With perturb > 0 every interior vertex is moved
/// by a random offset of length at most perturb/n drawn from a generator
/// seeded with `seed`. Tangled cells trigger up to five retries with the
/// perturbation halved each time.
Mesh build_structured(int n, double perturb = 0.0, std::uint64_t seed = 1);

/// Reads the plain-text format "nv nc" / nv lines "x y" / nc lines "i j k".
Mesh parse_mesh(std::istream& in);
Mesh load_mesh(const std::filesystem::path& path);

/// Writes the format read by parse_mesh, coordinates with 17 significant digits.
void write_mesh(const Mesh& mesh, std::ostream& out);
void save_mesh(const Mesh& mesh, const std::filesystem::path& path);

/// Quadrature points of a facet seen from both adjacent cells. For boundary
/// facets minus_points is empty. Weights are scaled by the facet length.
struct FacetTrace {
  std::vector<double> parameters;  // facet parameter s in [0,1]
  std::vector<double> weights;
  std::vector<Vec2> plus_points;
  std::vector<Vec2> minus_points;
  std::vector<Vec2> plus_reference;
  std::vector<Vec2> minus_reference;
};

FacetTrace facet_trace_points(const Mesh& mesh, int facet, const SegmentRule& rule);

/// Local edge parameter seen by side (0 = plus, 1 = minus) for facet parameter s.
inline double local_edge_parameter(const Facet& f, int side, double s) {
  return f.reversed[side] ? 1.0 - s : s;
}

}  // namespace divfree
