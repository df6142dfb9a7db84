#include "divfree/mesh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "divfree/quadrature.hpp"

namespace divfree {

namespace {

std::atomic<std::uint64_t> next_mesh_id{1};

Vec2 rotate_cw(const Vec2& t) { return {t.y(), -t.x()}; }

}  // namespace

Mesh::Mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells)
    : vertices_(std::move(vertices)), cells_(std::move(cells)), id_(next_mesh_id++) {
  const int nv = num_vertices();
  const int nc = num_cells();
  if (nc == 0) throw InputError("mesh has no cells");

  geometry_.resize(nc);
  diameter_.resize(nc);
  cell_facets_.resize(nc);
  h_max_ = 0.0;
  h_min_ = std::numeric_limits<double>::infinity();

  for (int c = 0; c < nc; ++c) {
    for (int v : cells_[c]) {
      if (v < 0 || v >= nv) {
        throw InputError("cell " + std::to_string(c) + ": vertex index out of range (" +
                         std::to_string(v) + " not in [0, " + std::to_string(nv) + "))");
      }
    }
    const Vec2& a = vertices_[cells_[c][0]];
    const Vec2& b = vertices_[cells_[c][1]];
    const Vec2& d = vertices_[cells_[c][2]];
    CellGeometry& g = geometry_[c];
    g.origin = a;
    g.jacobian.col(0) = b - a;
    g.jacobian.col(1) = d - a;
    g.det = g.jacobian.determinant();
    if (!(g.det > 0.0)) {
      std::ostringstream msg;
      msg << "cell " << c << " has non-positive area " << 0.5 * g.det
          << " (cells must be counterclockwise and non-degenerate)";
      throw GeometryError(msg.str());
    }
    g.inverse_jacobian = g.jacobian.inverse();
    diameter_[c] = std::max({(b - a).norm(), (d - b).norm(), (a - d).norm()});
    h_max_ = std::max(h_max_, diameter_[c]);
    h_min_ = std::min(h_min_, diameter_[c]);
  }

  // Cells are visited in id order, so the first owner of an edge is the
  // lower cell id and becomes the plus side.
  std::map<std::pair<int, int>, int> edge_to_facet;
  for (int c = 0; c < nc; ++c) {
    for (int e = 0; e < 3; ++e) {
      const int p = cells_[c][(e + 1) % 3];
      const int q = cells_[c][(e + 2) % 3];
      const auto key = std::minmax(p, q);
      auto [it, inserted] = edge_to_facet.try_emplace({key.first, key.second}, num_facets());
      if (inserted) {
        Facet f;
        f.vertices = {key.first, key.second};
        const Vec2 t = vertices_[q] - vertices_[p];
        f.length = t.norm();
        f.normal = rotate_cw(t) / f.length;
        f.plus_cell = c;
        f.local_edge[0] = e;
        f.reversed[0] = (p != key.first);
        facets_.push_back(f);
        cell_facets_[c][e] = {it->second, +1};
      } else {
        Facet& f = facets_[it->second];
        if (f.minus_cell >= 0 || f.plus_cell == c) {
          throw GeometryError("edge (" + std::to_string(key.first) + ", " +
                              std::to_string(key.second) + ") is shared by more than two cells");
        }
        f.minus_cell = c;
        f.local_edge[1] = e;
        f.reversed[1] = (p != key.first);
        cell_facets_[c][e] = {it->second, -1};
      }
    }
  }
}

int Mesh::num_boundary_facets() const {
  return static_cast<int>(
      std::count_if(facets_.begin(), facets_.end(), [](const Facet& f) { return f.is_boundary(); }));
}

namespace {

// Uniform double in [0,1) from the raw engine output so the sequence does not
// depend on the standard library's distribution implementation.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

bool all_positive(const std::vector<Vec2>& v, const std::vector<std::array<int, 3>>& cells) {
  for (const auto& c : cells) {
    const Vec2 e1 = v[c[1]] - v[c[0]];
    const Vec2 e2 = v[c[2]] - v[c[0]];
    if (!(e1.x() * e2.y() - e1.y() * e2.x() > 0.0)) return false;
  }
  return true;
}

}  // namespace

Mesh build_structured(int n, double perturb, std::uint64_t seed) {
  if (n < 2) throw InputError("build_structured: need n >= 2 subdivisions");
  if (perturb < 0.0 || perturb > 0.3) throw InputError("build_structured: perturb must lie in [0, 0.3]");

  const double h = 1.0 / n;
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };

  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      cells.push_back({v00, v10, v11});
      cells.push_back({v00, v11, v01});
    }
  }

  double amplitude = perturb;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    std::vector<Vec2> vertices;
    vertices.reserve((n + 1) * (n + 1));
    std::mt19937_64 rng(seed);
    for (int j = 0; j <= n; ++j) {
      for (int i = 0; i <= n; ++i) {
        Vec2 x(i * h, j * h);
        if (i == n) x.x() = 1.0;
        if (j == n) x.y() = 1.0;
        const bool interior = i > 0 && i < n && j > 0 && j < n;
        if (interior && amplitude > 0.0) {
          const double r = amplitude * h * std::sqrt(uniform01(rng));
          const double theta = 2.0 * std::numbers::pi * uniform01(rng);
          x += r * Vec2(std::cos(theta), std::sin(theta));
        }
        vertices.push_back(x);
      }
    }
    if (all_positive(vertices, cells)) return Mesh(std::move(vertices), cells);
    amplitude *= 0.5;
  }
  throw GeometryError("build_structured: perturbation produced tangled cells after 5 retries");
}

Mesh parse_mesh(std::istream& in) {
  std::string line;
  auto next_line = [&](const char* what) {
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) return;
    }
    throw InputError(std::string("mesh file truncated while reading ") + what);
  };

  next_line("header");
  long long nv = -1, nc = -1;
  {
    std::istringstream hs(line);
    if (!(hs >> nv >> nc) || nv < 3 || nc < 1) {
      throw InputError("malformed mesh header \"" + line + "\" (expected \"nv nc\" with nv >= 3, nc >= 1)");
    }
  }
  std::vector<Vec2> vertices(nv);
  for (long long i = 0; i < nv; ++i) {
    next_line("vertices");
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y)) throw InputError("malformed vertex line " + std::to_string(i) + ": \"" + line + "\"");
    vertices[i] = {x, y};
  }
  std::vector<std::array<int, 3>> cells(nc);
  for (long long c = 0; c < nc; ++c) {
    next_line("cells");
    std::istringstream ls(line);
    long long a, b, d;
    if (!(ls >> a >> b >> d)) throw InputError("malformed cell line " + std::to_string(c) + ": \"" + line + "\"");
    for (long long v : {a, b, d}) {
      if (v < 0 || v >= nv) {
        throw InputError("cell " + std::to_string(c) + ": vertex index out of range (" + std::to_string(v) +
                         " not in [0, " + std::to_string(nv) + "))");
      }
    }
    cells[c] = {static_cast<int>(a), static_cast<int>(b), static_cast<int>(d)};
  }
  return Mesh(std::move(vertices), std::move(cells));
}

Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file " + path.string());
  return parse_mesh(in);
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << mesh.num_vertices() << ' ' << mesh.num_cells() << '\n';
  out << std::setprecision(17);
  for (const Vec2& v : mesh.vertices()) out << v.x() << ' ' << v.y() << '\n';
  for (const auto& c : mesh.cells()) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

void save_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file " + path.string());
  write_mesh(mesh, out);
}

FacetTrace facet_trace_points(const Mesh& mesh, int facet, const SegmentRule& rule) {
  const Facet& f = mesh.facets()[facet];
  FacetTrace tr;
  const int sides = f.is_boundary() ? 1 : 2;
  for (int q = 0; q < rule.size(); ++q) {
    const double s = rule.points[q];
    tr.parameters.push_back(s);
    tr.weights.push_back(rule.weights[q] * f.length);
    for (int side = 0; side < sides; ++side) {
      const int cell = side == 0 ? f.plus_cell : f.minus_cell;
      const Vec2 ref = reference_edge_point(f.local_edge[side], local_edge_parameter(f, side, s));
      const Vec2 x = mesh.geometry(cell).map(ref);
      (side == 0 ? tr.plus_reference : tr.minus_reference).push_back(ref);
      (side == 0 ? tr.plus_points : tr.minus_points).push_back(x);
    }
  }
  return tr;
}

}  // namespace divfree
