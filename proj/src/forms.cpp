#include "divfree/forms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "tabulation.hpp"

namespace divfree {

using detail::RtEdgeTables;
using detail::RtTable;

double default_sigma(int degree) { return 10.0 * degree * degree; }
int convection_order(int degree) { return std::max(2 * degree + 3, 3 * degree + 2); }
int default_order(int degree) { return 2 * degree + 3; }

int load_order(int degree) { return 2 * degree + 7; }

namespace {

constexpr int kMaxLocal = 15;

const RtTable& cell_table(int degree, int order) {
  static std::map<std::pair<int, int>, std::unique_ptr<RtTable>> cache;
  static std::mutex mtx;
  std::lock_guard lock(mtx);
  auto& slot = cache[{degree, order}];
  if (!slot) slot = std::make_unique<RtTable>(detail::tabulate_cell(RtReferenceElement::get(degree), order));
  return *slot;
}

const RtEdgeTables& edge_tables(int degree, int order) {
  static std::map<std::pair<int, int>, std::unique_ptr<RtEdgeTables>> cache;
  static std::mutex mtx;
  std::lock_guard lock(mtx);
  auto& slot = cache[{degree, order}];
  if (!slot) slot = std::make_unique<RtEdgeTables>(detail::tabulate_edges(RtReferenceElement::get(degree), order));
  return *slot;
}

const RtTable& side_table(const RtEdgeTables& t, const Facet& f, int side) {
  return t.edge[f.local_edge[side]][f.reversed[side] ? 1 : 0];
}

int cell_of(const Facet& f, int side) { return side == 0 ? f.plus_cell : f.minus_cell; }

/// Adds g . phi_i (physical) for all local basis functions of a cell, where
/// g is a physical vector already multiplied by the quadrature weight.
void scatter_test(const RTSpace& space, int cell, const RtTable& t, int q, const Vec2& g, Eigen::VectorXd& r) {
  const CellGeometry& geo = space.mesh().geometry(cell);
  const Vec2 jg = geo.jacobian.transpose() * g / geo.det;
  const auto dofs = space.cell_dofs(cell);
  const auto signs = space.cell_signs(cell);
  for (int i = 0; i < t.num_dofs; ++i) r(dofs[i]) += signs[i] * jg.dot(t.at(q, i).value);
}

Vec2 physical_value(const RtTable& t, int q, const double* local, const CellGeometry& geo) {
  return geo.jacobian * detail::combine(t, q, local).value / geo.det;
}

SparseMat from_triplets(int rows, int cols, const std::vector<Eigen::Triplet<double>>& trip) {
  SparseMat m(rows, cols);
  m.setFromTriplets(trip.begin(), trip.end());
  m.makeCompressed();
  return m;
}

void add_local(const RTSpace& space, int row_cell, int col_cell, const Eigen::MatrixXd& local,
               std::vector<Eigen::Triplet<double>>& trip) {
  const auto rd = space.cell_dofs(row_cell);
  const auto rs = space.cell_signs(row_cell);
  const auto cd = space.cell_dofs(col_cell);
  const auto cs = space.cell_signs(col_cell);
  for (int i = 0; i < local.rows(); ++i)
    for (int j = 0; j < local.cols(); ++j)
      if (local(i, j) != 0.0) trip.emplace_back(rd[i], cd[j], rs[i] * cs[j] * local(i, j));
}

}  // namespace

double facet_normal_flux(const RTSpace& space, const Eigen::VectorXd& a, int facet, double s) {
  double flux = 0.0;
  for (int j = 0; j <= space.degree(); ++j) flux += a(space.facet_dof(facet, j)) * legendre01(j, s);
  return flux / space.mesh().facets()[facet].length;
}

namespace {

/// Quadrature points of one interior facet for integrands containing
/// |a.n_F|. a.n_F is a polynomial of degree k along the facet; where it
/// changes sign the facet is split at its roots so that every piece carries
/// a polynomial integrand and the Gauss rule stays exact.
struct FacetPoints {
  const RtTable* plus = nullptr;
  const RtTable* minus = nullptr;
  std::vector<double> s;        // facet parameters
  std::vector<double> weights;  // facet-parameter weights (sum to 1)
  RtTable plus_split, minus_split;

  int size() const { return static_cast<int>(s.size()); }
};

// Roots of a.n_F in (0,1), from its values at s = 0, 1/2, 1 (exact for k <= 2).
std::vector<double> flux_sign_changes(const RTSpace& space, const Eigen::VectorXd& a, int facet) {
  const double f0 = facet_normal_flux(space, a, facet, 0.0);
  const double fh = facet_normal_flux(space, a, facet, 0.5);
  const double f1 = facet_normal_flux(space, a, facet, 1.0);
  // p(s) = c0 + c1 s + c2 s^2
  const double c0 = f0;
  const double c2 = 2.0 * f0 - 4.0 * fh + 2.0 * f1;
  const double c1 = f1 - f0 - c2;
  const double scale = std::max({std::abs(f0), std::abs(fh), std::abs(f1)});
  std::vector<double> roots;
  if (scale == 0.0) return roots;
  constexpr double kEdge = 1e-12;
  auto keep = [&](double r) {
    if (r > kEdge && r < 1.0 - kEdge) roots.push_back(r);
  };
  if (std::abs(c2) <= 1e-14 * scale) {
    if (std::abs(c1) > 1e-14 * scale) keep(-c0 / c1);
  } else {
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc > 0.0) {
      // Cancellation-free quadratic formula.
      const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
      keep(q / c2);
      if (q != 0.0) keep(c0 / q);
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

void facet_points(const RTSpace& space, const RtEdgeTables& et, const Eigen::VectorXd& a, int facet,
                  FacetPoints& out) {
  const Facet& f = space.mesh().facets()[facet];
  const std::vector<double> roots = flux_sign_changes(space, a, facet);
  if (roots.empty()) {
    out.plus = &side_table(et, f, 0);
    out.minus = &side_table(et, f, 1);
    out.s = et.rule.points;
    out.weights = et.rule.weights;
    return;
  }
  out.s.clear();
  out.weights.clear();
  double lo = 0.0;
  for (size_t piece = 0; piece <= roots.size(); ++piece) {
    const double hi = piece < roots.size() ? roots[piece] : 1.0;
    for (int q = 0; q < et.rule.size(); ++q) {
      out.s.push_back(lo + (hi - lo) * et.rule.points[q]);
      out.weights.push_back((hi - lo) * et.rule.weights[q]);
    }
    lo = hi;
  }
  const RtReferenceElement& ref = space.reference();
  std::vector<Vec2> pp, pm;
  for (double s : out.s) {
    pp.push_back(reference_edge_point(f.local_edge[0], local_edge_parameter(f, 0, s)));
    pm.push_back(reference_edge_point(f.local_edge[1], local_edge_parameter(f, 1, s)));
  }
  out.plus_split = detail::tabulate(ref, pp, out.weights);
  out.minus_split = detail::tabulate(ref, pm, out.weights);
  out.plus = &out.plus_split;
  out.minus = &out.minus_split;
}

void check_div_spaces(const RTSpace& v_space, const ScalarDGSpace& q_space) {
  if (q_space.degree() != v_space.degree()) {
    throw InputError("assemble_div: multiplier degree " + std::to_string(q_space.degree()) +
                     " differs from velocity degree " + std::to_string(v_space.degree()));
  }
  if (q_space.mesh().id() != v_space.mesh().id()) throw InputError("assemble_div: spaces live on different meshes");
}

Eigen::MatrixXd local_mass(const RtTable& t, const CellGeometry& geo, std::vector<VectorValue>& phys) {
  const int n = t.num_dofs;
  detail::physical_basis(t, geo, phys);
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(n, n);
  for (int q = 0; q < t.size(); ++q) {
    const double w = t.weights[q] * geo.det;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) local(i, j) += w * phys[q * n + i].value.dot(phys[q * n + j].value);
  }
  return local;
}

// (div phi_j, psi_i) = sum_q w det (divhat/det) (psihat/sqrt(det))
Eigen::MatrixXd local_div(const RtTable& t, const ScalarReferenceElement& sref, const CellGeometry& geo) {
  const int nv = t.num_dofs;
  const int nq = sref.num_dofs();
  const double scale = 1.0 / std::sqrt(geo.det);
  Eigen::MatrixXd local(nq, nv);
  for (int i = 0; i < nq; ++i) {
    for (int j = 0; j < nv; ++j) {
      double v = 0.0;
      for (int q = 0; q < t.size(); ++q) v += t.weights[q] * t.at(q, j).div * sref.value(i, t.points[q]);
      local(i, j) = v * scale;
    }
  }
  return local;
}

}  // namespace

Eigen::MatrixXd cell_mass_matrix(const RTSpace& space, int cell, int quad_order) {
  if (quad_order < 0) quad_order = default_order(space.degree());
  std::vector<VectorValue> phys;
  return local_mass(cell_table(space.degree(), quad_order), space.mesh().geometry(cell), phys);
}

Eigen::MatrixXd cell_div_matrix(const RTSpace& v_space, const ScalarDGSpace& q_space, int cell) {
  check_div_spaces(v_space, q_space);
  const int k = v_space.degree();
  return local_div(cell_table(k, 2 * k + 1), q_space.reference(), v_space.mesh().geometry(cell));
}

SparseMat assemble_mass(const RTSpace& space, int quad_order) {
  if (quad_order < 0) quad_order = default_order(space.degree());
  const Mesh& mesh = space.mesh();
  const RtTable& t = cell_table(space.degree(), quad_order);
  const int n = space.num_local_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * n * n);
  std::vector<VectorValue> phys;
  for (int c = 0; c < mesh.num_cells(); ++c) add_local(space, c, c, local_mass(t, mesh.geometry(c), phys), trip);
  return from_triplets(space.num_dofs(), space.num_dofs(), trip);
}

SparseMat assemble_div(const RTSpace& v_space, const ScalarDGSpace& q_space) {
  check_div_spaces(v_space, q_space);
  const Mesh& mesh = v_space.mesh();
  const int k = v_space.degree();
  const RtTable& t = cell_table(k, 2 * k + 1);
  const int nv = v_space.num_local_dofs();
  const int nq = q_space.num_local_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * nv * nq);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto dofs = v_space.cell_dofs(c);
    const auto signs = v_space.cell_signs(c);
    const Eigen::MatrixXd local = local_div(t, q_space.reference(), mesh.geometry(c));
    for (int i = 0; i < nq; ++i)
      for (int j = 0; j < nv; ++j)
        if (local(i, j) != 0.0) trip.emplace_back(q_space.first_dof(c) + i, dofs[j], signs[j] * local(i, j));
  }
  return from_triplets(q_space.num_dofs(), v_space.num_dofs(), trip);
}

Eigen::VectorXd apply_convection(const RTSpace& space, const CoefVec& a, const CoefVec& w, int quad_order) {
  space.check(a);
  space.check(w);
  if (quad_order < 0) quad_order = convection_order(space.degree());
  const Mesh& mesh = space.mesh();
  const RtTable& ct = cell_table(space.degree(), quad_order);
  const RtEdgeTables& et = edge_tables(space.degree(), quad_order);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(space.num_dofs());
  double la[kMaxLocal], lw[kMaxLocal];

  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry& geo = mesh.geometry(c);
    detail::gather(space, a.values, c, la);
    detail::gather(space, w.values, c, lw);
    for (int q = 0; q < ct.size(); ++q) {
      const Vec2 av = physical_value(ct, q, la, geo);
      const VectorValue wv = piola_map(geo, detail::combine(ct, q, lw));
      const Vec2 g = (ct.weights[q] * geo.det) * (wv.grad * av);
      scatter_test(space, c, ct, q, g, r);
    }
  }

  double lw_plus[kMaxLocal], lw_minus[kMaxLocal];
  FacetPoints fp;
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& f = mesh.facets()[fi];
    if (f.is_boundary()) continue;
    facet_points(space, et, a.values, fi, fp);
    const RtTable& tp = *fp.plus;
    const RtTable& tm = *fp.minus;
    const CellGeometry& gp = mesh.geometry(f.plus_cell);
    const CellGeometry& gm = mesh.geometry(f.minus_cell);
    detail::gather(space, w.values, f.plus_cell, lw_plus);
    detail::gather(space, w.values, f.minus_cell, lw_minus);
    for (int q = 0; q < fp.size(); ++q) {
      const double an = facet_normal_flux(space, a.values, fi, fp.s[q]);
      const Vec2 jump = physical_value(tp, q, lw_plus, gp) - physical_value(tm, q, lw_minus, gm);
      const double wt = fp.weights[q] * f.length;
      scatter_test(space, f.plus_cell, tp, q, wt * (-0.5 * an + 0.5 * std::abs(an)) * jump, r);
      scatter_test(space, f.minus_cell, tm, q, wt * (-0.5 * an - 0.5 * std::abs(an)) * jump, r);
    }
  }
  return r;
}

SparseMat convection_matrix(const RTSpace& space, const CoefVec& a, int quad_order) {
  space.check(a);
  if (quad_order < 0) quad_order = convection_order(space.degree());
  const Mesh& mesh = space.mesh();
  const RtTable& ct = cell_table(space.degree(), quad_order);
  const RtEdgeTables& et = edge_tables(space.degree(), quad_order);
  const int n = space.num_local_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * n * n + static_cast<size_t>(mesh.num_facets()) * 4 * n * n);
  double la[kMaxLocal];
  std::vector<VectorValue> phys;
  Eigen::MatrixXd local(n, n);

  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry& geo = mesh.geometry(c);
    detail::gather(space, a.values, c, la);
    detail::physical_basis(ct, geo, phys);
    local.setZero();
    for (int q = 0; q < ct.size(); ++q) {
      const Vec2 av = physical_value(ct, q, la, geo);
      const double w = ct.weights[q] * geo.det;
      for (int j = 0; j < n; ++j) {
        const Vec2 adv = w * (phys[q * n + j].grad * av);
        for (int i = 0; i < n; ++i) local(i, j) += adv.dot(phys[q * n + i].value);
      }
    }
    add_local(space, c, c, local, trip);
  }

  std::vector<VectorValue> pp, pm;
  std::array<std::array<Eigen::MatrixXd, 2>, 2> blocks;
  FacetPoints fp;
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& f = mesh.facets()[fi];
    if (f.is_boundary()) continue;
    facet_points(space, et, a.values, fi, fp);
    detail::physical_basis(*fp.plus, mesh.geometry(f.plus_cell), pp);
    detail::physical_basis(*fp.minus, mesh.geometry(f.minus_cell), pm);
    for (auto& row : blocks)
      for (auto& b : row) b = Eigen::MatrixXd::Zero(n, n);
    const std::array<const std::vector<VectorValue>*, 2> side_phys{&pp, &pm};
    for (int q = 0; q < fp.size(); ++q) {
      const double an = facet_normal_flux(space, a.values, fi, fp.s[q]);
      const double wt = fp.weights[q] * f.length;
      for (int si = 0; si < 2; ++si) {
        const double ji = si == 0 ? 1.0 : -1.0;
        for (int sj = 0; sj < 2; ++sj) {
          const double jj = sj == 0 ? 1.0 : -1.0;
          const double coef = wt * jj * (-0.5 * an + 0.5 * std::abs(an) * ji);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
              blocks[si][sj](i, j) += coef * (*side_phys[si])[q * n + i].value.dot((*side_phys[sj])[q * n + j].value);
        }
      }
    }
    for (int si = 0; si < 2; ++si)
      for (int sj = 0; sj < 2; ++sj) add_local(space, cell_of(f, si), cell_of(f, sj), blocks[si][sj], trip);
  }
  return from_triplets(space.num_dofs(), space.num_dofs(), trip);
}

SparseMat assemble_sip(const RTSpace& space, const FormParams& params) {
  const double sigma = params.sigma < 0.0 ? default_sigma(space.degree()) : params.sigma;
  if (!(sigma > 0.0)) throw InputError("assemble_sip: penalty sigma must be positive");
  const int order = params.quad_order < 0 ? default_order(space.degree()) : params.quad_order;
  const Mesh& mesh = space.mesh();
  const RtTable& ct = cell_table(space.degree(), order);
  const RtEdgeTables& et = edge_tables(space.degree(), order);
  const int n = space.num_local_dofs();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * n * n + static_cast<size_t>(mesh.num_facets()) * 4 * n * n);
  std::vector<VectorValue> phys;
  Eigen::MatrixXd local(n, n);

  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry& geo = mesh.geometry(c);
    detail::physical_basis(ct, geo, phys);
    local.setZero();
    for (int q = 0; q < ct.size(); ++q) {
      const double w = ct.weights[q] * geo.det;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          local(i, j) += w * phys[q * n + i].grad.cwiseProduct(phys[q * n + j].grad).sum();
    }
    add_local(space, c, c, local, trip);
  }

  std::vector<VectorValue> pp, pm;
  std::array<std::array<Eigen::MatrixXd, 2>, 2> blocks;
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& f = mesh.facets()[fi];
    const int sides = f.is_boundary() ? 1 : 2;
    const double avg = f.is_boundary() ? 1.0 : 0.5;
    const double penalty = sigma / f.length;
    detail::physical_basis(side_table(et, f, 0), mesh.geometry(f.plus_cell), pp);
    if (sides == 2) detail::physical_basis(side_table(et, f, 1), mesh.geometry(f.minus_cell), pm);
    const std::array<const std::vector<VectorValue>*, 2> side_phys{&pp, &pm};
    for (auto& row : blocks)
      for (auto& b : row) b = Eigen::MatrixXd::Zero(n, n);
    for (int q = 0; q < et.rule.size(); ++q) {
      const double wt = et.rule.weights[q] * f.length;
      for (int si = 0; si < sides; ++si) {
        const double ji = si == 0 ? 1.0 : -1.0;
        for (int sj = 0; sj < sides; ++sj) {
          const double jj = sj == 0 ? 1.0 : -1.0;
          for (int i = 0; i < n; ++i) {
            const VectorValue& vi = (*side_phys[si])[q * n + i];
            const Vec2 dvi = vi.grad * f.normal;
            for (int j = 0; j < n; ++j) {
              const VectorValue& uj = (*side_phys[sj])[q * n + j];
              const Vec2 duj = uj.grad * f.normal;
              const double consistency = avg * ji * duj.dot(vi.value) + avg * jj * uj.value.dot(dvi);
              const double pen = penalty * ji * jj * uj.value.dot(vi.value);
              blocks[si][sj](i, j) += wt * (-consistency + pen);
            }
          }
        }
      }
    }
    for (int si = 0; si < sides; ++si)
      for (int sj = 0; sj < sides; ++sj) add_local(space, cell_of(f, si), cell_of(f, sj), blocks[si][sj], trip);
  }
  return from_triplets(space.num_dofs(), space.num_dofs(), trip);
}

Eigen::VectorXd assemble_sip_boundary_load(const RTSpace& space, const VectorField& g, const FormParams& params) {
  const double sigma = params.sigma < 0.0 ? default_sigma(space.degree()) : params.sigma;
  if (!(sigma > 0.0)) throw InputError("assemble_sip_boundary_load: penalty sigma must be positive");
  const int order = params.quad_order < 0 ? default_order(space.degree()) + 2 : params.quad_order;
  const Mesh& mesh = space.mesh();
  const RtEdgeTables& et = edge_tables(space.degree(), order);
  const int n = space.num_local_dofs();
  Eigen::VectorXd r = Eigen::VectorXd::Zero(space.num_dofs());
  std::vector<VectorValue> pp;
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& f = mesh.facets()[fi];
    if (!f.is_boundary()) continue;
    const RtTable& t = side_table(et, f, 0);
    const CellGeometry& geo = mesh.geometry(f.plus_cell);
    detail::physical_basis(t, geo, pp);
    const auto dofs = space.cell_dofs(f.plus_cell);
    const auto signs = space.cell_signs(f.plus_cell);
    for (int q = 0; q < et.rule.size(); ++q) {
      const double wt = et.rule.weights[q] * f.length;
      const Vec2 gq = g(geo.map(t.points[q]));
      for (int i = 0; i < n; ++i) {
        const VectorValue& v = pp[q * n + i];
        const double val = -gq.dot(v.grad * f.normal) + sigma / f.length * gq.dot(v.value);
        r(dofs[i]) += signs[i] * wt * val;
      }
    }
  }
  return r;
}

Eigen::VectorXd assemble_load(const RTSpace& space, const VectorField& f, int quad_order) {
  if (quad_order < 0) quad_order = load_order(space.degree());
  const Mesh& mesh = space.mesh();
  const RtTable& t = cell_table(space.degree(), quad_order);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(space.num_dofs());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry& geo = mesh.geometry(c);
    for (int q = 0; q < t.size(); ++q) {
      const Vec2 fq = f(geo.map(t.points[q]));
      scatter_test(space, c, t, q, (t.weights[q] * geo.det) * fq, r);
    }
  }
  return r;
}

double jump_seminorm(const RTSpace& space, const CoefVec& a, const CoefVec& v, int quad_order) {
  space.check(a);
  space.check(v);
  if (quad_order < 0) quad_order = convection_order(space.degree());
  const Mesh& mesh = space.mesh();
  const RtEdgeTables& et = edge_tables(space.degree(), quad_order);
  double lp[kMaxLocal], lm[kMaxLocal];
  double sum = 0.0;
  FacetPoints fp;
  for (int fi = 0; fi < mesh.num_facets(); ++fi) {
    const Facet& f = mesh.facets()[fi];
    if (f.is_boundary()) continue;
    facet_points(space, et, a.values, fi, fp);
    detail::gather(space, v.values, f.plus_cell, lp);
    detail::gather(space, v.values, f.minus_cell, lm);
    for (int q = 0; q < fp.size(); ++q) {
      const double an = facet_normal_flux(space, a.values, fi, fp.s[q]);
      const Vec2 jump = physical_value(*fp.plus, q, lp, mesh.geometry(f.plus_cell)) -
                        physical_value(*fp.minus, q, lm, mesh.geometry(f.minus_cell));
      sum += fp.weights[q] * f.length * 0.5 * std::abs(an) * jump.squaredNorm();
    }
  }
  return sum;
}

}  // namespace divfree
