#include "divfree/fe_space.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "divfree/quadrature.hpp"

namespace divfree {

double legendre01(int j, double t) {
  const double x = 2.0 * t - 1.0;
  double p0 = 1.0, p1 = x;
  if (j == 0) return 1.0;
  for (int n = 1; n < j; ++n) {
    const double p2 = ((2.0 * n + 1.0) * x * p1 - n * p0) / (n + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return std::sqrt(2.0 * j + 1.0) * p1;
}

namespace {

double ipow(double x, int p) {
  double r = 1.0;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

}  // namespace

double Poly2::operator()(const Vec2& x) const {
  double v = 0.0;
  for (const Term& t : terms) v += t.coef * ipow(x.x(), t.px) * ipow(x.y(), t.py);
  return v;
}

Vec2 Poly2::gradient(const Vec2& x) const {
  Vec2 g = Vec2::Zero();
  for (const Term& t : terms) {
    if (t.px > 0) g.x() += t.coef * t.px * ipow(x.x(), t.px - 1) * ipow(x.y(), t.py);
    if (t.py > 0) g.y() += t.coef * t.py * ipow(x.x(), t.px) * ipow(x.y(), t.py - 1);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Scalar reference element

ScalarReferenceElement::ScalarReferenceElement(int degree) : degree_(degree) {
  if (degree < 0) throw InputError("negative polynomial degree");
  std::vector<Poly2> monomials;
  for (int d = 0; d <= degree; ++d)
    for (int a = d; a >= 0; --a) monomials.push_back(Poly2{{{1.0, a, d - a}}});
  const int n = static_cast<int>(monomials.size());

  const QuadratureRule rule = triangle_rule(2 * degree);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(n, n);
  for (int q = 0; q < rule.size(); ++q)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        gram(i, j) += rule.weights[q] * monomials[i](rule.points[q]) * monomials[j](rule.points[q]);

  // psi = L^{-1} m with gram = L L^T
  const Eigen::MatrixXd L = gram.llt().matrixL();
  const Eigen::MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  basis_.resize(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j)
      for (const auto& t : monomials[j].terms) basis_[i].terms.push_back({Linv(i, j) * t.coef, t.px, t.py});
}

const ScalarReferenceElement& ScalarReferenceElement::get(int degree) {
  static std::map<int, std::unique_ptr<ScalarReferenceElement>> cache;
  static std::mutex mtx;
  std::lock_guard lock(mtx);
  auto& slot = cache[degree];
  if (!slot) slot = std::make_unique<ScalarReferenceElement>(degree);
  return *slot;
}

// ---------------------------------------------------------------------------
// RT reference element

namespace {

VectorValue eval_raw(const std::array<Poly2, 2>& f, const Vec2& x) {
  VectorValue r;
  r.value = {f[0](x), f[1](x)};
  r.grad.row(0) = f[0].gradient(x).transpose();
  r.grad.row(1) = f[1].gradient(x).transpose();
  r.div = r.grad(0, 0) + r.grad(1, 1);
  return r;
}

Vec2 edge_normal(int edge) {
  const Vec2 t = reference_vertex((edge + 2) % 3) - reference_vertex((edge + 1) % 3);
  return {t.y(), -t.x()};
}

}  // namespace

RtReferenceElement::RtReferenceElement(int degree) : degree_(degree) {
  if (degree != 1 && degree != 2) {
    throw InputError("unsupported Raviart-Thomas degree " + std::to_string(degree) +
                     " (supported degrees: 1, 2)");
  }
  const int k = degree;
  for (int c = 0; c < 2; ++c)
    for (int d = 0; d <= k; ++d)
      for (int a = d; a >= 0; --a) {
        std::array<Poly2, 2> f;
        f[c].terms.push_back({1.0, a, d - a});
        raw_.push_back(f);
      }
  for (int a = k; a >= 0; --a) {
    std::array<Poly2, 2> f;
    f[0].terms.push_back({1.0, a + 1, k - a});
    f[1].terms.push_back({1.0, a, k - a + 1});
    raw_.push_back(f);
  }
  const int n = num_dofs();
  if (static_cast<int>(raw_.size()) != n) throw Error("RT raw basis size mismatch");

  vandermonde_.resize(n, n);
  for (int r = 0; r < n; ++r) {
    const auto& f = raw_[r];
    vandermonde_.col(r) = apply_dofs([&f](const Vec2& x) { return Vec2(f[0](x), f[1](x)); });
  }
  coefficients_ = vandermonde_.fullPivLu().inverse();
}

const RtReferenceElement& RtReferenceElement::get(int degree) {
  static std::map<int, std::unique_ptr<RtReferenceElement>> cache;
  static std::mutex mtx;
  std::lock_guard lock(mtx);
  auto& slot = cache[degree];
  if (!slot) slot = std::make_unique<RtReferenceElement>(degree);
  return *slot;
}

Eigen::VectorXd RtReferenceElement::apply_dofs(const VectorField& field, int extra_order) const {
  const int k = degree_;
  Eigen::VectorXd dofs = Eigen::VectorXd::Zero(num_dofs());
  const SegmentRule seg = gauss_segment(2 * k + 2 + extra_order);
  for (int e = 0; e < 3; ++e) {
    const Vec2 nu = edge_normal(e);
    for (int q = 0; q < seg.size(); ++q) {
      const double t = seg.points[q];
      const double flux = field(reference_edge_point(e, t)).dot(nu);
      for (int j = 0; j <= k; ++j) dofs(e * (k + 1) + j) += seg.weights[q] * flux * legendre01(j, t);
    }
  }
  const ScalarReferenceElement& inner = ScalarReferenceElement::get(k - 1);
  const int ni = inner.num_dofs();
  const QuadratureRule tri = triangle_rule(2 * k + 2 + extra_order);
  for (int q = 0; q < tri.size(); ++q) {
    const Vec2 v = field(tri.points[q]);
    for (int c = 0; c < 2; ++c)
      for (int m = 0; m < ni; ++m)
        dofs(3 * (k + 1) + c * ni + m) += tri.weights[q] * v(c) * inner.value(m, tri.points[q]);
  }
  return dofs;
}

void RtReferenceElement::evaluate(const Vec2& x, std::span<VectorValue> out) const {
  const int n = num_dofs();
  for (int j = 0; j < n; ++j) out[j] = VectorValue{};
  for (int r = 0; r < n; ++r) {
    const VectorValue raw = eval_raw(raw_[r], x);
    for (int j = 0; j < n; ++j) {
      const double c = coefficients_(r, j);
      if (c == 0.0) continue;
      out[j].value += c * raw.value;
      out[j].grad += c * raw.grad;
      out[j].div += c * raw.div;
    }
  }
}

std::vector<VectorValue> RtReferenceElement::evaluate(const Vec2& x) const {
  std::vector<VectorValue> out(num_dofs());
  evaluate(x, out);
  return out;
}

std::vector<VectorValue> rt_reference_basis(int degree, const Vec2& point) {
  return RtReferenceElement::get(degree).evaluate(point);
}

VectorValue piola_map(const CellGeometry& g, const VectorValue& ref) {
  if (!(g.det > 0.0)) throw GeometryError("piola_map: degenerate cell (det J <= 0)");
  const double inv_det = 1.0 / g.det;
  VectorValue phys;
  phys.value = inv_det * (g.jacobian * ref.value);
  phys.grad = inv_det * (g.jacobian * ref.grad * g.inverse_jacobian);
  phys.div = inv_det * ref.div;
  return phys;
}

// ---------------------------------------------------------------------------
// Global spaces

RTSpace::RTSpace(std::shared_ptr<const Mesh> mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree), ref_(&RtReferenceElement::get(degree)) {
  const Mesh& m = *mesh_;
  const int k = degree_;
  const int per_edge = k + 1;
  const int nloc = ref_->num_dofs();
  const int nint = ref_->num_interior_dofs();
  const int edge_total = m.num_facets() * per_edge;
  num_dofs_ = edge_total + m.num_cells() * nint;

  cell_dofs_.resize(static_cast<size_t>(m.num_cells()) * nloc);
  cell_signs_.resize(cell_dofs_.size());
  for (int c = 0; c < m.num_cells(); ++c) {
    int* dofs = cell_dofs_.data() + c * nloc;
    double* signs = cell_signs_.data() + c * nloc;
    for (int e = 0; e < 3; ++e) {
      const CellFacet cf = m.cell_facets(c)[e];
      const Facet& f = m.facets()[cf.facet];
      const int side = f.plus_cell == c ? 0 : 1;
      for (int j = 0; j <= k; ++j) {
        const double flip = (f.reversed[side] && (j % 2 == 1)) ? -1.0 : 1.0;
        dofs[e * per_edge + j] = facet_dof(cf.facet, j);
        signs[e * per_edge + j] = cf.sign * flip;
      }
    }
    for (int i = 0; i < nint; ++i) {
      dofs[3 * per_edge + i] = edge_total + c * nint + i;
      signs[3 * per_edge + i] = 1.0;
    }
  }

  is_boundary_.assign(num_dofs_, 0);
  for (int f = 0; f < m.num_facets(); ++f) {
    if (!m.facets()[f].is_boundary()) continue;
    for (int j = 0; j <= k; ++j) {
      boundary_dofs_.push_back(facet_dof(f, j));
      is_boundary_[facet_dof(f, j)] = 1;
    }
  }
}

void RTSpace::check(const CoefVec& v) const {
  if (!(v.space == tag()) || v.values.size() != num_dofs_) {
    throw InputError("coefficient vector does not belong to this RT space");
  }
}

ScalarDGSpace::ScalarDGSpace(std::shared_ptr<const Mesh> mesh, int degree)
    : mesh_(std::move(mesh)), degree_(degree), ref_(&ScalarReferenceElement::get(degree)) {}

double ScalarDGSpace::basis_value(int cell, int i, const Vec2& ref) const {
  return ref_->value(i, ref) / std::sqrt(mesh_->geometry(cell).det);
}

CoefVec ScalarDGSpace::l2_project(const ScalarField& g, int quad_order) const {
  if (quad_order < 0) quad_order = 2 * degree_ + 14;
  const QuadratureRule rule = triangle_rule(quad_order);
  CoefVec out = zeros();
  const int nl = num_local_dofs();
  for (int c = 0; c < mesh_->num_cells(); ++c) {
    const CellGeometry& geo = mesh_->geometry(c);
    const double scale = std::sqrt(geo.det);
    for (int q = 0; q < rule.size(); ++q) {
      const double gq = g(geo.map(rule.points[q]));
      for (int i = 0; i < nl; ++i)
        out.values(first_dof(c) + i) += rule.weights[q] * scale * gq * ref_->value(i, rule.points[q]);
    }
  }
  return out;
}

double ScalarDGSpace::evaluate(const CoefVec& c, int cell, const Vec2& ref) const {
  double v = 0.0;
  for (int i = 0; i < num_local_dofs(); ++i) v += c.values(first_dof(cell) + i) * basis_value(cell, i, ref);
  return v;
}

CoefVec ScalarDGSpace::constant(double value) const {
  return l2_project([value](const Vec2&) { return value; }, 2 * degree_);
}

VectorValue evaluate_field(const RTSpace& space, const CoefVec& coeffs, int cell, const Vec2& ref) {
  space.check(coeffs);
  const int n = space.num_local_dofs();
  std::vector<VectorValue> basis(n);
  space.reference().evaluate(ref, basis);
  const auto dofs = space.cell_dofs(cell);
  const auto signs = space.cell_signs(cell);
  VectorValue sum;
  for (int i = 0; i < n; ++i) {
    const double c = signs[i] * coeffs.values(dofs[i]);
    sum.value += c * basis[i].value;
    sum.grad += c * basis[i].grad;
    sum.div += c * basis[i].div;
  }
  return piola_map(space.mesh().geometry(cell), sum);
}

CoefVec rt_interpolate(const VectorField& u, const RTSpace& space, BoundaryDofs boundary, int extra_order) {
  const Mesh& mesh = space.mesh();
  CoefVec out = space.zeros();
  const int per_edge = space.degree() + 1;
  const int nloc = space.num_local_dofs();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry& geo = mesh.geometry(c);
    const Mat2 pull = geo.det * geo.inverse_jacobian;
    const Eigen::VectorXd local =
        space.reference().apply_dofs([&](const Vec2& xh) -> Vec2 { return pull * u(geo.map(xh)); }, extra_order);
    const auto dofs = space.cell_dofs(c);
    const auto signs = space.cell_signs(c);
    for (int i = 0; i < nloc; ++i) {
      if (i < 3 * per_edge) {
        const int facet = mesh.cell_facets(c)[i / per_edge].facet;
        if (mesh.facets()[facet].plus_cell != c) continue;
      }
      out.values(dofs[i]) = signs[i] * local(i);
    }
  }
  if (boundary == BoundaryDofs::Zero) {
    for (int d : space.boundary_dofs()) out.values(d) = 0.0;
  }
  return out;
}

}  // namespace divfree
