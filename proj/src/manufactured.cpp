#include "divfree/manufactured.hpp"

#include <cmath>
#include <numbers>

#include "divfree/quadrature.hpp"
#include "tabulation.hpp"

namespace divfree {

namespace {

constexpr double kPi = std::numbers::pi;

struct Shape {
  double sx, cx, sy, cy;
  explicit Shape(const Vec2& x)
      : sx(std::sin(2 * kPi * x.x())), cx(std::cos(2 * kPi * x.x())),
        sy(std::sin(2 * kPi * x.y())), cy(std::cos(2 * kPi * x.y())) {}
  Vec2 u() const { return {sx * cy, -cx * sy}; }
};

// (sin 4 pi x, sin 4 pi y): (U . grad) U = pi S and grad P = -4 pi S.
Vec2 s4(const Vec2& x) { return {std::sin(4 * kPi * x.x()), std::sin(4 * kPi * x.y())}; }

}  // namespace

ExactProblem taylor_green(double nu) {
  if (nu < 0.0) throw InputError("taylor_green: viscosity must be non-negative");
  ExactProblem p;
  p.nu = nu;
  p.velocity = [](const Vec2& x, double t) -> Vec2 { return std::cos(2 * kPi * t) * Shape(x).u(); };
  p.velocity_gradient = [](const Vec2& x, double t) {
    const Shape s(x);
    Mat2 g;
    g << 2 * kPi * s.cx * s.cy, -2 * kPi * s.sx * s.sy,
         2 * kPi * s.sx * s.sy, -2 * kPi * s.cx * s.cy;
    return Mat2(std::cos(2 * kPi * t) * g);
  };
  p.pressure = [](const Vec2& x, double t) {
    return std::cos(2 * kPi * t) * (std::cos(4 * kPi * x.x()) + std::cos(4 * kPi * x.y()));
  };
  p.velocity_dt = [](const Vec2& x, double t) -> Vec2 { return -2 * kPi * std::sin(2 * kPi * t) * Shape(x).u(); };
  // Lap U = -8 pi^2 U.
  p.forcing = [nu](const Vec2& x, double t) {
    const double c = std::cos(2 * kPi * t);
    const double dc = -2 * kPi * std::sin(2 * kPi * t);
    const Vec2 U = Shape(x).u();
    const Vec2 S = s4(x);
    return Vec2((dc + 8 * kPi * kPi * nu * c) * U + (kPi * c * c - 4 * kPi * c) * S);
  };
  p.forcing_dt = [nu](const Vec2& x, double t) {
    const double c = std::cos(2 * kPi * t);
    const double dc = -2 * kPi * std::sin(2 * kPi * t);
    const double ddc = -4 * kPi * kPi * c;
    const Vec2 U = Shape(x).u();
    const Vec2 S = s4(x);
    return Vec2((ddc + 8 * kPi * kPi * nu * dc) * U + (2 * kPi * c * dc - 4 * kPi * dc) * S);
  };
  return p;
}

ExactProblem with_gradient_forcing(ExactProblem base, std::function<Vec2(const Vec2&)> grad_phi,
                                   std::function<double(const Vec2&)> phi) {
  auto f = base.forcing;
  auto p = base.pressure;
  base.forcing = [f, grad_phi](const Vec2& x, double t) { return Vec2(f(x, t) + grad_phi(x)); };
  base.pressure = [p, phi](const Vec2& x, double t) { return p(x, t) + phi(x); };
  return base;
}

int error_order(int degree) { return 2 * degree + 11; }

namespace {

template <class Integrand>
double integrate_field(const RTSpace& space, const CoefVec& coeffs, int order, Integrand integrand) {
  space.check(coeffs);
  const QuadratureRule rule = triangle_rule(order);
  const detail::RtTable t = detail::tabulate(space.reference(), rule.points, rule.weights);
  const Mesh& mesh = space.mesh();
  double local[15];
  double sum = 0.0;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const CellGeometry& geo = mesh.geometry(c);
    detail::gather(space, coeffs.values, c, local);
    for (int q = 0; q < t.size(); ++q) {
      const VectorValue v = piola_map(geo, detail::combine(t, q, local));
      sum += rule.weights[q] * geo.det * integrand(geo.map(rule.points[q]), v);
    }
  }
  return std::sqrt(sum);
}

}  // namespace

double l2_error(const RTSpace& space, const CoefVec& coeffs, const ExactProblem& problem, double t, int quad_order) {
  if (quad_order < 0) quad_order = error_order(space.degree());
  return integrate_field(space, coeffs, quad_order, [&](const Vec2& x, const VectorValue& v) {
    return (problem.velocity(x, t) - v.value).squaredNorm();
  });
}

double h1_broken_error(const RTSpace& space, const CoefVec& coeffs, const ExactProblem& problem, double t,
                       int quad_order) {
  if (quad_order < 0) quad_order = error_order(space.degree());
  return integrate_field(space, coeffs, quad_order, [&](const Vec2& x, const VectorValue& v) {
    return (problem.velocity_gradient(x, t) - v.grad).squaredNorm();
  });
}

double div_norm(const RTSpace& space, const CoefVec& coeffs, int quad_order) {
  if (quad_order < 0) quad_order = error_order(space.degree());
  return integrate_field(space, coeffs, quad_order, [](const Vec2&, const VectorValue& v) { return v.div * v.div; });
}

double l2_norm(const RTSpace& space, const CoefVec& coeffs, int quad_order) {
  if (quad_order < 0) quad_order = error_order(space.degree());
  return integrate_field(space, coeffs, quad_order,
                         [](const Vec2&, const VectorValue& v) { return v.value.squaredNorm(); });
}

std::vector<std::optional<double>> rate_table(const std::vector<double>& h, const std::vector<double>& e) {
  if (h.size() != e.size()) throw InputError("rate_table: h and error lists differ in length");
  for (size_t i = 1; i < h.size(); ++i)
    if (!(h[i] < h[i - 1])) throw InputError("rate_table: mesh sizes must be strictly decreasing");
  std::vector<std::optional<double>> rates;
  for (size_t i = 0; i + 1 < h.size(); ++i) {
    const bool ok = e[i] > 0.0 && e[i + 1] > 0.0 && std::isfinite(e[i]) && std::isfinite(e[i + 1]);
    if (ok) rates.emplace_back(std::log(e[i] / e[i + 1]) / std::log(h[i] / h[i + 1]));
    else rates.emplace_back(std::nullopt);
  }
  return rates;
}

}  // namespace divfree
