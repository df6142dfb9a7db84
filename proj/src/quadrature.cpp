#include "divfree/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include <Eigen/Eigenvalues>

namespace divfree {

void gauss_jacobi(int n, double alpha, double beta, std::vector<double>& nodes,
                  std::vector<double>& weights) {
  if (n < 1) throw InputError("gauss_jacobi: need at least one point");
  const double ab = alpha + beta;
  // Symmetric tridiagonal Jacobi matrix of the monic recurrence.
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      T(0, 0) = (beta - alpha) / (ab + 2.0);
    } else {
      const double d = 2.0 * i + ab;
      T(i, i) = (beta * beta - alpha * alpha) / (d * (d + 2.0));
    }
  }
  for (int i = 1; i < n; ++i) {
    const double d = 2.0 * i + ab;
    const double num = 4.0 * i * (i + alpha) * (i + beta) * (i + ab);
    const double den = d * d * (d + 1.0) * (d - 1.0);
    const double off = std::sqrt(num / den);
    T(i, i - 1) = off;
    T(i - 1, i) = off;
  }
  const double mu0 = std::pow(2.0, ab + 1.0) * std::tgamma(alpha + 1.0) *
                     std::tgamma(beta + 1.0) / std::tgamma(ab + 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(T);
  nodes.resize(n);
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    nodes[i] = eig.eigenvalues()(i);
    const double v0 = eig.eigenvectors()(0, i);
    weights[i] = mu0 * v0 * v0;
  }
}

namespace {

int points_for_order(int order) { return order < 1 ? 1 : (order + 2) / 2; }

SegmentRule make_segment(int order) {
  const int n = points_for_order(order);
  std::vector<double> x, w;
  gauss_jacobi(n, 0.0, 0.0, x, w);
  SegmentRule rule;
  rule.order = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    rule.points.push_back(0.5 * (x[i] + 1.0));
    rule.weights.push_back(0.5 * w[i]);
  }
  return rule;
}

QuadratureRule make_triangle(int order) {
  const int n = points_for_order(order);
  std::vector<double> xu, wu, xv, wv;
  gauss_jacobi(n, 0.0, 0.0, xu, wu);
  gauss_jacobi(n, 1.0, 0.0, xv, wv);
  QuadratureRule rule;
  rule.order = 2 * n - 1;
  // x = u (1 - v), y = v; dx dy = (1 - v) du dv.
  for (int j = 0; j < n; ++j) {
    const double v = 0.5 * (xv[j] + 1.0);
    const double wvj = 0.25 * wv[j];  // absorbs (1 - v) and the map to [0,1]
    for (int i = 0; i < n; ++i) {
      const double u = 0.5 * (xu[i] + 1.0);
      rule.points.emplace_back(u * (1.0 - v), v);
      rule.weights.push_back(0.5 * wu[i] * wvj);
    }
  }
  return rule;
}

template <class Rule, class Make>
const Rule& cached(std::map<int, Rule>& cache, std::mutex& mtx, int order, Make make) {
  std::lock_guard lock(mtx);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, make(order)).first;
  return it->second;
}

}  // namespace

SegmentRule gauss_segment(int order) {
  static std::map<int, SegmentRule> cache;
  static std::mutex mtx;
  return cached(cache, mtx, order, make_segment);
}

QuadratureRule triangle_rule(int order) {
  static std::map<int, QuadratureRule> cache;
  static std::mutex mtx;
  return cached(cache, mtx, order, make_triangle);
}

}  // namespace divfree
