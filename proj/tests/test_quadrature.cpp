#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "divfree/quadrature.hpp"

using namespace divfree;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

// Integral of x^a y^b over the reference triangle.
double triangle_monomial(int a, int b) { return factorial(a) * factorial(b) / factorial(a + b + 2); }

}  // namespace

TEST(Quadrature, SegmentExactness) {
  for (int order = 1; order <= 15; ++order) {
    const SegmentRule r = gauss_segment(order);
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-14);
    for (int p = 0; p <= order; ++p) {
      double s = 0.0;
      for (int q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.points[q], p);
      EXPECT_NEAR(s, 1.0 / (p + 1), 1e-12) << "order " << order << " power " << p;
    }
  }
}

TEST(Quadrature, TriangleExactness) {
  for (int order = 1; order <= 14; ++order) {
    const QuadratureRule r = triangle_rule(order);
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 0.5, 1e-14);
    const int m = (order + 2) / 2;
    EXPECT_EQ(r.size(), m * m);
    for (int q = 0; q < r.size(); ++q) {
      EXPECT_GT(r.weights[q], 0.0);
      EXPECT_GT(r.points[q].x(), 0.0);
      EXPECT_GT(r.points[q].y(), 0.0);
      EXPECT_LT(r.points[q].x() + r.points[q].y(), 1.0);
    }
    for (int a = 0; a <= order; ++a) {
      for (int b = 0; a + b <= order; ++b) {
        double s = 0.0;
        for (int q = 0; q < r.size(); ++q) s += r.weights[q] * std::pow(r.points[q].x(), a) * std::pow(r.points[q].y(), b);
        EXPECT_NEAR(s, triangle_monomial(a, b), 1e-12) << "order " << order << " x^" << a << " y^" << b;
      }
    }
  }
}

TEST(Quadrature, GaussJacobiMoments) {
  // Weight (1-x)^1 on [-1,1]: integral of (1-x) x^p.
  std::vector<double> x, w;
  gauss_jacobi(5, 1.0, 0.0, x, w);
  for (int p = 0; p <= 9; ++p) {
    double s = 0.0;
    for (size_t i = 0; i < x.size(); ++i) s += w[i] * std::pow(x[i], p);
    // Integral of (1-x) x^p over [-1,1].
    const double even = (p % 2 == 0) ? 2.0 / (p + 1) : 0.0;
    const double odd = (p % 2 == 1) ? 2.0 / (p + 2) : 0.0;
    EXPECT_NEAR(s, even - odd, 1e-13) << p;
  }
}
