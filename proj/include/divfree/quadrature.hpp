#pragma once

#include <vector>

#include "divfree/types.hpp"

namespace divfree {

/// Gauss rule on the reference segment [0,1]; weights sum to 1.
struct SegmentRule {
  std::vector<double> points;
  std::vector<double> weights;
  int order = 0;

  int size() const { return static_cast<int>(points.size()); }
};

/// Rule on the reference triangle (0,0), (1,0), (0,1); weights sum to 1/2.
struct QuadratureRule {
  std::vector<Vec2> points;
  std::vector<double> weights;
  int order = 0;

  int size() const { return static_cast<int>(points.size()); }
};

/// Gauss-Legendre rule exact for polynomials of degree <= order.
SegmentRule gauss_segment(int order);

/// Collapsed (Duffy) Gauss-Legendre x Gauss-Jacobi rule exact for total
/// degree <= order. Uses ceil((order+1)/2)^2 points, all interior, positive
/// weights.
QuadratureRule triangle_rule(int order);

/// Nodes (on [-1,1]) and weights of the n-point Gauss-Jacobi rule for the
/// weight (1-x)^alpha (1+x)^beta, via the Golub-Welsch eigenproblem.
void gauss_jacobi(int n, double alpha, double beta, std::vector<double>& nodes,
                  std::vector<double>& weights);

}  // namespace divfree
