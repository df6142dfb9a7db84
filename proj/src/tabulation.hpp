#pragma once

// Reference-basis tables at quadrature points, shared by the assembly loops.

#include <array>
#include <vector>

#include "divfree/fe_space.hpp"
#include "divfree/quadrature.hpp"

namespace divfree::detail {

struct RtTable {
  int num_dofs = 0;
  std::vector<Vec2> points;
  std::vector<double> weights;
  std::vector<VectorValue> basis;  // basis[q * num_dofs + i]

  int size() const { return static_cast<int>(points.size()); }
  const VectorValue& at(int q, int i) const { return basis[q * num_dofs + i]; }
};

inline RtTable tabulate(const RtReferenceElement& ref, const std::vector<Vec2>& points,
                        const std::vector<double>& weights) {
  RtTable t;
  t.num_dofs = ref.num_dofs();
  t.points = points;
  t.weights = weights;
  t.basis.resize(points.size() * t.num_dofs);
  for (size_t q = 0; q < points.size(); ++q)
    ref.evaluate(points[q], std::span<VectorValue>(t.basis.data() + q * t.num_dofs, t.num_dofs));
  return t;
}

inline RtTable tabulate_cell(const RtReferenceElement& ref, int order) {
  const QuadratureRule rule = triangle_rule(order);
  return tabulate(ref, rule.points, rule.weights);
}

/// Tables on each local edge in both parameter directions; entry q of
/// edge[e][r] sits at local edge parameter (r ? 1 - s_q : s_q).
struct RtEdgeTables {
  SegmentRule rule;
  std::array<std::array<RtTable, 2>, 3> edge;
};

inline RtEdgeTables tabulate_edges(const RtReferenceElement& ref, int order) {
  RtEdgeTables t;
  t.rule = gauss_segment(order);
  for (int e = 0; e < 3; ++e)
    for (int r = 0; r < 2; ++r) {
      std::vector<Vec2> pts;
      for (double s : t.rule.points) pts.push_back(reference_edge_point(e, r ? 1.0 - s : s));
      t.edge[e][r] = tabulate(ref, pts, t.rule.weights);
    }
  return t;
}

inline void gather(const RTSpace& space, const Eigen::VectorXd& global, int cell, double* local) {
  const auto dofs = space.cell_dofs(cell);
  const auto signs = space.cell_signs(cell);
  for (size_t i = 0; i < dofs.size(); ++i) local[i] = signs[i] * global(dofs[i]);
}

/// Reference-space combination sum_i c_i phi_i at table point q.
inline VectorValue combine(const RtTable& t, int q, const double* local) {
  VectorValue s;
  for (int i = 0; i < t.num_dofs; ++i) {
    const VectorValue& b = t.at(q, i);
    s.value += local[i] * b.value;
    s.grad += local[i] * b.grad;
    s.div += local[i] * b.div;
  }
  return s;
}

/// Physical basis of one cell at every table point: out[q * n + i].
inline void physical_basis(const RtTable& t, const CellGeometry& g, std::vector<VectorValue>& out) {
  out.resize(t.basis.size());
  const double inv_det = 1.0 / g.det;
  const Mat2 J = g.jacobian * inv_det;
  for (size_t m = 0; m < t.basis.size(); ++m) {
    const VectorValue& b = t.basis[m];
    out[m].value = J * b.value;
    out[m].grad = J * b.grad * g.inverse_jacobian;
    out[m].div = inv_det * b.div;
  }
}

}  // namespace divfree::detail
