#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "divfree/mesh.hpp"
#include "divfree/types.hpp"

namespace divfree {

using VectorField = std::function<Vec2(const Vec2&)>;
using ScalarField = std::function<double(const Vec2&)>;

/// Value, gradient and divergence of a vector-valued function at a point.
/// grad(a, b) = d v_a / d x_b.
struct VectorValue {
  Vec2 value = Vec2::Zero();
  Mat2 grad = Mat2::Zero();
  double div = 0.0;
};

/// Orthonormal Legendre polynomial of degree j on [0,1].
double legendre01(int j, double t);

/// Polynomial in two variables stored as (coefficient, x-power, y-power) terms.
struct Poly2 {
  struct Term {
    double coef;
    int px;
    int py;
  };
  std::vector<Term> terms;

  double operator()(const Vec2& x) const;
  Vec2 gradient(const Vec2& x) const;
};

/// P_k on the reference triangle with a basis that is orthonormal in L2 of
/// the reference cell (Gram-Schmidt of monomials).
class ScalarReferenceElement {
 public:
  explicit ScalarReferenceElement(int degree);
  static const ScalarReferenceElement& get(int degree);

  int degree() const { return degree_; }
  int num_dofs() const { return static_cast<int>(basis_.size()); }
  double value(int i, const Vec2& x) const { return basis_[i](x); }
  Vec2 gradient(int i, const Vec2& x) const { return basis_[i].gradient(x); }

 private:
  int degree_;
  std::vector<Poly2> basis_;
};

/// Reference Raviart-Thomas element RT_k, k in {1, 2}.
///
/// Degrees of freedom, in local order:
///  - edge e (0..2), moment j (0..k): integral over t in [0,1] of
///    v(p(t)) . nu_e L_j(t), where nu_e is the outward normal scaled by the
///    edge length and L_j the orthonormal Legendre polynomial;
///  - interior: integral of v . (c-th unit vector) q_m over the cell, with
///    q_m the orthonormal basis of P_{k-1}; c-major ordering.
/// The basis is the dual of these functionals, obtained by inverting the
/// generalized Vandermonde matrix of the raw RT_k spanning set.
class RtReferenceElement {
 public:
  explicit RtReferenceElement(int degree);
  /// Cached instance; throws InputError for unsupported degrees.
  static const RtReferenceElement& get(int degree);

  int degree() const { return degree_; }
  int num_dofs() const { return (degree_ + 1) * (degree_ + 3); }
  int dofs_per_edge() const { return degree_ + 1; }
  int num_interior_dofs() const { return degree_ * (degree_ + 1); }

  /// Evaluates all basis functions at a reference point.
  void evaluate(const Vec2& x, std::span<VectorValue> out) const;
  std::vector<VectorValue> evaluate(const Vec2& x) const;

  /// Applies the DOF functionals to a field given in reference coordinates.
  /// Quadrature is exact for polynomial fields of degree <= k+1.
  Eigen::VectorXd apply_dofs(const VectorField& field, int extra_order = 0) const;

  /// Vandermonde matrix DOF_i(raw_j) of the raw spanning set.
  const Eigen::MatrixXd& vandermonde() const { return vandermonde_; }

 private:
  int degree_;
  std::vector<std::array<Poly2, 2>> raw_;  // raw spanning set, componentwise
  Eigen::MatrixXd vandermonde_;
  Eigen::MatrixXd coefficients_;  // basis_j = sum_r raw_r * coefficients_(r, j)
};

/// RT_k reference basis evaluated at `point`; (k+1)(k+3) entries.
std::vector<VectorValue> rt_reference_basis(int degree, const Vec2& point);

/// Contravariant Piola transform of a reference basis evaluation.
VectorValue piola_map(const CellGeometry& geometry, const VectorValue& reference);

enum class SpaceKind { RaviartThomas, BrokenPolynomial };

struct SpaceTag {
  SpaceKind kind = SpaceKind::RaviartThomas;
  int degree = 0;
  std::uint64_t mesh_id = 0;
  int size = 0;

  bool operator==(const SpaceTag&) const = default;
};

/// Coefficient vector of a discrete field in a given space.
struct CoefVec {
  SpaceTag space;
  Eigen::VectorXd values;

  bool is_finite() const { return values.allFinite(); }
};

/// Global H(div)-conforming RT_k space on a mesh.
///
/// Numbering: facet f owns DOFs f*(k+1) .. f*(k+1)+k (Legendre flux moments
/// with respect to the facet normal and parameter); interior DOFs follow,
/// k(k+1) per cell. A global edge DOF enters a cell's local basis with the
/// sign returned by cell_signs().
class RTSpace {
 public:
  RTSpace(std::shared_ptr<const Mesh> mesh, int degree);

  int degree() const { return degree_; }
  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  const RtReferenceElement& reference() const { return *ref_; }

  int num_dofs() const { return num_dofs_; }
  int num_local_dofs() const { return ref_->num_dofs(); }
  std::span<const int> cell_dofs(int cell) const {
    return {cell_dofs_.data() + cell * num_local_dofs(), static_cast<size_t>(num_local_dofs())};
  }
  std::span<const double> cell_signs(int cell) const {
    return {cell_signs_.data() + cell * num_local_dofs(), static_cast<size_t>(num_local_dofs())};
  }
  int facet_dof(int facet, int j) const { return facet * (degree_ + 1) + j; }

  const std::vector<int>& boundary_dofs() const { return boundary_dofs_; }
  bool is_boundary_dof(int dof) const { return is_boundary_[dof] != 0; }

  SpaceTag tag() const { return {SpaceKind::RaviartThomas, degree_, mesh_->id(), num_dofs_}; }
  CoefVec zeros() const { return {tag(), Eigen::VectorXd::Zero(num_dofs_)}; }
  /// Throws InputError if `v` does not belong to this space.
  void check(const CoefVec& v) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  int degree_;
  const RtReferenceElement* ref_;
  int num_dofs_ = 0;
  std::vector<int> cell_dofs_;
  std::vector<double> cell_signs_;
  std::vector<int> boundary_dofs_;
  std::vector<char> is_boundary_;
};

/// Broken P_k space. The basis on each cell is orthonormal in L2(K).
class ScalarDGSpace {
 public:
  ScalarDGSpace(std::shared_ptr<const Mesh> mesh, int degree);

  int degree() const { return degree_; }
  const Mesh& mesh() const { return *mesh_; }
  const ScalarReferenceElement& reference() const { return *ref_; }
  int num_local_dofs() const { return ref_->num_dofs(); }
  int num_dofs() const { return mesh_->num_cells() * num_local_dofs(); }
  int first_dof(int cell) const { return cell * num_local_dofs(); }

  /// Physical basis value 1/sqrt(det J) * psi_i(xhat).
  double basis_value(int cell, int i, const Vec2& ref) const;

  SpaceTag tag() const { return {SpaceKind::BrokenPolynomial, degree_, mesh_->id(), num_dofs()}; }
  CoefVec zeros() const { return {tag(), Eigen::VectorXd::Zero(num_dofs())}; }

  /// Local L2 projection pi_h^k. The default order 2k+14 matches the
  /// over-integration of rt_interpolate so the two commute to roundoff.
  CoefVec l2_project(const ScalarField& g, int quad_order = -1) const;
  double evaluate(const CoefVec& c, int cell, const Vec2& ref) const;
  /// Coefficients of the constant function 1.
  CoefVec constant(double value) const;

 private:
  std::shared_ptr<const Mesh> mesh_;
  int degree_;
  const ScalarReferenceElement* ref_;
};

/// Value and broken gradient of an RT field at a reference point of a cell.
VectorValue evaluate_field(const RTSpace& space, const CoefVec& coeffs, int cell, const Vec2& ref);

enum class BoundaryDofs {
  FromField,  ///< boundary edge moments computed from the field
  Zero,       ///< boundary edge moments set to zero
};

/// Raviart-Thomas interpolant. Edge moments use a segment rule of order
/// 2k+2+extra, interior moments a triangle rule of the same order. The
/// default over-integrates far enough that the commuting property, and so
/// div Pi u = 0 for solenoidal u, holds to roundoff for smooth data on
/// meshes with n >= 4.
CoefVec rt_interpolate(const VectorField& u, const RTSpace& space,
                       BoundaryDofs boundary = BoundaryDofs::FromField, int extra_order = 12);

}  // namespace divfree
