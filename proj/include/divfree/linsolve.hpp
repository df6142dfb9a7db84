#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "divfree/fe_space.hpp"
#include "divfree/forms.hpp"

namespace divfree {

/// Factorized constrained system
///
///     [ V_ff  B_f^T  0 ] [u]   [r_f]
///     [ B_f   0      m ] [p] = [ 0 ]
///     [ 0     m^T    0 ] [l]   [ 0 ]
///
/// where V is a velocity operator on the RT space restricted to the free
/// (non-boundary) DOFs, B the divergence matrix and m the multiplier mean
/// functional. The solution u is divergence-free with zero boundary flux.
class ConstrainedSolver {
 public:
  ConstrainedSolver(const RTSpace& space, const SparseMat& velocity_block, const SparseMat& div,
                    const Eigen::VectorXd& mean_row);
  ~ConstrainedSolver();
  ConstrainedSolver(ConstrainedSolver&&) noexcept;
  ConstrainedSolver& operator=(ConstrainedSolver&&) noexcept;

  /// Solves for rhs given over all RT DOFs (boundary entries ignored).
  /// Returns the velocity on all RT DOFs (boundary entries zero) and writes
  /// the relative residual ||K z - b||_inf / ||b||_inf.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, double* relative_residual = nullptr) const;
  /// Solves with a right-hand side on the full saddle system (free velocity,
  /// multiplier, mean); used by tests.
  Eigen::VectorXd solve_full(const Eigen::VectorXd& rhs) const;

  int size() const { return size_; }
  int num_free() const { return num_free_; }
  const std::vector<int>& free_index() const { return free_index_; }
  /// The assembled saddle matrix (free velocity, multiplier, mean ordering).
  const SparseMat& matrix() const { return matrix_; }
  static std::string backend();

 private:
  struct Factor;
  std::unique_ptr<Factor> factor_;
  SparseMat matrix_;
  std::vector<int> free_index_;
  std::vector<int> free_dofs_;
  int num_free_ = 0;
  int size_ = 0;
};

/// Divergence-free L2 projection onto V^div, built once per (mesh, degree)
/// and reused for every solve.
///
/// Solves use the hybridized form of the mass/divergence saddle system:
/// RT continuity is relaxed to per-cell blocks, normal continuity is imposed
/// by facet multipliers, and the cell unknowns are eliminated locally. What
/// remains is a symmetric positive definite system on the facet DOFs (one
/// multiplier pinned to remove the constant mode), factorized by sparse
/// Cholesky. The velocity is identical to the monolithic saddle solution.
class SaddleSystem {
 public:
  SaddleSystem(const RTSpace& space, const ScalarDGSpace& q_space);
  ~SaddleSystem();
  SaddleSystem(const SaddleSystem&) = delete;
  SaddleSystem& operator=(const SaddleSystem&) = delete;

  const RTSpace& space() const { return *space_; }
  const ScalarDGSpace& multiplier() const { return *q_space_; }
  const SparseMat& mass() const { return mass_; }
  const SparseMat& div() const { return div_; }
  const Eigen::VectorXd& mean_row() const { return mean_; }

  /// Velocity on all RT DOFs (boundary entries zero) with (u, v) = rhs(v)
  /// for all v in V^div. Writes the relative residual of the monolithic
  /// equations, max(|M u + B^T p - r|_free, |B u|) / |r|, all in max norm.
  Eigen::VectorXd project(const Eigen::VectorXd& rhs, double* relative_residual = nullptr) const;

  /// The monolithic saddle solver with the mean constraint, factorized on
  /// first use. Only needed as a cross-check; large meshes factorize slowly.
  const ConstrainedSolver& solver() const;

  struct Hybrid;  // local inverses and the factorized facet system

 private:
  const RTSpace* space_;
  const ScalarDGSpace* q_space_;
  SparseMat mass_;
  SparseMat div_;
  Eigen::VectorXd mean_;
  std::unique_ptr<Hybrid> hybrid_;
  mutable std::once_flag monolithic_once_;
  mutable std::unique_ptr<ConstrainedSolver> monolithic_;
};

/// Builds the projection system; the multiplier space must have the
/// velocity degree.
SaddleSystem build_saddle(const RTSpace& space, const ScalarDGSpace& q_space);

/// Returns u in V^div with (u, v) = rhs(v) for all v in V^div. rhs is a
/// functional over all RT DOFs; boundary entries are dropped. Non-finite
/// input yields std::nullopt (the caller decides how to report blow-up).
std::optional<CoefVec> project_div_free(const SaddleSystem& sys, const Eigen::VectorXd& rhs,
                                        double* relative_residual = nullptr);

/// Linear step operator of the semi-implicit Crank-Nicolson comparator
/// (or its semi-implicit Euler start), constrained to V^div. Rebuilt each
/// step since it depends on the advecting field.
class CNSystem {
 public:
  /// velocity_block is the full-space operator, e.g. M/tau + nu/2 A + C(a)/2.
  CNSystem(const SaddleSystem& base, const SparseMat& velocity_block);

  const ConstrainedSolver& solver() const { return solver_; }

 private:
  const SaddleSystem* base_;
  ConstrainedSolver solver_;
};

/// Solves the CN step; throws SolverError if the system is singular or the
/// residual exceeds 1e-9.
CoefVec cn_solve(const CNSystem& sys, const RTSpace& space, const Eigen::VectorXd& rhs);

}  // namespace divfree
