#include "divfree/linsolve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SparseCholesky>

#ifdef DIVFREE_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#else
#include <Eigen/OrderingMethods>
#include <Eigen/SparseLU>
#endif

namespace divfree {

struct ConstrainedSolver::Factor {
#ifdef DIVFREE_HAVE_UMFPACK
  Eigen::UmfPackLU<SparseMat> lu;
#else
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> lu;
#endif
};

std::string ConstrainedSolver::backend() {
#ifdef DIVFREE_HAVE_UMFPACK
  return "umfpack";
#else
  return "eigen-sparselu";
#endif
}

ConstrainedSolver::~ConstrainedSolver() = default;
ConstrainedSolver::ConstrainedSolver(ConstrainedSolver&&) noexcept = default;
ConstrainedSolver& ConstrainedSolver::operator=(ConstrainedSolver&&) noexcept = default;

ConstrainedSolver::ConstrainedSolver(const RTSpace& space, const SparseMat& velocity_block, const SparseMat& div,
                                     const Eigen::VectorXd& mean_row)
    : factor_(std::make_unique<Factor>()) {
  const int nv = space.num_dofs();
  if (velocity_block.rows() != nv || velocity_block.cols() != nv || div.cols() != nv ||
      mean_row.size() != div.rows()) {
    throw InputError("ConstrainedSolver: block dimensions do not match the RT space");
  }
  free_index_.assign(nv, -1);
  for (int d = 0; d < nv; ++d) {
    if (!space.is_boundary_dof(d)) {
      free_index_[d] = num_free_++;
      free_dofs_.push_back(d);
    }
  }
  const int nq = static_cast<int>(div.rows());
  size_ = num_free_ + nq + 1;
  const int mean_at = num_free_ + nq;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(velocity_block.nonZeros() + 2 * div.nonZeros() + 2 * nq);
  for (int col = 0; col < velocity_block.outerSize(); ++col) {
    const int fc = free_index_[col];
    if (fc < 0) continue;
    for (SparseMat::InnerIterator it(velocity_block, col); it; ++it) {
      const int fr = free_index_[it.row()];
      if (fr >= 0) trip.emplace_back(fr, fc, it.value());
    }
  }
  for (int col = 0; col < div.outerSize(); ++col) {
    const int fc = free_index_[col];
    if (fc < 0) continue;
    for (SparseMat::InnerIterator it(div, col); it; ++it) {
      trip.emplace_back(num_free_ + static_cast<int>(it.row()), fc, it.value());
      trip.emplace_back(fc, num_free_ + static_cast<int>(it.row()), it.value());
    }
  }
  for (int i = 0; i < nq; ++i) {
    if (mean_row(i) == 0.0) continue;
    trip.emplace_back(num_free_ + i, mean_at, mean_row(i));
    trip.emplace_back(mean_at, num_free_ + i, mean_row(i));
  }
  matrix_.resize(size_, size_);
  matrix_.setFromTriplets(trip.begin(), trip.end());
  matrix_.makeCompressed();

#ifdef DIVFREE_HAVE_UMFPACK
  // Saddle systems have a structurally symmetric pattern; the symmetric
  // ordering roughly halves the factorization time and fill.
  factor_->lu.umfpackControl()(UMFPACK_STRATEGY) = UMFPACK_STRATEGY_SYMMETRIC;
#endif
  factor_->lu.compute(matrix_);
  if (factor_->lu.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "saddle factorization failed (" << backend() << ", size " << size_ << ")";
#ifndef DIVFREE_HAVE_UMFPACK
    msg << ": " << factor_->lu.lastErrorMessage();
#endif
    throw SolverError(msg.str());
  }
}

Eigen::VectorXd ConstrainedSolver::solve_full(const Eigen::VectorXd& rhs) const {
  Eigen::VectorXd z = factor_->lu.solve(rhs);
  // Two rounds of iterative refinement keep the residual at roundoff level
  // even when the pivoting left some growth.
  for (int it = 0; it < 2; ++it) {
    const Eigen::VectorXd r = rhs - matrix_ * z;
    const double scale = rhs.lpNorm<Eigen::Infinity>();
    if (r.lpNorm<Eigen::Infinity>() <= 1e-14 * (scale > 0.0 ? scale : 1.0)) break;
    z += factor_->lu.solve(r);
  }
  return z;
}

Eigen::VectorXd ConstrainedSolver::solve(const Eigen::VectorXd& rhs, double* relative_residual) const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(size_);
  for (int i = 0; i < num_free_; ++i) b(i) = rhs(free_dofs_[i]);
  const Eigen::VectorXd z = solve_full(b);
  if (relative_residual) {
    const double bn = b.lpNorm<Eigen::Infinity>();
    const double rn = (matrix_ * z - b).lpNorm<Eigen::Infinity>();
    *relative_residual = bn > 0.0 ? rn / bn : rn;
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(rhs.size());
  for (int i = 0; i < num_free_; ++i) u(free_dofs_[i]) = z(i);
  return u;
}

namespace {

Eigen::VectorXd mean_functional(const ScalarDGSpace& q) {
  return q.l2_project([](const Vec2&) { return 1.0; }, 2 * q.degree()).values;
}

}  // namespace

struct SaddleSystem::Hybrid {
  int num_local = 0;      // velocity + multiplier unknowns of one cell
  int num_velocity = 0;   // RT DOFs of one cell
  int num_edge = 0;       // edge DOFs of one cell
  std::vector<Eigen::MatrixXd> inverse;  // per cell [[M, B^T], [B, 0]]^{-1}
  std::vector<double> coupling;          // per cell and edge DOF: +-1 in the continuity row
  std::vector<int> lambda_index;         // edge DOF -> facet unknown, -1 when pinned
  Eigen::SimplicialLLT<SparseMat> facet_solver;
};

SaddleSystem::SaddleSystem(const RTSpace& space, const ScalarDGSpace& q_space)
    : space_(&space),
      q_space_(&q_space),
      mass_(assemble_mass(space)),
      div_(assemble_div(space, q_space)),
      mean_(mean_functional(q_space)),
      hybrid_(std::make_unique<Hybrid>()) {
  const Mesh& mesh = space.mesh();
  Hybrid& h = *hybrid_;
  const int k = space.degree();
  h.num_velocity = space.num_local_dofs();
  h.num_edge = 3 * (k + 1);
  h.num_local = h.num_velocity + q_space.num_local_dofs();
  const int num_edge_dofs = mesh.num_facets() * (k + 1);

  // The constant multiplier mode makes the facet system singular; the first
  // edge DOF carries a nonzero component of it and is pinned.
  h.lambda_index.resize(num_edge_dofs);
  for (int d = 0; d < num_edge_dofs; ++d) h.lambda_index[d] = d - 1;

  h.inverse.resize(mesh.num_cells());
  h.coupling.resize(static_cast<size_t>(mesh.num_cells()) * h.num_edge);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.num_cells()) * h.num_edge * h.num_edge);
  Eigen::MatrixXd local = Eigen::MatrixXd::Zero(h.num_local, h.num_local);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::MatrixXd m = cell_mass_matrix(space, c);
    const Eigen::MatrixXd b = cell_div_matrix(space, q_space, c);
    local.setZero();
    local.topLeftCorner(h.num_velocity, h.num_velocity) = m;
    local.bottomLeftCorner(b.rows(), h.num_velocity) = b;
    local.topRightCorner(h.num_velocity, b.rows()) = b.transpose();
    h.inverse[c] = local.fullPivLu().inverse();

    const auto dofs = space.cell_dofs(c);
    const auto signs = space.cell_signs(c);
    double* cpl = h.coupling.data() + static_cast<size_t>(c) * h.num_edge;
    for (int e = 0; e < 3; ++e) {
      const Facet& f = mesh.facets()[mesh.cell_facets(c)[e].facet];
      const double side = f.plus_cell == c ? 1.0 : -1.0;
      for (int j = 0; j <= k; ++j) cpl[e * (k + 1) + j] = side * signs[e * (k + 1) + j];
    }
    for (int a = 0; a < h.num_edge; ++a) {
      const int ra = h.lambda_index[dofs[a]];
      if (ra < 0) continue;
      for (int b2 = 0; b2 < h.num_edge; ++b2) {
        const int rb = h.lambda_index[dofs[b2]];
        if (rb >= 0) trip.emplace_back(ra, rb, cpl[a] * cpl[b2] * h.inverse[c](a, b2));
      }
    }
  }
  SparseMat schur(num_edge_dofs - 1, num_edge_dofs - 1);
  schur.setFromTriplets(trip.begin(), trip.end());
  h.facet_solver.compute(schur);
  if (h.facet_solver.info() != Eigen::Success) {
    throw SolverError("divergence-free projection: facet system is not positive definite (size " +
                      std::to_string(schur.rows()) + ")");
  }
}

SaddleSystem::~SaddleSystem() = default;

namespace {

// One hybridized solve of [[M, B^T], [B, 0]] [u; p] = [r; g] restricted to
// zero boundary flux. r is a functional on the conforming RT DOFs, g lives
// on the multiplier DOFs.
void hybrid_solve(const RTSpace& space, const ScalarDGSpace& q_space, const SaddleSystem::Hybrid& h,
                  const Eigen::VectorXd& r, const Eigen::VectorXd& g, Eigen::VectorXd& u, Eigen::VectorXd& p) {
  const Mesh& mesh = space.mesh();
  const int nc = mesh.num_cells();
  const int nq = q_space.num_local_dofs();
  std::vector<Eigen::VectorXd> y(nc);
  Eigen::VectorXd facet_rhs = Eigen::VectorXd::Zero(h.lambda_index.size() - 1);
  Eigen::VectorXd f(h.num_local);
  for (int c = 0; c < nc; ++c) {
    const auto dofs = space.cell_dofs(c);
    const auto signs = space.cell_signs(c);
    const double* cpl = h.coupling.data() + static_cast<size_t>(c) * h.num_edge;
    // Edge entries of the conforming functional go to the plus cell only.
    for (int i = 0; i < h.num_velocity; ++i) f(i) = (i >= h.num_edge || cpl[i] * signs[i] > 0.0) ? signs[i] * r(dofs[i]) : 0.0;
    for (int i = 0; i < nq; ++i) f(h.num_velocity + i) = g(q_space.first_dof(c) + i);
    y[c].noalias() = h.inverse[c] * f;
    for (int a = 0; a < h.num_edge; ++a) {
      const int ra = h.lambda_index[dofs[a]];
      if (ra >= 0) facet_rhs(ra) += cpl[a] * y[c](a);
    }
  }
  const Eigen::VectorXd lambda = h.facet_solver.solve(facet_rhs);
  u = Eigen::VectorXd::Zero(space.num_dofs());
  p.resize(q_space.num_dofs());
  Eigen::VectorXd t(h.num_edge);
  for (int c = 0; c < nc; ++c) {
    const auto dofs = space.cell_dofs(c);
    const auto signs = space.cell_signs(c);
    const double* cpl = h.coupling.data() + static_cast<size_t>(c) * h.num_edge;
    for (int a = 0; a < h.num_edge; ++a) {
      const int ra = h.lambda_index[dofs[a]];
      t(a) = ra >= 0 ? cpl[a] * lambda(ra) : 0.0;
    }
    const Eigen::VectorXd x = y[c] - h.inverse[c].leftCols(h.num_edge) * t;
    for (int i = 0; i < h.num_velocity; ++i) {
      if (i < h.num_edge && cpl[i] * signs[i] < 0.0) continue;
      u(dofs[i]) = signs[i] * x(i);
    }
    for (int i = 0; i < nq; ++i) p(q_space.first_dof(c) + i) = x(h.num_velocity + i);
  }
  for (int d : space.boundary_dofs()) u(d) = 0.0;
}

}  // namespace

Eigen::VectorXd SaddleSystem::project(const Eigen::VectorXd& rhs, double* relative_residual) const {
  if (rhs.size() != space_->num_dofs()) throw InputError("SaddleSystem::project: rhs length does not match the RT space");
  Eigen::VectorXd u, p, du, dp;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(q_space_->num_dofs());
  hybrid_solve(*space_, *q_space_, *hybrid_, rhs, g, u, p);
  const double scale = std::max(rhs.lpNorm<Eigen::Infinity>(), 1e-300);
  double res = 0.0;
  for (int it = 0;; ++it) {
    Eigen::VectorXd ru = rhs - mass_ * u - div_.transpose() * p;
    for (int d : space_->boundary_dofs()) ru(d) = 0.0;
    const Eigen::VectorXd rp = -(div_ * u);
    res = std::max(ru.lpNorm<Eigen::Infinity>(), rp.lpNorm<Eigen::Infinity>()) / scale;
    if (it == 2 || res <= 1e-11 || !std::isfinite(res)) break;
    hybrid_solve(*space_, *q_space_, *hybrid_, ru, rp, du, dp);
    u += du;
    p += dp;
  }
  if (relative_residual) *relative_residual = res;
  return u;
}

const ConstrainedSolver& SaddleSystem::solver() const {
  std::call_once(monolithic_once_,
                 [this] { monolithic_ = std::make_unique<ConstrainedSolver>(*space_, mass_, div_, mean_); });
  return *monolithic_;
}

SaddleSystem build_saddle(const RTSpace& space, const ScalarDGSpace& q_space) { return SaddleSystem(space, q_space); }

std::optional<CoefVec> project_div_free(const SaddleSystem& sys, const Eigen::VectorXd& rhs, double* relative_residual) {
  if (rhs.size() != sys.space().num_dofs()) throw InputError("project_div_free: rhs length does not match the RT space");
  if (!rhs.allFinite()) return std::nullopt;
  CoefVec u{sys.space().tag(), sys.project(rhs, relative_residual)};
  if (!u.is_finite()) return std::nullopt;
  return u;
}

CNSystem::CNSystem(const SaddleSystem& base, const SparseMat& velocity_block)
    : base_(&base), solver_(base.space(), velocity_block, base.div(), base.mean_row()) {}

CoefVec cn_solve(const CNSystem& sys, const RTSpace& space, const Eigen::VectorXd& rhs) {
  if (!rhs.allFinite()) throw SolverError("cn_solve: non-finite right-hand side");
  double res = 0.0;
  CoefVec u{space.tag(), sys.solver().solve(rhs, &res)};
  if (!u.is_finite() || !(res <= 1e-9)) {
    std::ostringstream msg;
    msg << "cn_solve: CN system solve failed (relative residual " << res << ")";
    throw SolverError(msg.str());
  }
  return u;
}

}  // namespace divfree
