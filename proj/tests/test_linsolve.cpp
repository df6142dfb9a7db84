#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "divfree/forms.hpp"
#include "divfree/linsolve.hpp"
#include "divfree/manufactured.hpp"
#include "helpers.hpp"

using namespace divfree;
using divfree::testing::make_mesh;
using divfree::testing::random_div_free;
using divfree::testing::random_vector;

namespace {

struct Fixture {
  Fixture(int n, int k) : mesh(make_mesh(n)), rt(mesh, k), q(mesh, k), sys(rt, q) {}
  std::shared_ptr<const Mesh> mesh;
  RTSpace rt;
  ScalarDGSpace q;
  SaddleSystem sys;
};

double m_norm(const SparseMat& m, const Eigen::VectorXd& x) { return std::sqrt(x.dot(m * x)); }

// Dense saddle matrix over (free velocity, multiplier, mean) built from
// scratch, solved by full-pivoting LU.
Eigen::VectorXd dense_constrained_solve(const RTSpace& rt, const SparseMat& velocity_block, const SparseMat& div,
                                        const Eigen::VectorXd& mean, const Eigen::VectorXd& rhs) {
  std::vector<int> free;
  for (int d = 0; d < rt.num_dofs(); ++d)
    if (!rt.is_boundary_dof(d)) free.push_back(d);
  const int nf = static_cast<int>(free.size());
  const int nq = static_cast<int>(div.rows());
  const Eigen::MatrixXd v(velocity_block), b(div);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(nf + nq + 1, nf + nq + 1);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(nf + nq + 1);
  for (int i = 0; i < nf; ++i) {
    f(i) = rhs(free[i]);
    for (int j = 0; j < nf; ++j) k(i, j) = v(free[i], free[j]);
    for (int p = 0; p < nq; ++p) {
      k(nf + p, i) = b(p, free[i]);
      k(i, nf + p) = b(p, free[i]);
    }
  }
  for (int p = 0; p < nq; ++p) k(nf + p, nf + nq) = k(nf + nq, nf + p) = mean(p);
  const Eigen::VectorXd z = k.fullPivLu().solve(f);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(rt.num_dofs());
  for (int i = 0; i < nf; ++i) u(free[i]) = z(i);
  return u;
}

}  // namespace

TEST(Saddle, FixesDivergenceFreeFieldsOnSmallMesh) {
  Fixture s(2, 1);
  EXPECT_EQ(s.sys.solver().size(), s.sys.solver().num_free() + s.q.num_dofs() + 1);
  const CoefVec c = random_div_free(s.sys, 1);
  EXPECT_GT(c.values.norm(), 1e-3);
  const Eigen::VectorXd back = s.sys.project(s.sys.mass() * c.values);
  EXPECT_LE((back - c.values).lpNorm<Eigen::Infinity>(), 1e-10);
}

class SaddleDegree : public ::testing::TestWithParam<int> {};

TEST_P(SaddleDegree, ProjectionIdentity) {
  Fixture s(6, GetParam());
  for (int t = 0; t < 3; ++t) {
    const CoefVec v = random_div_free(s.sys, 10 + t);
    const Eigen::VectorXd back = s.sys.project(s.sys.mass() * v.values);
    EXPECT_LE((back - v.values).lpNorm<Eigen::Infinity>(), 1e-10 * std::max(1.0, v.values.lpNorm<Eigen::Infinity>()));
  }
}

TEST_P(SaddleDegree, Idempotence) {
  Fixture s(6, GetParam());
  const Eigen::VectorXd r = random_vector(s.rt.num_dofs(), 5);
  const Eigen::VectorXd once = s.sys.project(r);
  const Eigen::VectorXd twice = s.sys.project(s.sys.mass() * once);
  EXPECT_LE((twice - once).lpNorm<Eigen::Infinity>(), 1e-10 * std::max(1.0, once.lpNorm<Eigen::Infinity>()));
}

TEST_P(SaddleDegree, ResultIsDivergenceFreeWithZeroBoundaryFlux) {
  const int k = GetParam();
  Fixture s(8, k);
  for (int t = 0; t < 3; ++t) {
    const Eigen::VectorXd r = s.sys.mass() * random_vector(s.rt.num_dofs(), 20 + t);
    double residual = 1.0;
    const std::optional<CoefVec> u = project_div_free(s.sys, r, &residual);
    ASSERT_TRUE(u.has_value());
    EXPECT_LE(residual, 1e-11);
    EXPECT_LE((s.sys.div() * u->values).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LE(div_norm(s.rt, *u), 1e-11);
    for (int d : s.rt.boundary_dofs()) EXPECT_EQ(u->values(d), 0.0);
  }
}

// (u, v) = rhs(v) on V^div.
TEST_P(SaddleDegree, GalerkinOrthogonality) {
  Fixture s(5, GetParam());
  const Eigen::VectorXd r = random_vector(s.rt.num_dofs(), 31);
  const Eigen::VectorXd u = s.sys.project(r);
  for (int t = 0; t < 4; ++t) {
    const CoefVec v = random_div_free(s.sys, 40 + t);
    EXPECT_NEAR(v.values.dot(s.sys.mass() * u), v.values.dot(r), 1e-10 * std::max(1.0, std::abs(v.values.dot(r))));
  }
}

TEST_P(SaddleDegree, ContractionVersusUnconstrainedMassSolve) {
  Fixture s(6, GetParam());
  std::vector<int> free;
  for (int d = 0; d < s.rt.num_dofs(); ++d)
    if (!s.rt.is_boundary_dof(d)) free.push_back(d);
  const Eigen::MatrixXd m(s.sys.mass());
  Eigen::MatrixXd mff(free.size(), free.size());
  for (size_t i = 0; i < free.size(); ++i)
    for (size_t j = 0; j < free.size(); ++j) mff(i, j) = m(free[i], free[j]);
  for (int t = 0; t < 3; ++t) {
    const Eigen::VectorXd r = random_vector(s.rt.num_dofs(), 60 + t);
    Eigen::VectorXd rf(free.size());
    for (size_t i = 0; i < free.size(); ++i) rf(i) = r(free[i]);
    const Eigen::VectorXd x = mff.ldlt().solve(rf);
    const double unconstrained = std::sqrt(x.dot(mff * x));
    const double projected = m_norm(s.sys.mass(), s.sys.project(r));
    EXPECT_LE(projected, unconstrained * (1.0 + 1e-10));
  }
}

TEST_P(SaddleDegree, HybridMatchesMonolithicSolve) {
  Fixture s(6, GetParam());
  for (int t = 0; t < 3; ++t) {
    const Eigen::VectorXd r = random_vector(s.rt.num_dofs(), 70 + t);
    double res = 1.0;
    const Eigen::VectorXd mono = s.sys.solver().solve(r, &res);
    EXPECT_LE(res, 1e-12);
    const Eigen::VectorXd hyb = s.sys.project(r);
    EXPECT_LE((mono - hyb).lpNorm<Eigen::Infinity>(), 1e-10 * std::max(1.0, mono.lpNorm<Eigen::Infinity>()));
  }
}

TEST_P(SaddleDegree, GradientLoadProjectsToZero) {
  const int k = GetParam();
  Fixture s(8, k);
  const VectorField grad_phi = [](const Vec2& x) -> Vec2 {
    return {std::exp(x.x()) * std::sin(2.0 * x.y()), 2.0 * std::exp(x.x()) * std::cos(2.0 * x.y())};
  };
  const std::optional<CoefVec> u = project_div_free(s.sys, assemble_load(s.rt, grad_phi));
  ASSERT_TRUE(u.has_value());
  EXPECT_LE(u->values.lpNorm<Eigen::Infinity>(), 1e-10);
}

INSTANTIATE_TEST_SUITE_P(Degrees, SaddleDegree, ::testing::Values(1, 2));

TEST(Saddle, BitwiseDeterministic) {
  Fixture s(8, 2);
  const Eigen::VectorXd r = random_vector(s.rt.num_dofs(), 9);
  const Eigen::VectorXd a = s.sys.project(r);
  const Eigen::VectorXd b = s.sys.project(r);
  for (int i = 0; i < a.size(); ++i) ASSERT_EQ(a(i), b(i));
  Fixture t(8, 2);
  const Eigen::VectorXd c = t.sys.project(r);
  for (int i = 0; i < a.size(); ++i) ASSERT_EQ(a(i), c(i));
}

TEST(Saddle, NonFiniteInputSignalsBlowUp) {
  Fixture s(3, 1);
  Eigen::VectorXd r = random_vector(s.rt.num_dofs(), 2);
  r(4) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(project_div_free(s.sys, r).has_value());
  r(4) = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(project_div_free(s.sys, r).has_value());
}

TEST(Saddle, RejectsMismatchedBlocks) {
  Fixture s(3, 1);
  const SparseMat small(4, 4);
  EXPECT_THROW(ConstrainedSolver(s.rt, small, s.sys.div(), s.sys.mean_row()), InputError);
  const ScalarDGSpace q2(s.mesh, 2);
  EXPECT_THROW(SaddleSystem(s.rt, q2), InputError);
}

TEST(CrankNicolson, PureMassStepIsIdentity) {
  Fixture s(6, 1);
  const double tau = 0.05;
  const CoefVec u = random_div_free(s.sys, 3);
  const SparseMat block = s.sys.mass() / tau;
  const CNSystem cn(s.sys, block);
  const CoefVec next = cn_solve(cn, s.rt, block * u.values);
  EXPECT_LE((next.values - u.values).lpNorm<Eigen::Infinity>(), 1e-10);
}

TEST(CrankNicolson, MatchesDenseSolve) {
  for (int k : {1, 2}) {
    Fixture s(2, k);
    const double tau = 0.1, nu = 1e-2;
    const CoefVec a = random_div_free(s.sys, 4);
    const CoefVec u = random_div_free(s.sys, 5);
    const SparseMat block = SparseMat(s.sys.mass() / tau) + SparseMat(0.5 * nu * assemble_sip(s.rt)) +
                            SparseMat(0.5 * convection_matrix(s.rt, a));
    const Eigen::VectorXd rhs = (s.sys.mass() / tau) * u.values - 0.5 * apply_convection(s.rt, a, u) +
                                random_vector(s.rt.num_dofs(), 6);
    const CNSystem cn(s.sys, block);
    const CoefVec next = cn_solve(cn, s.rt, rhs);
    const Eigen::VectorXd oracle = dense_constrained_solve(s.rt, block, s.sys.div(), s.sys.mean_row(), rhs);
    EXPECT_LE((next.values - oracle).lpNorm<Eigen::Infinity>(), 1e-9 * std::max(1.0, oracle.lpNorm<Eigen::Infinity>()))
        << "k=" << k;
    EXPECT_LE(div_norm(s.rt, next), 1e-9);
    EXPECT_LE((s.sys.div() * next.values).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(CrankNicolson, SolverBackendIsReported) {
  const std::string b = ConstrainedSolver::backend();
  EXPECT_TRUE(b == "umfpack" || b == "eigen-sparselu");
}
