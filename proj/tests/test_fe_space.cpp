#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "divfree/fe_space.hpp"
#include "divfree/manufactured.hpp"
#include "divfree/quadrature.hpp"
#include "helpers.hpp"

using namespace divfree;
using divfree::testing::make_mesh;
using divfree::testing::random_vector;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec2> random_reference_points(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> pts;
  while (static_cast<int>(pts.size()) < count) {
    const Vec2 p(u(rng), u(rng));
    if (p.x() + p.y() < 1.0) pts.push_back(p);
  }
  return pts;
}

CellGeometry affine(const Vec2& origin, const Mat2& j) {
  CellGeometry g;
  g.origin = origin;
  g.jacobian = j;
  g.inverse_jacobian = j.inverse();
  g.det = j.determinant();
  return g;
}

// Physical field of reference basis function i pushed forward by g.
Vec2 pushed_value(int k, int i, const CellGeometry& g, const Vec2& x) {
  return piola_map(g, rt_reference_basis(k, g.pullback(x))[i]).value;
}

std::shared_ptr<const Mesh> one_cell_mesh() {
  return std::make_shared<const Mesh>(
      std::vector<Vec2>{{0.1, 0.2}, {0.9, 0.35}, {0.3, 0.8}}, std::vector<std::array<int, 3>>{{0, 1, 2}});
}

}  // namespace

class FeSpaceDegree : public ::testing::TestWithParam<int> {};

TEST_P(FeSpaceDegree, BasisCount) {
  const int k = GetParam();
  EXPECT_EQ(rt_reference_basis(k, Vec2(0.2, 0.3)).size(), static_cast<size_t>((k + 1) * (k + 3)));
  EXPECT_EQ(RtReferenceElement::get(k).num_dofs(), k == 1 ? 8 : 15);
}

TEST_P(FeSpaceDegree, DofDuality) {
  const int k = GetParam();
  const RtReferenceElement& ref = RtReferenceElement::get(k);
  const int nd = ref.num_dofs();
  Eigen::MatrixXd d(nd, nd);
  for (int j = 0; j < nd; ++j) {
    d.col(j) = ref.apply_dofs([&](const Vec2& x) { return ref.evaluate(x)[j].value; });
  }
  EXPECT_LE((d - Eigen::MatrixXd::Identity(nd, nd)).cwiseAbs().maxCoeff(), 1e-10);
}

// The divergence of every basis function is fitted exactly by P_k and its
// leading part is genuinely of degree k for some basis function.
TEST_P(FeSpaceDegree, DivergenceInPk) {
  const int k = GetParam();
  const auto pts = random_reference_points(40, 3);
  auto fit_residual = [&](int degree, int i) {
    std::vector<std::pair<int, int>> powers;
    for (int a = 0; a <= degree; ++a)
      for (int b = 0; a + b <= degree; ++b) powers.emplace_back(a, b);
    Eigen::MatrixXd v(pts.size(), powers.size());
    Eigen::VectorXd y(pts.size());
    for (size_t p = 0; p < pts.size(); ++p) {
      for (size_t m = 0; m < powers.size(); ++m)
        v(p, m) = std::pow(pts[p].x(), powers[m].first) * std::pow(pts[p].y(), powers[m].second);
      y(p) = rt_reference_basis(k, pts[p])[i].div;
    }
    const Eigen::VectorXd c = v.colPivHouseholderQr().solve(y);
    return (v * c - y).cwiseAbs().maxCoeff();
  };
  double lower = 0.0;
  for (int i = 0; i < (k + 1) * (k + 3); ++i) {
    EXPECT_LE(fit_residual(k, i), 1e-9) << "basis " << i;
    lower = std::max(lower, fit_residual(k - 1, i));
  }
  EXPECT_GT(lower, 1e-3);
}

TEST_P(FeSpaceDegree, DivergenceMatchesFiniteDifferences) {
  const int k = GetParam();
  const double e = 1e-6;
  for (const Vec2& x : random_reference_points(5, 8)) {
    const auto b = rt_reference_basis(k, x);
    for (size_t i = 0; i < b.size(); ++i) {
      const Vec2 dx = (rt_reference_basis(k, x + Vec2(e, 0))[i].value - rt_reference_basis(k, x - Vec2(e, 0))[i].value) / (2 * e);
      const Vec2 dy = (rt_reference_basis(k, x + Vec2(0, e))[i].value - rt_reference_basis(k, x - Vec2(0, e))[i].value) / (2 * e);
      EXPECT_NEAR(b[i].div, dx.x() + dy.y(), 1e-6 * std::max(1.0, std::abs(b[i].div)));
      EXPECT_NEAR(b[i].grad(0, 0), dx.x(), 1e-6 * std::max(1.0, std::abs(dx.x())));
      EXPECT_NEAR(b[i].grad(1, 1), dy.y(), 1e-6 * std::max(1.0, std::abs(dy.y())));
      EXPECT_NEAR(b[i].grad(0, 1), dy.x(), 1e-6 * std::max(1.0, std::abs(dy.x())));
      EXPECT_NEAR(b[i].grad(1, 0), dx.y(), 1e-6 * std::max(1.0, std::abs(dx.y())));
    }
  }
}

TEST_P(FeSpaceDegree, PiolaIdentityAndTranslation) {
  const int k = GetParam();
  const Vec2 x(0.3, 0.25);
  const auto b = rt_reference_basis(k, x);
  const CellGeometry id = affine(Vec2::Zero(), Mat2::Identity());
  const CellGeometry shifted = affine(Vec2(2.5, -1.0), Mat2::Identity());
  for (const auto& r : b) {
    for (const CellGeometry& g : {id, shifted}) {
      const VectorValue p = piola_map(g, r);
      EXPECT_LE((p.value - r.value).norm(), 1e-15);
      EXPECT_LE((p.grad - r.grad).norm(), 1e-15);
      EXPECT_NEAR(p.div, r.div, 1e-15);
    }
  }
}

TEST_P(FeSpaceDegree, PiolaScalingAgainstFiniteDifferences) {
  const int k = GetParam();
  const double e = 1e-6;
  for (double s : {0.5, 0.125}) {
    const CellGeometry g = affine(Vec2(0.1, 0.2), s * Mat2::Identity());
    const Vec2 ref(0.2, 0.3);
    const Vec2 x = g.map(ref);
    const auto b = rt_reference_basis(k, ref);
    for (int i = 0; i < static_cast<int>(b.size()); ++i) {
      const VectorValue p = piola_map(g, b[i]);
      EXPECT_LE((p.value - b[i].value / s).norm(), 1e-13 * std::max(1.0, p.value.norm()));
      EXPECT_NEAR(p.div, b[i].div / (s * s), 1e-12 * std::max(1.0, std::abs(p.div)));
      const double fd = (pushed_value(k, i, g, x + Vec2(e, 0)).x() - pushed_value(k, i, g, x - Vec2(e, 0)).x() +
                         pushed_value(k, i, g, x + Vec2(0, e)).y() - pushed_value(k, i, g, x - Vec2(0, e)).y()) /
                        (2 * e);
      EXPECT_NEAR(p.div, fd, 1e-5 * std::max(1.0, std::abs(p.div)));
    }
  }
}

TEST_P(FeSpaceDegree, PiolaGeneralAffineAgainstFiniteDifferences) {
  const int k = GetParam();
  Mat2 j;
  j << 0.3, 0.1, -0.05, 0.25;
  const CellGeometry g = affine(Vec2(0.4, 0.1), j);
  const Vec2 ref(0.25, 0.4);
  const Vec2 x = g.map(ref);
  const double e = 1e-7;
  const auto b = rt_reference_basis(k, ref);
  for (int i = 0; i < static_cast<int>(b.size()); ++i) {
    const VectorValue p = piola_map(g, b[i]);
    const Vec2 dx = (pushed_value(k, i, g, x + Vec2(e, 0)) - pushed_value(k, i, g, x - Vec2(e, 0))) / (2 * e);
    const Vec2 dy = (pushed_value(k, i, g, x + Vec2(0, e)) - pushed_value(k, i, g, x - Vec2(0, e))) / (2 * e);
    Mat2 fd;
    fd.col(0) = dx;
    fd.col(1) = dy;
    const double scale = std::max(1.0, fd.norm());
    EXPECT_LE((p.grad - fd).norm(), 1e-6 * scale) << i;
    EXPECT_NEAR(p.div, fd.trace(), 1e-6 * scale);
  }
}

TEST_P(FeSpaceDegree, InterpolationConvergence) {
  const int k = GetParam();
  const ExactProblem tg = taylor_green();
  std::vector<double> err;
  for (int n : {8, 16, 32}) {
    const RTSpace space(make_mesh(n), k);
    const CoefVec c = rt_interpolate([&](const Vec2& x) { return tg.velocity(x, 0.0); }, space);
    err.push_back(l2_error(space, c, tg, 0.0));
  }
  for (int i = 0; i < 2; ++i) {
    const double r = std::log2(err[i] / err[i + 1]);
    EXPECT_GE(r, k + 0.8) << "pair " << i;
    EXPECT_LE(r, k + 1.2) << "pair " << i;
  }
}

TEST_P(FeSpaceDegree, CommutingProperty) {
  const int k = GetParam();
  const RTSpace space(make_mesh(8), k);
  const ScalarDGSpace q(space.mesh_ptr(), k);
  const VectorField u = [](const Vec2& x) -> Vec2 {
    return {std::sin(kPi * x.x()) * std::cos(1.3 * x.y()), x.x() * x.x() * std::exp(x.y())};
  };
  const ScalarField div_u = [](const Vec2& x) {
    return kPi * std::cos(kPi * x.x()) * std::cos(1.3 * x.y()) + x.x() * x.x() * std::exp(x.y());
  };
  const CoefVec c = rt_interpolate(u, space);
  const CoefVec pd = q.l2_project(div_u);
  const auto pts = random_reference_points(20, 5);
  double worst = 0.0;
  for (int cell = 0; cell < space.mesh().num_cells(); ++cell) {
    for (const Vec2& p : pts) {
      worst = std::max(worst, std::abs(evaluate_field(space, c, cell, p).div - q.evaluate(pd, cell, p)));
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST_P(FeSpaceDegree, InterpolantOfVortexIsDivergenceFree) {
  const int k = GetParam();
  const ExactProblem tg = taylor_green();
  const RTSpace space(make_mesh(8), k);
  const CoefVec c = rt_interpolate([&](const Vec2& x) { return tg.velocity(x, 0.0); }, space);
  EXPECT_LE(div_norm(space, c), 1e-11);
}

TEST_P(FeSpaceDegree, NormalContinuityOfRandomField) {
  const int k = GetParam();
  const RTSpace space(make_mesh(6), k);
  const CoefVec c{space.tag(), random_vector(space.num_dofs(), 17)};
  const SegmentRule rule = gauss_segment(9);
  ASSERT_EQ(rule.size(), 5);
  const Mesh& m = space.mesh();
  double worst = 0.0;
  for (int f = 0; f < m.num_facets(); ++f) {
    const Facet& fa = m.facets()[f];
    if (fa.is_boundary()) continue;
    const FacetTrace tr = facet_trace_points(m, f, rule);
    for (int q = 0; q < rule.size(); ++q) {
      const Vec2 up = evaluate_field(space, c, fa.plus_cell, tr.plus_reference[q]).value;
      const Vec2 um = evaluate_field(space, c, fa.minus_cell, tr.minus_reference[q]).value;
      worst = std::max(worst, std::abs((up - um).dot(fa.normal)));
    }
  }
  EXPECT_LE(worst, 1e-11);
}

TEST_P(FeSpaceDegree, ZeroBoundaryDofsGiveZeroNormalFlux) {
  const int k = GetParam();
  const RTSpace space(make_mesh(5), k);
  CoefVec c{space.tag(), random_vector(space.num_dofs(), 23)};
  for (int d : space.boundary_dofs()) c.values(d) = 0.0;
  const SegmentRule rule = gauss_segment(9);
  const Mesh& m = space.mesh();
  double worst = 0.0;
  int boundary = 0;
  for (int f = 0; f < m.num_facets(); ++f) {
    const Facet& fa = m.facets()[f];
    if (!fa.is_boundary()) continue;
    ++boundary;
    const FacetTrace tr = facet_trace_points(m, f, rule);
    for (int q = 0; q < rule.size(); ++q) {
      worst = std::max(worst, std::abs(evaluate_field(space, c, fa.plus_cell, tr.plus_reference[q]).value.dot(fa.normal)));
    }
  }
  EXPECT_EQ(static_cast<int>(space.boundary_dofs().size()), boundary * (k + 1));
  EXPECT_LE(worst, 1e-12);
}

TEST_P(FeSpaceDegree, GradientMatchesFiniteDifferences) {
  const int k = GetParam();
  const RTSpace space(make_mesh(4), k);
  const CoefVec c{space.tag(), random_vector(space.num_dofs(), 29)};
  const double e = 1e-6;
  for (int cell : {0, 7, 19}) {
    const CellGeometry& g = space.mesh().geometry(cell);
    for (const Vec2& ref : random_reference_points(3, cell)) {
      const Vec2 x = g.map(ref);
      auto val = [&](const Vec2& y) { return evaluate_field(space, c, cell, g.pullback(y)).value; };
      Mat2 fd;
      fd.col(0) = (val(x + Vec2(e, 0)) - val(x - Vec2(e, 0))) / (2 * e);
      fd.col(1) = (val(x + Vec2(0, e)) - val(x - Vec2(0, e))) / (2 * e);
      const VectorValue v = evaluate_field(space, c, cell, ref);
      EXPECT_LE((v.grad - fd).norm(), 1e-6 * std::max(1.0, fd.norm()));
      EXPECT_NEAR(v.div, fd.trace(), 1e-6 * std::max(1.0, fd.norm()));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Degrees, FeSpaceDegree, ::testing::Values(1, 2));

TEST(FeSpace, LinearFieldReproducedOnOneCell) {
  const RTSpace space(one_cell_mesh(), 1);
  const VectorField u = [](const Vec2& x) -> Vec2 { return {1.0 + x.x(), 2.0 + x.y()}; };
  const CoefVec c = rt_interpolate(u, space);
  for (const Vec2& ref : random_reference_points(10, 1)) {
    const Vec2 x = space.mesh().geometry(0).map(ref);
    const VectorValue v = evaluate_field(space, c, 0, ref);
    EXPECT_LE((v.value - u(x)).norm(), 1e-12);
    EXPECT_LE((v.grad - Mat2::Identity()).norm(), 1e-11);
    EXPECT_NEAR(v.div, 2.0, 1e-11);
  }
}

TEST(FeSpace, ZeroCoefficients) {
  const RTSpace space(make_mesh(3), 2);
  const CoefVec c = space.zeros();
  const VectorValue v = evaluate_field(space, c, 4, Vec2(0.2, 0.2));
  EXPECT_EQ(v.value.norm(), 0.0);
  EXPECT_EQ(v.grad.norm(), 0.0);
}

TEST(FeSpace, DofCounts) {
  const auto mesh = make_mesh(4);
  for (int k : {1, 2}) {
    const RTSpace space(mesh, k);
    EXPECT_EQ(space.num_dofs(), mesh->num_facets() * (k + 1) + mesh->num_cells() * k * (k + 1));
    const ScalarDGSpace q(mesh, k);
    EXPECT_EQ(q.num_local_dofs(), (k + 1) * (k + 2) / 2);
    EXPECT_EQ(q.num_dofs(), mesh->num_cells() * (k + 1) * (k + 2) / 2);
  }
}

TEST(FeSpace, ScalarBasisIsOrthonormalOnPhysicalCells) {
  const auto mesh = make_mesh(3);
  const ScalarDGSpace q(mesh, 2);
  const QuadratureRule rule = triangle_rule(6);
  for (int cell : {0, 5, 11}) {
    const double det = mesh->geometry(cell).det;
    const int nl = q.num_local_dofs();
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nl, nl);
    for (int p = 0; p < rule.size(); ++p)
      for (int i = 0; i < nl; ++i)
        for (int j = 0; j < nl; ++j)
          g(i, j) += rule.weights[p] * det * q.basis_value(cell, i, rule.points[p]) * q.basis_value(cell, j, rule.points[p]);
    EXPECT_LE((g - Eigen::MatrixXd::Identity(nl, nl)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(FeSpace, UnsupportedDegree) {
  EXPECT_THROW(rt_reference_basis(3, Vec2(0.1, 0.1)), InputError);
  EXPECT_THROW(RTSpace(make_mesh(2), 0), InputError);
}

TEST(FeSpace, CoefficientSpaceMismatch) {
  const auto mesh = make_mesh(3);
  const RTSpace a(mesh, 1);
  const RTSpace b(make_mesh(3), 1);
  const RTSpace c(mesh, 2);
  EXPECT_NO_THROW(a.check(a.zeros()));
  EXPECT_THROW(a.check(b.zeros()), InputError);
  EXPECT_THROW(a.check(c.zeros()), InputError);
  EXPECT_THROW(evaluate_field(a, c.zeros(), 0, Vec2(0.2, 0.2)), InputError);
}

TEST(FeSpace, NonFiniteDetection) {
  const RTSpace space(make_mesh(2), 1);
  CoefVec c = space.zeros();
  EXPECT_TRUE(c.is_finite());
  c.values(3) = std::nan("");
  EXPECT_FALSE(c.is_finite());
}
