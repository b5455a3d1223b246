#include "sbc/error.hpp"
#include "sbc/mesh.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace sbc;

namespace {

constexpr double kPi = std::numbers::pi;

Vec random_vec(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

// Cotangent-formula stiffness for A = I plus the periodic 1D second difference
// on the boundary ring, built straight from node coordinates.
Mat cotangent_stiffness(const PolarMesh& m, double b_surf) {
  const Index n = m.num_dofs();
  Mat S = Mat::Zero(n, n);
  for (const auto& tri : m.triangles) {
    for (int c = 0; c < 3; ++c) {
      const Index o = tri[c], a = tri[(c + 1) % 3], b = tri[(c + 2) % 3];
      const Point u = m.nodes[a] - m.nodes[o], v = m.nodes[b] - m.nodes[o];
      const double cot = u.dot(v) / std::abs(u.x() * v.y() - u.y() * v.x());
      S(a, b) -= 0.5 * cot;
      S(b, a) -= 0.5 * cot;
      S(a, a) += 0.5 * cot;
      S(b, b) += 0.5 * cot;
    }
  }
  const double h = m.R * m.dtheta;
  for (int j = 0; j < m.n_theta; ++j) {
    const Index a = m.dof(m.n_r, j), b = m.dof(m.n_r, (j + 1) % m.n_theta);
    S(a, a) += b_surf / h;
    S(b, b) += b_surf / h;
    S(a, b) -= b_surf / h;
    S(b, a) -= b_surf / h;
  }
  return S;
}

}  // namespace

TEST(PolarMesh, DofCountAndLayout) {
  const PolarMesh m = build_polar_mesh(1.0, 6, 12);
  EXPECT_EQ(m.num_dofs(), Index(5 * 12 + 1 + 12));
  EXPECT_EQ(m.num_boundary(), 12);
  for (Index d = m.first_boundary_dof(); d < m.num_dofs(); ++d) {
    EXPECT_TRUE(m.is_boundary(d));
    EXPECT_NEAR(m.radius[d], 1.0, 1e-15);
  }
  EXPECT_FALSE(m.is_boundary(m.first_boundary_dof() - 1));
  EXPECT_EQ(m.dof(0, 0), 0);
}

TEST(PolarMesh, BulkWeightsApproximateDiskArea) {
  const PolarMesh m = build_polar_mesh(1.0, 16, 32);
  EXPECT_LT(std::abs(m.w_bulk.sum() - kPi) / kPi, 0.01);
  double prev = 1.0;
  for (int level : {8, 16, 32}) {
    const PolarMesh r = build_polar_mesh(1.0, level, 2 * level);
    const double err = std::abs(r.w_bulk.sum() - kPi);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(PolarMesh, SurfaceWeightsExact) {
  for (auto [n_r, n_theta] : {std::pair{4, 8}, std::pair{12, 24}, std::pair{7, 30}}) {
    const PolarMesh m = build_polar_mesh(1.0, n_r, n_theta);
    EXPECT_NEAR(m.w_surf.sum(), 2 * kPi, 1e-13);
  }
  const PolarMesh m = build_polar_mesh(2.0, 8, 16);
  EXPECT_EQ(m.num_boundary(), 16);
  for (Index d = m.first_boundary_dof(); d < m.num_dofs(); ++d)
    EXPECT_NEAR(m.w_surf[d], 2.0 * 2 * kPi / 16, 1e-15);
  EXPECT_EQ(m.w_surf.head(m.first_boundary_dof()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(PolarMesh, RejectsInvalidGeometry) {
  EXPECT_THROW(build_polar_mesh(0.0, 8, 16), GeometryError);
  EXPECT_THROW(build_polar_mesh(-1.0, 8, 16), GeometryError);
  EXPECT_THROW(build_polar_mesh(1.0, 8, 15), GeometryError);
  EXPECT_THROW(build_polar_mesh(1.0, 3, 16), GeometryError);
  EXPECT_THROW(build_polar_mesh(1.0, 8, 6), GeometryError);
}

TEST(PolarMesh, QuadratureWeightsPositive) {
  const PolarMesh m = build_polar_mesh(1.5, 5, 10);
  EXPECT_GT(m.w_bulk.minCoeff(), 0.0);
  EXPECT_GT(m.mass().minCoeff(), 0.0);
  EXPECT_GT(m.triangle_area.minCoeff(), 0.0);
}

TEST(Integration, ConstantsAndZero) {
  const PolarMesh m = build_polar_mesh(2.0, 24, 48);
  const Vec one = Vec::Ones(m.num_dofs());
  EXPECT_NEAR(integrate_surface(m, one), 4 * kPi, 1e-12);
  EXPECT_LT(std::abs(integrate_bulk(m, one) - 4 * kPi) / (4 * kPi), 0.01);
  EXPECT_EQ(integrate_bulk(m, Vec::Zero(m.num_dofs())), 0.0);
  EXPECT_EQ(integrate_surface(m, Vec::Zero(m.num_dofs())), 0.0);
  EXPECT_THROW(integrate_bulk(m, Vec::Ones(3)), DimensionMismatch);
  EXPECT_THROW(integrate_surface(m, Vec::Ones(3)), DimensionMismatch);
}

TEST(Forms, StiffnessMatchesCotangentOracle) {
  const PolarMesh m = build_polar_mesh(1.0, 4, 8);
  const SpatialForms f = assemble_forms(m, CoefficientSet::heat(), 0.0);
  const Mat oracle = cotangent_stiffness(m, 1.0);
  EXPECT_LT((Mat(f.S) - oracle).cwiseAbs().maxCoeff(), 1e-12);

  CoefficientSet c = CoefficientSet::heat(0.5);
  c.b_surf = [](double, const Point&) { return 2.5; };
  const SpatialForms g = assemble_forms(m, c, 0.0);
  EXPECT_LT((Mat(g.S) - cotangent_stiffness(m, 2.5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forms, StiffnessKernelAndSymmetry) {
  const PolarMesh m = build_polar_mesh(1.0, 8, 16);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.2, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const double a = 1.0 + U(rng), b = 0.5 * U(rng), d = 1.0 + U(rng), s = 0.5 + U(rng);
    CoefficientSet c = CoefficientSet::constant((Eigen::Matrix2d() << a, b, b, d).finished(), s,
                                                U(rng), U(rng), Point(U(rng), -U(rng)), U(rng), 0.1);
    const SpatialForms f = assemble_forms(m, c, 0.3);
    EXPECT_LE((f.S * Vec::Ones(m.num_dofs())).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ((Mat(f.S) - Mat(f.S).transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((f.C * Vec::Ones(m.num_dofs())).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::SelfAdjointEigenSolver<Mat> es(Mat(f.S));
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Forms, DiscreteDivergenceTheorem) {
  const PolarMesh m = build_polar_mesh(1.0, 6, 12);
  const SpatialForms f = assemble_forms(m, CoefficientSet::heat(), 0.0);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec v = random_vec(m.num_dofs(), rng), w = random_vec(m.num_dofs(), rng);
    const double lhs = (f.S * v).dot(w);
    const double bulk = (m.grad * v).cwiseProduct(m.grad_weights).dot(m.grad * w);
    const double surf = (m.surface_grad * v).cwiseProduct(m.surface_grad_weights).dot(m.surface_grad * w);
    EXPECT_NEAR(lhs, bulk + surf, 1e-11 * (1 + std::abs(lhs)));
    EXPECT_NEAR(lhs, (f.S * w).dot(v), 1e-11 * (1 + std::abs(lhs)));
  }
}

TEST(Forms, WeakDivergencePairing) {
  const PolarMesh m = build_polar_mesh(1.0, 5, 10);
  std::mt19937_64 rng(11);
  const Vec F = random_vec(2 * m.num_triangles(), rng);
  const Vec Fs = random_vec(m.n_theta, rng);
  const Vec v = random_vec(m.num_dofs(), rng);
  EXPECT_NEAR(weak_divergence(m, F).dot(v), -F.cwiseProduct(m.grad_weights).dot(m.grad * v), 1e-12);
  EXPECT_NEAR(weak_surface_divergence(m, Fs).dot(v),
              -Fs.cwiseProduct(m.surface_grad_weights).dot(m.surface_grad * v), 1e-12);
  EXPECT_THROW(weak_divergence(m, Vec::Ones(3)), DimensionMismatch);
}

TEST(Forms, ConvergesToLaplacianUnderRefinement) {
  // f = |x|^4, -Laplace f = -16 |x|^2; compared in the interior away from
  // the boundary ring.
  double prev = 1e300;
  for (int level : {8, 16, 32}) {
    const PolarMesh m = build_polar_mesh(1.0, level, 2 * level);
    const SpatialForms f = assemble_forms(m, CoefficientSet::heat(), 0.0);
    Vec y(m.num_dofs());
    for (Index d = 0; d < m.num_dofs(); ++d) y[d] = std::pow(m.radius[d], 4);
    const Vec Sy = f.S * y;
    double err = 0.0, norm = 0.0;
    for (Index d = 1; d < m.first_boundary_dof(); ++d) {
      if (m.radius[d] > 0.75) continue;
      const double exact = -16.0 * m.radius[d] * m.radius[d];
      err += m.w_bulk[d] * std::pow(Sy[d] / m.w_bulk[d] - exact, 2);
      norm += m.w_bulk[d] * exact * exact;
    }
    err = std::sqrt(err / norm);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(Forms, EllipticityViolationsRejected) {
  const PolarMesh m = build_polar_mesh(1.0, 4, 8);
  CoefficientSet c = CoefficientSet::heat(0.5);
  c.A = [](double, const Point&) { return Eigen::Matrix2d(0.3 * Eigen::Matrix2d::Identity()); };
  EXPECT_THROW(assemble_forms(m, c, 0.0), EllipticityError);
  CoefficientSet d = CoefficientSet::heat(0.5);
  d.b_surf = [](double, const Point&) { return 0.1; };
  EXPECT_THROW(assemble_forms(m, d, 0.0), EllipticityError);
}

TEST(Forms, MassDiagonalAndReaction) {
  const PolarMesh m = build_polar_mesh(1.0, 6, 12);
  const CoefficientSet c = CoefficientSet::constant(Eigen::Matrix2d::Identity(), 1.0, 2.0, -3.0,
                                                    Point::Zero(), 0.0, 0.5);
  const SpatialForms f = assemble_forms(m, c, 0.0);
  EXPECT_GT(f.M.minCoeff(), 0.0);
  EXPECT_LT((f.M - m.mass()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((f.Rx - (2.0 * m.w_bulk - 3.0 * m.w_surf)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ControlRegion, IndicatorAndNesting) {
  const PolarMesh m = build_polar_mesh(1.0, 12, 24);
  const ControlRegion r = build_control_region(m, Point::Zero(), 0.3, 0.1);
  EXPECT_TRUE(r.contains_G1);
  EXPECT_GT(r.size(), 0);
  for (Index d = 0; d < m.num_dofs(); ++d) {
    if (m.is_boundary(d)) EXPECT_EQ(r.indicator[d], 0.0);
    EXPECT_EQ(r.indicator[d], m.nodes[d].norm() < 0.3 ? 1.0 : 0.0);
  }
  const Vec compact = Vec::LinSpaced(r.size(), 1.0, 2.0);
  EXPECT_EQ(r.gather(r.scatter(compact, m.num_dofs())), compact);

  EXPECT_THROW(build_control_region(m, Point(0.8, 0.0), 0.3, 0.1), GeometryError);
  EXPECT_THROW(build_control_region(m, Point::Zero(), 0.3, 0.3), GeometryError);
  EXPECT_THROW(build_control_region(m, Point(0.25, 0.0), 0.3, 0.1), GeometryError);
}

TEST(CoefficientNorms, SupOverSamples) {
  const PolarMesh m = build_polar_mesh(1.0, 4, 8);
  CoefficientSet c = CoefficientSet::heat(0.5);
  c.a1 = [](double t, const Point& x) { return -3.0 * t * x.norm(); };
  c.B1 = [](double, const Point&) { return Eigen::Vector2d(3.0, 4.0); };
  const std::vector<double> times = {0.25, 0.5};
  const CoefficientNorms n = coefficient_norms(m, c, times);
  EXPECT_NEAR(n.a1, 1.5, 1e-14);
  EXPECT_NEAR(n.B1, 5.0, 1e-14);
  EXPECT_EQ(n.a2, 0.0);
  EXPECT_EQ(n.B2, 0.0);
}
