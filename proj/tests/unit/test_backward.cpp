#include "sbc/analysis.hpp"
#include "sbc/backward.hpp"
#include "sbc/error.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sbc;

namespace {

PropagatorPtr make(const CoefficientSet& c, int n_r, int n_theta, double T, int n_t) {
  return std::make_shared<const Propagator>(build_polar_mesh(1.0, n_r, n_theta), c,
                                            BinomialTree(T, n_t, true));
}

CoefficientSet lower_order() {
  return CoefficientSet::constant((Eigen::Matrix2d() << 1.2, 0.1, 0.1, 0.9).finished(), 1.1, 0.7,
                                  -0.4, Point(0.5, -0.3), 0.2, 0.5);
}

void fill_random(AdaptedField& f, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  for (Index i = 0; i < f.data().size(); ++i) f.data().data()[i] = g(rng);
}

double rel(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1e-300, b.cwiseAbs().maxCoeff());
}

}  // namespace

TEST(BackwardSolve, ConstantTerminalStaysConstant) {
  const auto prop = make(CoefficientSet::heat(), 5, 10, 1.0, 4);
  const Index n = prop->mesh().num_dofs();
  AdaptedField zT = terminal_field(prop->tree(), n);
  zT.level(4).setConstant(1.7);
  const BackwardSolution b = backward_solve(prop, zT);
  EXPECT_LT((b.z.data().array() - 1.7).abs().maxCoeff(), 1e-13);
  EXPECT_LT(b.Zm.data().cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT(b.Zs.data().cwiseAbs().maxCoeff(), 1e-13);
}

TEST(BackwardSolve, BrownianTerminal) {
  const auto prop = make(CoefficientSet::heat(), 5, 10, 1.0, 4);
  const Index n = prop->mesh().num_dofs();
  const AdaptedField W = brownian_field(prop->tree());
  const double c = -0.8;
  AdaptedField zT = terminal_field(prop->tree(), n);
  for (Index j = 0; j < BinomialTree::level_size(4); ++j) zT.at(4, j).setConstant(c * W.at(4, j)(0));
  const BackwardSolution b = backward_solve(prop, zT);
  for (int k = 0; k < 4; ++k) {
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      EXPECT_LT((b.z.at(k, j).array() - c * W.at(k, j)(0)).abs().maxCoeff(), 1e-12);
      EXPECT_LT((b.Zm.at(k, j).array() - c).abs().maxCoeff(), 1e-12);
      EXPECT_LT((b.Zs.at(k, j).array() - c).abs().maxCoeff(), 1e-12);
    }
  }
}

TEST(BackwardSolve, ZeroAndDeterministicData) {
  const auto prop = make(lower_order(), 5, 10, 1.0, 3);
  const Index n = prop->mesh().num_dofs();
  const BackwardSolution zero = backward_solve(prop, terminal_field(prop->tree(), n));
  EXPECT_EQ(zero.z.data().cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(zero.Zm.data().cwiseAbs().maxCoeff(), 0.0);

  std::mt19937_64 rng(3);
  const Vec v = smooth_random_vector(prop->mesh(), rng);
  AdaptedField zT = terminal_field(prop->tree(), n);
  for (Index j = 0; j < BinomialTree::level_size(3); ++j) zT.at(3, j) = v;
  const BackwardSolution b = backward_solve(prop, zT);
  EXPECT_LT(b.Zm.data().cwiseAbs().maxCoeff(), 1e-14 * b.z.data().cwiseAbs().maxCoeff());
  EXPECT_LT(b.Zs.data().cwiseAbs().maxCoeff(), 1e-14 * b.z.data().cwiseAbs().maxCoeff());
  EXPECT_TRUE(std::isfinite(b.wellposedness_ratio));
  EXPECT_GT(b.wellposedness_ratio, 0.0);
  for (Index j = 0; j < BinomialTree::level_size(3); ++j) EXPECT_EQ(b.z.at(3, j), v);
}

TEST(BackwardSolve, MatchesDenseOracle) {
  for (int n_t : {1, 2, 3}) {
    const auto prop = make(lower_order(), 4, 8, 0.8, n_t);
    const PolarMesh& m = prop->mesh();
    const Index n = m.num_dofs();
    std::mt19937_64 rng(40 + n_t);
    const AdaptedField zT = random_terminal(m, prop->tree(), rng, 1);
    BackwardSources src;
    src.F1 = AdaptedField(n, n_t);
    src.F2 = AdaptedField(n, n_t);
    src.Fvec = AdaptedField(2 * m.num_triangles(), n_t);
    src.Fsurf = AdaptedField(m.n_theta, n_t);
    fill_random(*src.F1, rng);
    fill_random(*src.F2, rng);
    fill_random(*src.Fvec, rng);
    fill_random(*src.Fsurf, rng);
    for (const BackwardSources& s : {BackwardSources{}, src}) {
      const BackwardSolution a = backward_solve(prop, zT, s);
      const BackwardSolution o = oracle_backward_dense(*prop, zT, s);
      EXPECT_LT(rel(a.z.data(), o.z.data()), 1e-10);
      EXPECT_LT(rel(a.Zm.data(), o.Zm.data()), 1e-10);
      EXPECT_LT(rel(a.Zs.data(), o.Zs.data()), 1e-10);
    }
  }
}

TEST(BackwardSolve, OracleGuards) {
  const auto deep = make(CoefficientSet::heat(), 4, 8, 1.0, 5);
  EXPECT_THROW(oracle_backward_dense(*deep, terminal_field(deep->tree(), deep->mesh().num_dofs())),
               InvalidArgument);
  const auto wide = make(CoefficientSet::heat(), 6, 12, 1.0, 2);
  EXPECT_THROW(oracle_backward_dense(*wide, terminal_field(wide->tree(), wide->mesh().num_dofs())),
               InvalidArgument);
  const auto ok = make(CoefficientSet::heat(), 4, 8, 1.0, 2);
  EXPECT_THROW(oracle_backward_dense(*ok, AdaptedField(5, 2)), DimensionMismatch);
  EXPECT_THROW(backward_solve(ok, AdaptedField(ok->mesh().num_dofs(), 1)), DimensionMismatch);
}

TEST(BackwardSolve, FirstOrderInTime) {
  const PolarMesh m = build_polar_mesh(1.0, 6, 12);
  Vec zT(m.num_dofs());
  for (Index d = 0; d < m.num_dofs(); ++d) zT[d] = std::cos(2 * m.nodes[d].x()) + m.nodes[d].y();
  Vec z0[3];
  int i = 0;
  for (int n_t : {8, 16, 32}) {
    const auto prop = make(lower_order(), 6, 12, 1.0, n_t);
    Vec z = zT;
    for (int k = n_t - 1; k >= 0; --k) z = std::get<0>(backward_step(*prop, k, z, z));
    z0[i++] = z;
  }
  const double e1 = (z0[0] - z0[1]).norm(), e2 = (z0[1] - z0[2]).norm();
  EXPECT_GT(e1 / e2, 1.6);
  EXPECT_LT(e1 / e2, 2.6);
}

TEST(BackwardSolve, NormNondecreasingInTimeWithoutLowerOrder) {
  const auto prop = make(CoefficientSet::constant((Eigen::Matrix2d() << 1.5, 0.2, 0.2, 1.0).finished(),
                                                  1.3, 0, 0, Point::Zero(), 0, 0.5),
                         6, 12, 1.0, 6);
  std::mt19937_64 rng(6);
  const BackwardSolution b = backward_solve(prop, random_terminal(prop->mesh(), prop->tree(), rng));
  const auto norms = mean_square_norms(prop->mesh(), b.z);
  for (size_t k = 0; k + 1 < norms.size(); ++k) EXPECT_LE(norms[k], norms[k + 1] * (1 + 1e-14));
}

TEST(BackwardStep, IsTransposedForwardStep) {
  // <A^-1 x, y> = <x, A^-T y> per level
  const auto prop = make(lower_order(), 5, 10, 1.0, 3);
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  const Index n = prop->mesh().num_dofs();
  for (int k = 0; k < 3; ++k) {
    Vec x(n), y(n);
    for (Index i = 0; i < n; ++i) {
      x[i] = g(rng);
      y[i] = g(rng);
    }
    EXPECT_NEAR(prop->solve(k, x).dot(y), x.dot(prop->solve_transposed(k, y)), 1e-12);
  }
}

TEST(DualLoad, SignsAndPairing) {
  const auto prop = make(CoefficientSet::heat(), 4, 8, 1.0, 1);
  const PolarMesh& m = prop->mesh();
  const Index n = m.num_dofs();
  std::mt19937_64 rng(2);
  BackwardSources s;
  s.F1 = AdaptedField(n, 1);
  s.Fvec = AdaptedField(2 * m.num_triangles(), 1);
  fill_random(*s.F1, rng);
  fill_random(*s.Fvec, rng);
  const Vec d = dual_load(m, s, 1, 1);
  const Vec expect = -m.w_bulk.cwiseProduct(s.F1->at(1, 1)) - weak_divergence(m, s.Fvec->at(1, 1));
  EXPECT_LT((d - expect).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(dual_load(m, BackwardSources{}, 1, 0).cwiseAbs().sum(), 0.0);
}
