#include "sbc/config.hpp"
#include "sbc/error.hpp"
#include "sbc/verification.hpp"

#include <gtest/gtest.h>

using namespace sbc;

namespace {

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST(Config, TextRoundTrip) {
  ExperimentConfig c = reference_config();
  c.T = 0.1 + 0.2;  // not exactly representable in short decimal
  c.g0_center = Point(-0.05, 1.0 / 3.0);
  c.A_spec = "radial:1,0.5";
  c.sweep_a1 = {0.0, 1e-7, 3.25};
  c.seed = 18446744073709ull;
  c.dump_trajectory = true;
  EXPECT_EQ(parse_config(to_text(c)), c);
  EXPECT_EQ(parse_config(to_text(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, ReferenceFileMatchesBuiltIn) {
  EXPECT_EQ(load_config(std::string(SBC_SOURCE_DIR) + "/configs/reference.cfg"), reference_config());
  EXPECT_NO_THROW(validate(reference_config()));
}

TEST(Config, CommentsAndWhitespace) {
  const ExperimentConfig c = parse_config("# header\n\n  mesh.n_r =  7   # trailing\ntime.T=2\n");
  EXPECT_EQ(c.n_r, 7);
  EXPECT_EQ(c.T, 2.0);
  EXPECT_EQ(c.n_theta, ExperimentConfig{}.n_theta);
}

TEST(Config, ParseErrorsNameTheField) {
  EXPECT_EQ(field_of([] { parse_config("mesh.nr = 3\n"); }), "mesh.nr");
  EXPECT_EQ(field_of([] { parse_config("mesh.n_r = 3.5\n"); }), "mesh.n_r");
  EXPECT_EQ(field_of([] { parse_config("time.T = fast\n"); }), "time.T");
  EXPECT_EQ(field_of([] { parse_config("time.T =\n"); }), "time.T");
  EXPECT_EQ(field_of([] { parse_config("region.g0_center = 1\n"); }), "region.g0_center");
  EXPECT_EQ(field_of([] { parse_config("output.trajectory = maybe\n"); }), "output.trajectory");
  EXPECT_EQ(field_of([] { parse_config("seed = -4\n"); }), "seed");
  EXPECT_EQ(field_of([] { parse_config("sweep.T_list = \n"); }), "sweep.T_list");
  EXPECT_THROW(load_config("/nonexistent/x.cfg"), ConfigError);
}

TEST(Config, ValidationNamesTheField) {
  auto with = [](const std::string& o) {
    ExperimentConfig c = reference_config();
    apply_override(c, o);
    return field_of([&] { validate(c); });
  };
  EXPECT_EQ(with("mesh.n_theta=25"), "mesh.n_theta");
  EXPECT_EQ(with("mesh.n_r=2"), "mesh.n_r");
  EXPECT_EQ(with("time.n_t=15"), "time.n_t");
  EXPECT_EQ(with("region.g0_radius=1.0"), "region.g0_radius");
  EXPECT_EQ(with("region.g1_radius=0.5"), "region.g1_radius");
  EXPECT_EQ(with("coeffs.b_surf=0.1"), "coeffs.b_surf");
  EXPECT_EQ(with("weights.mu=0.5"), "weights.mu");
  EXPECT_EQ(with("penalty.eps=0"), "penalty.eps");
  EXPECT_EQ(with("audit.margin=0.5"), "audit.margin");
  ExperimentConfig deep = reference_config();
  deep.n_t = 15;
  deep.allow_deep_tree = true;
  EXPECT_NO_THROW(validate(deep));
}

TEST(Config, Overrides) {
  ExperimentConfig c = reference_config();
  apply_override(c, "weights.lambda_factor=0.5");
  apply_override(c, " coeffs.B1 = 0.25, -1 ");
  EXPECT_EQ(c.lambda_factor, 0.5);
  EXPECT_EQ(c.B1, Point(0.25, -1.0));
  EXPECT_THROW(apply_override(c, "no_equals_sign"), ConfigError);
  EXPECT_EQ(field_of([&] { apply_override(c, "bogus=1"); }), "bogus");
}

TEST(Config, DiffusionSpecs) {
  ExperimentConfig c = reference_config();
  const Point x(0.3, 0.4);
  EXPECT_EQ(make_coefficients(c).A(0.0, x), Eigen::Matrix2d::Identity());
  c.A_spec = "constant:2,0.5,3";
  EXPECT_EQ(make_coefficients(c).A(0.0, x), (Eigen::Matrix2d() << 2, 0.5, 0.5, 3).finished());
  c.A_spec = "radial:1,2";
  EXPECT_DOUBLE_EQ(make_coefficients(c).A(0.0, x)(0, 0), 1.5);
  EXPECT_EQ(make_coefficients(c).A(0.0, x)(0, 1), 0.0);
  for (const char* bad : {"constant:1,2", "radial:1", "anisotropic", "constant:a,b,c"}) {
    c.A_spec = bad;
    EXPECT_EQ(field_of([&] { make_coefficients(c); }), "coeffs.A") << bad;
  }
}
