#pragma once

#include "sbc/mesh.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sbc {

/// Flat `section.key = value` configuration. Lines starting with '#' are
/// comments; unknown keys are rejected.
struct ExperimentConfig {
  // mesh
  double R = 1.0;
  int n_r = 12;
  int n_theta = 24;
  // time
  double T = 1.0;
  int n_t = 8;
  bool allow_deep_tree = false;
  // region
  Point g0_center = Point::Zero();
  double g0_radius = 0.3;
  double g1_radius = 0.1;
  // coefficients
  std::string A_spec = "identity";  ///< identity | constant:a11,a12,a22 | radial:c0,c1
  double b_surf = 1.0;
  double a1 = 0.0;
  double a2 = 0.0;
  Point B1 = Point::Zero();
  double B2 = 0.0;
  double beta0 = 0.5;
  // weights
  double mu = 1.0;
  double lambda_factor = 2.0;
  double lambda0 = 1.0;
  double eps_reg = 0.5;
  double psi_scale = 1.0;
  // penalty
  double eps = 1e-6;
  double cg_tol = 1e-12;
  int cg_max_iter = 2000;
  // initial state: amplitude * exp(-|x - center|^2 / width)
  Point y0_center = Point(0.3, 0.0);
  double y0_width = 0.1;
  double y0_amplitude = 1.0;
  // audits and sweeps
  int audit_instances = 20;
  double audit_margin = 1.5;
  double cost_constant = 1.0;
  std::vector<double> sweep_T = {0.5, 1.0, 2.0};
  std::vector<double> sweep_a1 = {0.0, 2.0, 8.0};
  // run
  std::uint64_t seed = 12345;
  std::string output_dir = "out";
  int threads = 1;
  bool dump_trajectory = false;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path);
/// Applies one `key=value` override.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
/// Checks every field against the owning module's preconditions.
void validate(const ExperimentConfig& cfg);
/// Full effective config in the same format; parses back to an equal value.
std::string to_text(const ExperimentConfig& cfg);

CoefficientSet make_coefficients(const ExperimentConfig& cfg);

}  // namespace sbc
