#pragma once

#include "sbc/mesh.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace sbc {

/// psi(x) = scale * (R^2 - |x|^2): positive inside, zero on the circle, with
/// its only critical point at the center.
struct PsiField {
  Vec values;
  Vec normal_slope;      ///< d_nu psi per boundary node (size n_theta)
  Eigen::MatrixX2d grad; ///< per dof
  double sup_norm = 0.0;
  double boundary_slope_bound = 0.0;  ///< c with d_nu psi <= -c
  double scale = 1.0;
  double g1_radius = 0.0;
  double R = 0.0;
};

PsiField build_psi(const PolarMesh& mesh, double g1_radius, double scale = 1.0);

/// Weight family sampled on (time sample) x (dof). Rows are time samples.
///
/// Large-parameter regimes overflow double precision quickly, so the logs are
/// kept alongside the values and everything downstream that needs products
/// of weights works in log space.
struct WeightSet {
  double lambda = 1.0;
  double mu = 1.0;
  double T = 1.0;
  double eps_reg = 0.0;
  double psi_sup = 0.0;
  std::vector<double> times;

  Mat alpha, phi, ell, theta, theta_eps;
  Mat log_phi;        ///< ln phi
  Mat log_theta_eps;  ///< lambda * alpha_eps
  bool overflow = false;  ///< some exponent was clipped at +-700

  Index num_times() const { return static_cast<Index>(times.size()); }
  /// ln theta = ell.
  const Mat& log_theta() const { return ell; }
};

/// Midpoints (k + 1/2) T / n_t, k = 0..n_t-1.
std::vector<double> half_step_times(double T, int n_t);

WeightSet evaluate_weights(const PsiField& psi, double lambda, double mu, double T,
                           std::span<const double> times, double eps_reg);

/// exp(x) with the exponent clipped to [-700, 700]; sets `clipped` when it bites.
double capped_exp(double x, bool& clipped);

struct WeightBound {
  std::string name;
  double fitted_C = 0.0;
};

/// Best constants for the five weight bounds over the sample grid:
///   phi >= C T^-2 (largest C), |phi_t| <= C T phi^2, |phi_tt| <= C T^2 phi^3,
///   |alpha_t| <= C T e^{2 mu |psi|} phi^2, |alpha_tt| <= C T^2 e^{2 mu |psi|} phi^3.
/// Time derivatives by centered differences on a uniform grid, so at least
/// three samples are needed.
std::vector<WeightBound> verify_weight_bounds(const WeightSet& ws);

double min_lambda_carleman(double T, double mu, double psi_sup, double lambda0);
double min_lambda_adjoint(double T, const CoefficientNorms& norms, double lambda0);

struct CostFactor {
  double K = 0.0;
  /// 1, 1/T, |a1|^{2/3}, |a2|^{2/3}, T(|a1| + |a2|), (1 + T)(|B1|^2 + |B2|^2)
  std::array<double, 6> components{};
};

CostFactor cost_factor_K(double T, const CoefficientNorms& norms);

}  // namespace sbc
