#pragma once

#include "sbc/backward.hpp"
#include "sbc/weights.hpp"

#include <string>
#include <vector>

namespace sbc {

struct PenaltyConfig {
  double eps = 1e-6;       ///< terminal penalty: (1/2 eps) E|y(T) - target|^2
  double eps_reg = 0.5;    ///< regularization of theta_eps
  double cg_tol = 1e-12;   ///< relative preconditioned residual
  int cg_max_iter = 2000;
};

/// Everything J_eps needs besides the controls: the discretization, the
/// weights on the half-step grid and the control-norm multipliers
///   rho_u = lambda^-3 mu^-4 theta^-2 phi^-3,  rho_1 = rho_2 = lambda^-2 mu^-2 theta^-2 phi^-2
/// and the state multiplier theta_eps^-2, all at t_{k+1/2}.
struct ControlProblem {
  PropagatorPtr prop;
  ControlRegion region;
  WeightSet weights;
  PenaltyConfig penalty;
  bool include_state_term = true;

  Mat rho_u;     ///< region size x n_t
  Mat rho_1;     ///< n_dof x n_t
  Mat rho_2;     ///< n_theta x n_t
  Mat state_w;   ///< n_dof x n_t, theta_eps^-2
  bool overflow = false;
};

ControlProblem make_control_problem(PropagatorPtr prop, ControlRegion region, WeightSet weights,
                                    PenaltyConfig penalty, bool include_state_term = true);

/// Weighted L2 inner product on control triples: sum_k dt E[ sum w a b ] with
/// w_bulk on u and v1, w_surf on v2. Gradients are Riesz representatives in it.
double control_dot(const ControlProblem& P, const ControlTriple& a, const ControlTriple& b);
/// y += alpha x
void control_axpy(double alpha, const ControlTriple& x, ControlTriple& y);
/// Pointwise product with the multipliers (power = 1) or their inverse (power = -1).
ControlTriple apply_rho(const ControlProblem& P, const ControlTriple& c, int power);
// c scaled by rho^{-1/2}, so each entry carries unit weighted energy
ControlTriple unit_weighted_energy(const ControlProblem& P, const ControlTriple& c);

struct JepsEvaluation {
  double value = 0.0;
  double control_term = 0.0;
  double state_term = 0.0;
  double terminal_term = 0.0;
  ControlTriple gradient;
  ForwardSolution forward;
  BackwardSolution backward;
};

/// J_eps and its gradient from one forward and one backward solve. The adjoint
/// runs with terminal (y(T) - target)/eps and drift -theta_eps^-2 y.
JepsEvaluation jeps_value_and_gradient(const ControlProblem& P, const ControlTriple& controls,
                                       const Vec& y0, const AdaptedField* target = nullptr);

struct HumReport {
  int iterations = 0;
  bool converged = false;
  bool monotone = true;          ///< J never increased along the iterations
  double final_gradient_norm = 0.0;  ///< relative preconditioned residual
  double terminal_ratio = 0.0;
  bool terminal_absolute = false;
  double terminal_distance = 0.0;  ///< E|y(T) - target|_M^2
  bool target_met = false;         ///< distance <= eps (approximate mode)
  double control_cost = 0.0;       ///< unweighted |u|^2 + |v1|^2 + |v2|^2
  double weighted_cost = 0.0;      ///< the multiplier-weighted control norm
  double J = 0.0;
  double J0 = 0.0;                 ///< J at zero controls
  double K = 0.0;
  double cost_constant = 1.0;
  double bound_value = 0.0;        ///< e^{C K} |y0|^2
  double cost_exponent = 0.0;      ///< ln(control_cost / |y0|^2) / K
  double stationarity_residual = 0.0;
  bool overflow = false;
  std::vector<double> j_history;

  std::string to_text() const;
};

struct SynthesisResult {
  ControlTriple controls;
  HumReport report;
};

/// Preconditioned CG on J_eps from zero controls.
SynthesisResult synthesize_null(const ControlProblem& P, const Vec& y0, double K = 0.0,
                                double cost_constant = 1.0);

/// Same machinery with terminal penalty towards a leaf-indexed target.
SynthesisResult synthesize_approximate(const ControlProblem& P, const Vec& y0,
                                       const AdaptedField& target, double K = 0.0,
                                       double cost_constant = 1.0);

struct CostSweepRow {
  double T = 0.0;
  double a1 = 0.0;
  double B1 = 0.0;
  double K = 0.0;
  double control_cost = 0.0;
  double terminal_ratio = 0.0;
  int iterations = 0;
  bool ok = false;
  std::string status;
};

struct CostFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  ///< rms residual
  int points = 0;
};

/// Least squares of log(control_cost / y0_norm2) against K over the ok rows.
CostFit fit_cost_law(const std::vector<CostSweepRow>& rows, double y0_norm2);

}  // namespace sbc
