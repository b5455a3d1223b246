#include "sbc/experiment.hpp"

#include "sbc/error.hpp"
#include "sbc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>

namespace sbc {

Vec gaussian_bump(const PolarMesh& mesh, const Point& center, double width, double amplitude) {
  Vec y(mesh.num_dofs());
  for (Index d = 0; d < mesh.num_dofs(); ++d)
    y[d] = amplitude * std::exp(-(mesh.nodes[d] - center).squaredNorm() / width);
  return y;
}

Setup make_setup(const ExperimentConfig& cfg, OperatorMode mode) {
  validate(cfg);
  Setup s;
  s.cfg = cfg;
  s.coeffs = make_coefficients(cfg);
  PolarMesh mesh = build_polar_mesh(cfg.R, cfg.n_r, cfg.n_theta);
  s.region = build_control_region(mesh, cfg.g0_center, cfg.g0_radius, cfg.g1_radius);
  s.psi = build_psi(mesh, cfg.g1_radius, cfg.psi_scale);
  const BinomialTree tree(cfg.T, cfg.n_t, cfg.allow_deep_tree);
  const auto times = half_step_times(cfg.T, cfg.n_t);
  s.norms = coefficient_norms(mesh, s.coeffs, times);
  s.y0 = gaussian_bump(mesh, cfg.y0_center, cfg.y0_width, cfg.y0_amplitude);
  s.prop = std::make_shared<const Propagator>(std::move(mesh), s.coeffs, tree, mode);
  return s;
}

double adjoint_threshold(const Setup& s) {
  return min_lambda_adjoint(s.cfg.T, s.norms, s.cfg.lambda0);
}

double carleman_threshold(const Setup& s) {
  return min_lambda_carleman(s.cfg.T, s.cfg.mu, s.psi.sup_norm, s.cfg.lambda0);
}

WeightSet weights_for(const Setup& s, double lambda) {
  const auto times = half_step_times(s.cfg.T, s.cfg.n_t);
  return evaluate_weights(s.psi, std::max(1.0, lambda), s.cfg.mu, s.cfg.T, times, s.cfg.eps_reg);
}

CostFactor cost_factor(const Setup& s) { return cost_factor_K(s.cfg.T, s.norms); }

ControlProblem control_problem(const Setup& s, bool include_state_term) {
  PenaltyConfig pen{s.cfg.eps, s.cfg.eps_reg, s.cfg.cg_tol, s.cfg.cg_max_iter};
  return make_control_problem(s.prop, s.region,
                              weights_for(s, s.cfg.lambda_factor * adjoint_threshold(s)), pen,
                              include_state_term);
}

std::vector<CostSweepRow> sweep_cost(const ExperimentConfig& cfg) {
  std::vector<ExperimentConfig> points;
  for (double T : cfg.sweep_T) {
    for (double a1 : cfg.sweep_a1) {
      ExperimentConfig c = cfg;
      c.T = T;
      c.a1 = a1;
      points.push_back(c);
    }
  }
  std::vector<CostSweepRow> rows(points.size());
  parallel_for(0, static_cast<Index>(points.size()), [&](Index i) {
    const ExperimentConfig& c = points[static_cast<size_t>(i)];
    CostSweepRow& row = rows[static_cast<size_t>(i)];
    row.T = c.T;
    row.a1 = std::abs(c.a1);
    row.B1 = c.B1.norm();
    try {
      const Setup s = make_setup(c);
      row.a1 = s.norms.a1;
      row.B1 = s.norms.B1;
      row.K = cost_factor(s).K;
      const auto res = synthesize_null(control_problem(s), s.y0, row.K, c.cost_constant);
      row.control_cost = res.report.control_cost;
      row.terminal_ratio = res.report.terminal_ratio;
      row.iterations = res.report.iterations;
      row.ok = std::isfinite(row.control_cost);
      row.status = res.report.converged ? "converged" : "unconverged";
    } catch (const std::exception& e) {
      row.ok = false;
      row.status = std::string("failed: ") + e.what();
    }
  });
  return rows;
}

CarlemanAudit audit_carleman(const ExperimentConfig& cfg, CarlemanMode mode,
                             double lambda_multiple) {
  const Setup s = make_setup(cfg, mode == CarlemanMode::Adjoint ? OperatorMode::Full
                                                               : OperatorMode::DiffusionOnly);
  const double threshold =
      mode == CarlemanMode::Adjoint ? adjoint_threshold(s) : carleman_threshold(s);
  const WeightSet ws = weights_for(s, lambda_multiple * threshold);
  const BackwardSources none;

  CarlemanAudit a;
  a.mode = mode;
  a.lambda_multiple = lambda_multiple;
  const int N = cfg.audit_instances;
  a.calibration.resize(static_cast<size_t>(N));
  a.holdout.resize(static_cast<size_t>(N));
  std::vector<double> scaling(static_cast<size_t>(N), 0.0);

  auto instance = [&](std::uint64_t seed, double scale) {
    std::mt19937_64 rng(seed);
    AdaptedField zT = random_terminal(s.mesh(), s.tree(), rng);
    zT.data() *= scale;
    const BackwardSolution b = backward_solve(s.prop, zT);
    return carleman_sides(b, *s.prop, s.region, ws, none, mode, threshold);
  };

  parallel_for(0, 2 * N, [&](Index i) {
    if (i < N) {
      a.calibration[static_cast<size_t>(i)] = instance(cfg.seed + static_cast<std::uint64_t>(i), 1.0);
    } else {
      const Index h = i - N;
      const std::uint64_t seed = cfg.seed + 100000 + static_cast<std::uint64_t>(h);
      CarlemanReport r = instance(seed, 1.0);
      std::mt19937_64 srng(seed ^ 0x9e3779b97f4a7c15ULL);
      const double sc = std::exp(std::uniform_real_distribution<double>(-3.0, 3.0)(srng));
      const CarlemanReport rs = instance(seed, sc);
      scaling[static_cast<size_t>(h)] = std::abs(rs.ratio - r.ratio) / std::abs(r.ratio);
      a.holdout[static_cast<size_t>(h)] = std::move(r);
    }
  });
  for (const auto& r : a.calibration) a.C_star = std::max(a.C_star, r.ratio);
  for (const auto& r : a.holdout) a.holdout_max = std::max(a.holdout_max, r.ratio);
  for (double d : scaling) a.scaling_deviation = std::max(a.scaling_deviation, d);
  a.holdout_ok = a.holdout_max <= cfg.audit_margin * a.C_star;
  return a;
}

std::vector<ObservabilityRow> observability_sweep(const ExperimentConfig& cfg) {
  std::vector<ObservabilityRow> rows;
  for (double T : cfg.sweep_T) {
    ExperimentConfig c = cfg;
    c.T = T;
    const Setup s = make_setup(c);
    AdaptedField zT = terminal_field(s.tree(), s.mesh().num_dofs());
    zT.level(c.n_t).setOnes();
    const BackwardSolution b = backward_solve(s.prop, zT);
    ObservabilityRow row;
    row.T = T;
    row.K = cost_factor(s).K;
    row.report = observability_ratio(b, s.mesh(), s.region, s.tree().dt(), row.K);
    rows.push_back(row);
  }
  return rows;
}

namespace {
std::ostream& prec(std::ostream& os) { return os << std::setprecision(17); }
}  // namespace

void write_carleman_csv(std::ostream& os, const CarlemanAudit& a, bool header) {
  prec(os);
  if (header) os << "instance_id,lambda_multiple,lhs_total,rhs_total,ratio,flag\n";
  auto emit = [&](const std::vector<CarlemanReport>& v, const char* set, size_t base) {
    for (size_t i = 0; i < v.size(); ++i) {
      const auto& r = v[i];
      os << base + i << "," << a.lambda_multiple << "," << r.lhs_total << "," << r.rhs_total << ","
         << r.ratio << "," << (r.below_threshold ? "below-threshold" : set) << "\n";
    }
  };
  emit(a.calibration, "calibration", 0);
  emit(a.holdout, "holdout", a.calibration.size());
}

void write_observability_csv(std::ostream& os, const std::vector<ObservabilityRow>& rows) {
  prec(os) << "T,K,ratio\n";
  for (const auto& r : rows) os << r.T << "," << r.K << "," << r.report.ratio << "\n";
}

void write_cost_csv(std::ostream& os, const std::vector<CostSweepRow>& rows) {
  prec(os) << "T,a1_norm,B1_norm,K,control_cost,terminal_ratio,iterations,status\n";
  for (const auto& r : rows)
    os << r.T << "," << r.a1 << "," << r.B1 << "," << r.K << "," << r.control_cost << ","
       << r.terminal_ratio << "," << r.iterations << "," << r.status << "\n";
}

void write_weight_bounds_csv(std::ostream& os, const std::vector<WeightBound>& bounds, int level) {
  prec(os) << "bound_name,fitted_C,grid_level\n";
  for (const auto& b : bounds) os << b.name << "," << b.fitted_C << "," << level << "\n";
}

void write_trajectory_csv(std::ostream& os, const AdaptedField& f) {
  prec(os) << "level,node_id,dof_id,value\n";
  for (int k = 0; k <= f.last_level(); ++k)
    for (Index j = 0; j < BinomialTree::level_size(k); ++j)
      for (Index d = 0; d < f.width(); ++d) os << k << "," << j << "," << d << "," << f.at(k, j)(d) << "\n";
}

}  // namespace sbc
