#pragma once

#include "sbc/analysis.hpp"
#include "sbc/config.hpp"
#include "sbc/control.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace sbc {

/// Discretization and data built from a validated configuration.
struct Setup {
  ExperimentConfig cfg;
  CoefficientSet coeffs;
  ControlRegion region;
  PropagatorPtr prop;
  PsiField psi;
  CoefficientNorms norms;  ///< sup norms over the step-midpoint samples
  Vec y0;

  const PolarMesh& mesh() const { return prop->mesh(); }
  const BinomialTree& tree() const { return prop->tree(); }
};

Setup make_setup(const ExperimentConfig& cfg, OperatorMode mode = OperatorMode::Full);

/// amplitude * exp(-|x - center|^2 / width) at every dof.
Vec gaussian_bump(const PolarMesh& mesh, const Point& center, double width, double amplitude);

double adjoint_threshold(const Setup& s);
double carleman_threshold(const Setup& s);
WeightSet weights_for(const Setup& s, double lambda);
CostFactor cost_factor(const Setup& s);

/// J_eps problem at lambda = lambda_factor * adjoint threshold.
ControlProblem control_problem(const Setup& s, bool include_state_term = true);

std::vector<CostSweepRow> sweep_cost(const ExperimentConfig& cfg);

struct CarlemanAudit {
  CarlemanMode mode = CarlemanMode::Adjoint;
  double lambda_multiple = 0.0;
  std::vector<CarlemanReport> calibration;
  std::vector<CarlemanReport> holdout;
  double C_star = 0.0;
  double holdout_max = 0.0;
  bool holdout_ok = false;
  double scaling_deviation = 0.0;  ///< max relative ratio change under zT -> s zT
};

/// Calibrate-then-holdout protocol: C* = max ratio over the calibration
/// instances, holdout instances must satisfy ratio <= margin * C*.
CarlemanAudit audit_carleman(const ExperimentConfig& cfg, CarlemanMode mode,
                             double lambda_multiple);

struct ObservabilityRow {
  double T = 0.0;
  double K = 0.0;
  ObservabilityReport report;
};

/// zT = 1 on every leaf, one row per T in the sweep list.
std::vector<ObservabilityRow> observability_sweep(const ExperimentConfig& cfg);

void write_carleman_csv(std::ostream& os, const CarlemanAudit& audit, bool header = true);
void write_observability_csv(std::ostream& os, const std::vector<ObservabilityRow>& rows);
void write_cost_csv(std::ostream& os, const std::vector<CostSweepRow>& rows);
void write_weight_bounds_csv(std::ostream& os, const std::vector<WeightBound>& bounds, int level);
/// Columns level, node_id, dof_id, value.
void write_trajectory_csv(std::ostream& os, const AdaptedField& field);

}  // namespace sbc
