#pragma once

#include "sbc/config.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sbc {

/// The shipped reference experiment (mirrors configs/reference.cfg).
ExperimentConfig reference_config();

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

CriterionResult check_duality(const ExperimentConfig& ref);
CriterionResult check_backward_oracle(const ExperimentConfig& ref);
CriterionResult check_gradient(const ExperimentConfig& ref);
CriterionResult check_null_synthesis(const ExperimentConfig& ref);
CriterionResult check_observability(const ExperimentConfig& ref);
CriterionResult check_carleman(const ExperimentConfig& ref);
CriterionResult check_cost_sweep(const ExperimentConfig& ref);
CriterionResult check_structural(const ExperimentConfig& ref);

/// All eight checks in order; `on_result` is called as each one finishes.
std::vector<CriterionResult> run_all_criteria(
    const ExperimentConfig& ref, const std::function<void(const CriterionResult&)>& on_result = {});

std::string format_result(const CriterionResult& r);

}  // namespace sbc
