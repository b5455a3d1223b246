#pragma once

#include "sbc/backward.hpp"
#include "sbc/weights.hpp"

#include <array>
#include <random>
#include <string>
#include <vector>

namespace sbc {

struct DualityTerms {
  double terminal = 0.0;     ///< E <Y_n, z_n>_M
  double initial = 0.0;      ///< <Y_0, z_0>_M
  double controls = 0.0;     ///< sum dt E[<z, u>_G0 + <Zm, v1> + <Zs, v2>_Gamma]
  double sources = 0.0;      ///< forward drift and backward load contributions
  double gap = 0.0;          ///< |residual| / largest participating term
};

/// Residual of E<Y_n, z_n> - <Y_0, z_0> = sum dt E[...] for solutions on the
/// same propagator. Optional sources must be the ones the solutions used.
DualityTerms duality_terms(const ForwardSolution& fsol, const BackwardSolution& bsol,
                           const ControlRegion& region, const ControlTriple& controls,
                           const ForwardSource* fsource = nullptr,
                           const BackwardSources* bsources = nullptr);

double duality_gap(const ForwardSolution& fsol, const BackwardSolution& bsol,
                   const ControlRegion& region, const ControlTriple& controls);

enum class CarlemanMode {
  Full,          ///< all sources, general parameters
  NoDivergence,  ///< F = F_Gamma = 0 variant with its own mu powers
  Adjoint,       ///< lower-order terms in the operator, Z terms weighted like z
};

const char* to_string(CarlemanMode m);

struct CarlemanReport {
  CarlemanMode mode = CarlemanMode::Full;
  std::array<double, 4> lhs{};  ///< bulk z^2, surface z^2, bulk |grad z|^2, surface |grad z|^2
  std::vector<std::pair<std::string, double>> rhs;
  double lhs_total = 0.0;
  double rhs_total = 0.0;
  double ratio = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
  double threshold = 0.0;
  double threshold_multiple = 0.0;
  bool below_threshold = false;
  /// Every term is reported times exp(-log_scale) so large weights stay finite.
  double log_scale = 0.0;
};

/// Weighted integrals of both sides of the Carleman inequality. Time index k
/// pairs z_k, Z_k (level k) with the weights at t_{k+1/2}; sources use the
/// child level k+1 that drives step k. `threshold` is the mode's minimal
/// lambda; runs below it are flagged, never rejected.
CarlemanReport carleman_sides(const BackwardSolution& bsol, const Propagator& prop,
                              const ControlRegion& region, const WeightSet& ws,
                              const BackwardSources& sources, CarlemanMode mode,
                              double threshold);

struct ObservabilityReport {
  double initial_norm = 0.0;
  double observation = 0.0;
  double ratio = 0.0;
  double K = 0.0;
  double calibrated_C = 0.0;  ///< ln(ratio) / K, the smallest C with ratio <= e^{C K}
  bool degenerate = false;    ///< zero terminal data
  bool failure = false;       ///< zero observation with nonzero initial norm
};

ObservabilityReport observability_ratio(const BackwardSolution& bsol, const PolarMesh& mesh,
                                        const ControlRegion& region, double dt, double K);

struct GronwallReport {
  std::vector<double> ratios;  ///< |z_0|^2 / E|z_k|^2 per level
  double K2 = 0.0;
  double c_star = 0.0;
  bool degenerate = false;
};

GronwallReport gronwall_energy_check(const BackwardSolution& bsol, const PolarMesh& mesh,
                                     const CoefficientNorms& norms, double T);

/// Gaussian dof vector smoothed by `sweeps` passes of mass-weighted
/// neighbour averaging.
Vec smooth_random_vector(const PolarMesh& mesh, std::mt19937_64& rng, int sweeps = 3);

/// Random leaf data: an independent smoothed field at every leaf.
AdaptedField random_terminal(const PolarMesh& mesh, const BinomialTree& tree,
                             std::mt19937_64& rng, int sweeps = 3);

}  // namespace sbc
