#pragma once

#include "sbc/mesh.hpp"
#include "sbc/stochastics.hpp"

#include <Eigen/SparseLU>

#include <memory>
#include <random>
#include <utility>
#include <vector>

namespace sbc {

enum class OperatorMode {
  Full,           ///< diffusion, convection and reaction
  DiffusionOnly,  ///< S only; lower-order terms enter as explicit sources
};

/// Per-step implicit operators A_k = M + dt (S - C - Rx) with coefficients
/// sampled at the step midpoint, factorized once for forward solves and once
/// (transposed) for backward solves.
class Propagator {
 public:
  Propagator(PolarMesh mesh, const CoefficientSet& coeffs, const BinomialTree& tree,
             OperatorMode mode = OperatorMode::Full);

  const PolarMesh& mesh() const { return mesh_; }
  const BinomialTree& tree() const { return tree_; }
  OperatorMode mode() const { return mode_; }
  int n_t() const { return tree_.n_t(); }
  double dt() const { return tree_.dt(); }

  const SpatialForms& forms(int k) const { return level(k).forms; }
  const SpMat& step_matrix(int k) const { return level(k).A; }
  /// A_k^{-1} rhs
  Vec solve(int k, const Vec& rhs) const;
  /// A_k^{-T} rhs
  Vec solve_transposed(int k, const Vec& rhs) const;

  double max_peclet() const { return max_peclet_; }

 private:
  struct Level {
    SpatialForms forms;
    SpMat A;
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu;
    std::unique_ptr<Eigen::SparseLU<SpMat>> lu_t;
  };
  const Level& level(int k) const;

  PolarMesh mesh_;
  BinomialTree tree_;
  OperatorMode mode_;
  std::vector<Level> levels_;
  double max_peclet_ = 0.0;
};

using PropagatorPtr = std::shared_ptr<const Propagator>;

/// Controls on levels 0..n_t-1: u compact on the G0 dofs, v1 on all dofs,
/// v2 on the boundary ring (n_theta values, in ring order).
struct ControlTriple {
  AdaptedField u;
  AdaptedField v1;
  AdaptedField v2;

  static ControlTriple zeros(Index n_region, Index n_dof, Index n_boundary, int n_t);
  int n_t() const { return u.last_level() + 1; }
};

ControlTriple zero_controls(const Propagator& prop, const ControlRegion& region);

/// Optional extra drift, bulk and surface densities on full dof vectors,
/// levels 0..n_t-1; step k uses the value at its parent node.
struct ForwardSource {
  AdaptedField bulk;
  AdaptedField surf;
};

/// w_bulk .* bulk + w_surf .* surf
Vec density_load(const PolarMesh& mesh, const Vec& bulk, const Vec& surf);

struct ForwardSolution {
  AdaptedField Y;  ///< levels 0..n_t
  PropagatorPtr propagator;
};

/// One implicit step from node state y to its two children.
std::pair<Vec, Vec> forward_step(const Propagator& prop, const ControlRegion& region, int k,
                                 const Vec& y, const Vec& u, const Vec& v1, const Vec& v2,
                                 const Vec& drift_load = Vec());

ForwardSolution forward_solve(PropagatorPtr prop, const ControlRegion& region, const Vec& y0,
                              const ControlTriple& controls, const ForwardSource* source = nullptr);

struct TerminalRatio {
  double value = 0.0;
  bool absolute = false;  ///< y0 = 0: value is E|Y_n|_M^2 itself
};

TerminalRatio terminal_ratio(const ForwardSolution& sol, const Vec& y0);

/// E |X_k|_M^2 for each level of a state field.
std::vector<double> mean_square_norms(const PolarMesh& mesh, const AdaptedField& X);

/// sum_k dt E[ |u|^2_{G0} + |v1|^2 + |v2|^2_Gamma ], the unweighted control energy.
double control_energy(const PolarMesh& mesh, const ControlRegion& region,
                      const ControlTriple& c, double dt);

struct EnergyReport {
  double sup_mean_square = 0.0;
  int sup_level = 0;
  double h1_energy = 0.0;  ///< sum_k dt E <S Y_k, Y_k>, k = 1..n_t
  double data_norm = 0.0;  ///< |y0|_M^2 + control energy
  double ratio = 0.0;      ///< (sup + h1) / data, 0 when data vanish
};

EnergyReport energy_report(const ForwardSolution& sol, const ControlRegion& region,
                           const ControlTriple& controls);

/// Monte Carlo demonstration: samples paths through the tree and averages
/// |Y_n|_M^2 over them.
double sample_terminal_mean_square(const ForwardSolution& sol, int n_paths, std::mt19937_64& rng);

}  // namespace sbc
