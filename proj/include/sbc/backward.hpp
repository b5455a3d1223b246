#pragma once

#include "sbc/forward.hpp"

#include <optional>
#include <tuple>

namespace sbc {

/// Drift data of the backward equation, all optional. F1/F2 are bulk and
/// surface densities on full dof vectors; Fvec is a bulk vector field per
/// triangle as (x, y) pairs; Fsurf is a tangential field per boundary edge.
/// Fields live on levels 0..n_t and the value at level k+1 (at each child)
/// drives step k.
struct BackwardSources {
  std::optional<AdaptedField> F1;
  std::optional<AdaptedField> F2;
  std::optional<AdaptedField> Fvec;
  std::optional<AdaptedField> Fsurf;

  bool empty() const { return !F1 && !F2 && !Fvec && !Fsurf; }
};

/// Load vector d realizing the sources at node (k, j):
///   d.v = -<F1, v> - <F2, v>_Gamma - <div F, v> - <div_Gamma F_Gamma, v>_Gamma
/// so that the backward step solves A^T z = M z_next + dt d.
Vec dual_load(const PolarMesh& mesh, const BackwardSources& src, int k, Index j);

struct BackwardSolution {
  AdaptedField z;   ///< levels 0..n_t
  AdaptedField Zm;  ///< bulk integrand on all dofs, levels 0..n_t-1
  AdaptedField Zs;  ///< surface integrand on the boundary ring, levels 0..n_t-1
  double wellposedness_ratio = 0.0;  ///< (sup E|z_k|^2 + sum dt E|Z|^2) / E|z_T|^2
};

/// Node update: with q+- = A_k^{-T} (M z_child+- + dt d+-),
/// z = (q+ + q-)/2 and Z = (q+ - q-)/(2 sqrt dt). Zs is the boundary slice of Z.
std::tuple<Vec, Vec, Vec> backward_step(const Propagator& prop, int k, const Vec& z_up,
                                        const Vec& z_down, const Vec& load_up = Vec(),
                                        const Vec& load_down = Vec());

/// zT: field whose level n_t holds the terminal data (any lower levels are ignored).
BackwardSolution backward_solve(PropagatorPtr prop, const AdaptedField& zT,
                                const BackwardSources& sources = {});

/// Brute force: assembles every step equation of the tree into one dense
/// system in the unknowns (z, Z) of all non-leaf nodes and solves it with LU.
BackwardSolution oracle_backward_dense(const Propagator& prop, const AdaptedField& zT,
                                       const BackwardSources& sources = {});

/// Terminal data held on level n_t of a field with levels 0..n_t.
AdaptedField terminal_field(const BinomialTree& tree, Index width);

}  // namespace sbc
