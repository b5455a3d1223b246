#include "sbc/forward.hpp"

#include "sbc/error.hpp"
#include "sbc/parallel.hpp"

#include <cmath>

namespace sbc {

Propagator::Propagator(PolarMesh mesh, const CoefficientSet& coeffs, const BinomialTree& tree,
                       OperatorMode mode)
    : mesh_(std::move(mesh)), tree_(tree), mode_(mode) {
  const double dt = tree_.dt();
  levels_.resize(static_cast<size_t>(tree_.n_t()));
  for (int k = 0; k < tree_.n_t(); ++k) {
    Level& L = levels_[static_cast<size_t>(k)];
    L.forms = assemble_forms(mesh_, coeffs, (k + 0.5) * dt);
    max_peclet_ = std::max(max_peclet_, L.forms.peclet);
    SpMat op = L.forms.S;
    if (mode_ == OperatorMode::Full) {
      op -= L.forms.C;
      op -= SpMat(L.forms.Rx.asDiagonal());
    }
    L.A = SpMat(L.forms.M.asDiagonal()) + dt * op;
    L.A.makeCompressed();
    L.lu = std::make_unique<Eigen::SparseLU<SpMat>>();
    L.lu->compute(L.A);
    if (L.lu->info() != Eigen::Success)
      throw StepSizeError("implicit step matrix is singular at step " + std::to_string(k));
    SpMat At = L.A.transpose();
    At.makeCompressed();
    L.lu_t = std::make_unique<Eigen::SparseLU<SpMat>>();
    L.lu_t->compute(At);
    if (L.lu_t->info() != Eigen::Success)
      throw StepSizeError("transposed step matrix is singular at step " + std::to_string(k));
  }
}

const Propagator::Level& Propagator::level(int k) const {
  if (k < 0 || k >= n_t()) throw InvalidArgument("time step outside the horizon");
  return levels_[static_cast<size_t>(k)];
}

Vec Propagator::solve(int k, const Vec& rhs) const {
  if (rhs.size() != mesh_.num_dofs()) throw DimensionMismatch("rhs size mismatch");
  return level(k).lu->solve(rhs);
}

Vec Propagator::solve_transposed(int k, const Vec& rhs) const {
  if (rhs.size() != mesh_.num_dofs()) throw DimensionMismatch("rhs size mismatch");
  return level(k).lu_t->solve(rhs);
}

ControlTriple ControlTriple::zeros(Index n_region, Index n_dof, Index n_boundary, int n_t) {
  return {AdaptedField(n_region, n_t - 1), AdaptedField(n_dof, n_t - 1),
          AdaptedField(n_boundary, n_t - 1)};
}

ControlTriple zero_controls(const Propagator& prop, const ControlRegion& region) {
  return ControlTriple::zeros(region.size(), prop.mesh().num_dofs(), prop.mesh().num_boundary(),
                              prop.n_t());
}

Vec density_load(const PolarMesh& mesh, const Vec& bulk, const Vec& surf) {
  return mesh.w_bulk.cwiseProduct(bulk) + mesh.w_surf.cwiseProduct(surf);
}

std::pair<Vec, Vec> forward_step(const Propagator& prop, const ControlRegion& region, int k,
                                 const Vec& y, const Vec& u, const Vec& v1, const Vec& v2,
                                 const Vec& drift_load) {
  const PolarMesh& mesh = prop.mesh();
  const Index n = mesh.num_dofs();
  if (y.size() != n || v1.size() != n || v2.size() != mesh.num_boundary() ||
      u.size() != region.size())
    throw DimensionMismatch("forward step operand sizes");
  const double dt = prop.dt();
  Vec base = prop.forms(k).M.cwiseProduct(y);
  base += dt * mesh.w_bulk.cwiseProduct(region.scatter(u, n));
  if (drift_load.size() == n) base += dt * drift_load;
  else if (drift_load.size() != 0) throw DimensionMismatch("drift load size");
  Vec noise = mesh.w_bulk.cwiseProduct(v1);
  noise.tail(mesh.n_theta) += mesh.w_surf.tail(mesh.n_theta).cwiseProduct(v2);
  noise *= prop.tree().sqrt_dt();
  return {prop.solve(k, base + noise), prop.solve(k, base - noise)};
}

namespace {
void check_controls(const Propagator& prop, const ControlRegion& region, const ControlTriple& c) {
  const int n_t = prop.n_t();
  if (c.u.width() != region.size() || c.v1.width() != prop.mesh().num_dofs() ||
      c.v2.width() != prop.mesh().num_boundary())
    throw DimensionMismatch("control widths do not match the discretization");
  if (c.u.last_level() < n_t - 1 || c.v1.last_level() < n_t - 1 || c.v2.last_level() < n_t - 1)
    throw DimensionMismatch("controls do not cover every time step");
}
}  // namespace

ForwardSolution forward_solve(PropagatorPtr prop, const ControlRegion& region, const Vec& y0,
                              const ControlTriple& controls, const ForwardSource* source) {
  const PolarMesh& mesh = prop->mesh();
  const Index n = mesh.num_dofs();
  if (y0.size() != n) throw DimensionMismatch("initial state size");
  check_controls(*prop, region, controls);
  const int n_t = prop->n_t();
  if (source && (source->bulk.width() != n || source->surf.width() != n ||
                 source->bulk.last_level() < n_t - 1 || source->surf.last_level() < n_t - 1))
    throw DimensionMismatch("forward source shape");

  ForwardSolution sol{AdaptedField(n, n_t), prop};
  sol.Y.at(0, 0) = y0;
  for (int k = 0; k < n_t; ++k) {
    parallel_for(0, BinomialTree::level_size(k), [&](Index j) {
      Vec load;
      if (source) load = density_load(mesh, source->bulk.at(k, j), source->surf.at(k, j));
      auto [up, down] = forward_step(*prop, region, k, sol.Y.at(k, j), controls.u.at(k, j),
                                     controls.v1.at(k, j), controls.v2.at(k, j), load);
      sol.Y.at(k + 1, BinomialTree::child(j, true)) = up;
      sol.Y.at(k + 1, BinomialTree::child(j, false)) = down;
    });
  }
  return sol;
}

std::vector<double> mean_square_norms(const PolarMesh& mesh, const AdaptedField& X) {
  if (X.width() != mesh.num_dofs()) throw DimensionMismatch("state width");
  const Vec M = mesh.mass();
  std::vector<double> out;
  for (int k = 0; k <= X.last_level(); ++k) {
    const auto L = X.level(k);
    out.push_back((L.array().square().colwise() * M.array()).sum() /
                  static_cast<double>(BinomialTree::level_size(k)));
  }
  return out;
}

TerminalRatio terminal_ratio(const ForwardSolution& sol, const Vec& y0) {
  const PolarMesh& mesh = sol.propagator->mesh();
  const double terminal = mean_square_norms(mesh, sol.Y).back();
  const double initial = y0.cwiseProduct(mesh.mass()).dot(y0);
  if (initial == 0.0) return {terminal, true};
  return {terminal / initial, false};
}

double control_energy(const PolarMesh& mesh, const ControlRegion& region,
                      const ControlTriple& c, double dt) {
  const Vec wu = region.gather(mesh.w_bulk);
  const Vec wb = mesh.w_bulk;
  const Vec ws = mesh.w_surf.tail(mesh.n_theta);
  double total = 0.0;
  for (int k = 0; k < c.n_t(); ++k) {
    const double p = 1.0 / static_cast<double>(BinomialTree::level_size(k));
    total += dt * p * (c.u.level(k).array().square().colwise() * wu.array()).sum();
    total += dt * p * (c.v1.level(k).array().square().colwise() * wb.array()).sum();
    total += dt * p * (c.v2.level(k).array().square().colwise() * ws.array()).sum();
  }
  return total;
}

EnergyReport energy_report(const ForwardSolution& sol, const ControlRegion& region,
                           const ControlTriple& controls) {
  const Propagator& prop = *sol.propagator;
  const PolarMesh& mesh = prop.mesh();
  EnergyReport r;
  const auto ms = mean_square_norms(mesh, sol.Y);
  for (size_t k = 0; k < ms.size(); ++k) {
    if (ms[k] > r.sup_mean_square) {
      r.sup_mean_square = ms[k];
      r.sup_level = static_cast<int>(k);
    }
  }
  for (int k = 1; k <= prop.n_t(); ++k) {
    const auto L = sol.Y.level(k);
    const Mat SL = prop.forms(k - 1).S * L;
    r.h1_energy += prop.dt() * (SL.array() * L.array()).sum() /
                   static_cast<double>(BinomialTree::level_size(k));
  }
  const Vec y0 = sol.Y.at(0, 0);
  r.data_norm = y0.cwiseProduct(mesh.mass()).dot(y0) +
                control_energy(mesh, region, controls, prop.dt());
  r.ratio = r.data_norm > 0.0 ? (r.sup_mean_square + r.h1_energy) / r.data_norm : 0.0;
  return r;
}

double sample_terminal_mean_square(const ForwardSolution& sol, int n_paths, std::mt19937_64& rng) {
  if (n_paths < 1) throw InvalidArgument("need at least one path");
  const PolarMesh& mesh = sol.propagator->mesh();
  const int n_t = sol.propagator->n_t();
  const Vec M = mesh.mass();
  std::bernoulli_distribution coin(0.5);
  double acc = 0.0;
  for (int p = 0; p < n_paths; ++p) {
    Index j = 0;
    for (int k = 0; k < n_t; ++k) j = BinomialTree::child(j, coin(rng));
    const auto y = sol.Y.at(n_t, j);
    acc += y.cwiseProduct(M).dot(y);
  }
  return acc / n_paths;
}

}  // namespace sbc
