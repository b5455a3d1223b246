#include "sbc/analysis.hpp"

#include "sbc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace sbc {

namespace {

double level_prob(int k) { return 1.0 / static_cast<double>(BinomialTree::level_size(k)); }

}  // namespace

DualityTerms duality_terms(const ForwardSolution& fsol, const BackwardSolution& bsol,
                           const ControlRegion& region, const ControlTriple& controls,
                           const ForwardSource* fsource, const BackwardSources* bsources) {
  const Propagator& prop = *fsol.propagator;
  const PolarMesh& mesh = prop.mesh();
  const int n_t = prop.n_t();
  if (fsol.Y.width() != bsol.z.width() || fsol.Y.last_level() != bsol.z.last_level() ||
      bsol.z.last_level() != n_t)
    throw DimensionMismatch("forward and backward solutions live on different discretizations");
  const Vec M = mesh.mass();
  const double dt = prop.dt();
  const Vec wu = region.gather(mesh.w_bulk);
  const Vec wb = mesh.w_bulk;
  const Vec ws = mesh.w_surf.tail(mesh.n_theta);

  DualityTerms d;
  for (Index j = 0; j < BinomialTree::level_size(n_t); ++j)
    d.terminal += level_prob(n_t) * fsol.Y.at(n_t, j).cwiseProduct(M).dot(bsol.z.at(n_t, j));
  d.initial = fsol.Y.at(0, 0).cwiseProduct(M).dot(bsol.z.at(0, 0));

  for (int k = 0; k < n_t; ++k) {
    const double p = dt * level_prob(k);
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      const Vec zk = bsol.z.at(k, j);
      d.controls += p * region.gather(zk).cwiseProduct(wu).dot(controls.u.at(k, j));
      d.controls += p * bsol.Zm.at(k, j).cwiseProduct(wb).dot(controls.v1.at(k, j));
      d.controls += p * bsol.Zs.at(k, j).cwiseProduct(ws).dot(controls.v2.at(k, j));
      if (fsource)
        d.sources += p * zk.dot(density_load(mesh, fsource->bulk.at(k, j), fsource->surf.at(k, j)));
    }
    if (bsources && !bsources->empty()) {
      const double q = dt * level_prob(k + 1);
      for (Index j = 0; j < BinomialTree::level_size(k + 1); ++j)
        d.sources -= q * dual_load(mesh, *bsources, k + 1, j).dot(fsol.Y.at(k + 1, j));
    }
  }
  const double residual = d.terminal - d.initial - d.controls - d.sources;
  const double scale = std::max({std::abs(d.terminal), std::abs(d.initial), std::abs(d.controls),
                                 std::abs(d.sources)});
  d.gap = scale > 0.0 ? std::abs(residual) / scale : std::abs(residual);
  return d;
}

double duality_gap(const ForwardSolution& fsol, const BackwardSolution& bsol,
                   const ControlRegion& region, const ControlTriple& controls) {
  return duality_terms(fsol, bsol, region, controls).gap;
}

const char* to_string(CarlemanMode m) {
  switch (m) {
    case CarlemanMode::Full: return "full";
    case CarlemanMode::NoDivergence: return "no-divergence";
    case CarlemanMode::Adjoint: return "adjoint";
  }
  return "?";
}

CarlemanReport carleman_sides(const BackwardSolution& bsol, const Propagator& prop,
                              const ControlRegion& region, const WeightSet& ws,
                              const BackwardSources& sources, CarlemanMode mode,
                              double threshold) {
  const PolarMesh& mesh = prop.mesh();
  const int n_t = prop.n_t();
  const Index n = mesh.num_dofs();
  if (ws.num_times() != n_t || ws.phi.cols() != n)
    throw DimensionMismatch("weights are not sampled on the solver's half-step grid");
  if (bsol.z.width() != n || bsol.z.last_level() != n_t)
    throw DimensionMismatch("backward solution does not match the propagator");

  const double lam = ws.lambda, mu = ws.mu, dt = prop.dt();
  CarlemanReport r;
  r.mode = mode;
  r.lambda = lam;
  r.mu = mu;
  r.threshold = threshold;
  r.threshold_multiple = threshold > 0.0 ? lam / threshold : std::numeric_limits<double>::infinity();
  r.below_threshold = lam < threshold;

  // Common shift keeps exp() finite; it cancels in the ratio.
  const Mat base2 = 2.0 * ws.ell;
  r.log_scale = (base2 + 3.0 * ws.log_phi).maxCoeff();

  // log of theta^2 phi^p at (k, dof), shifted
  auto logw = [&](int k, Index d, double p) { return base2(k, d) + p * ws.log_phi(k, d) - r.log_scale; };
  auto node_w = [&](int k, double p) {
    Vec w(n);
    for (Index d = 0; d < n; ++d) w[d] = std::exp(logw(k, d, p));
    return w;
  };
  auto tri_w = [&](int k, double p) {
    Vec w(2 * mesh.num_triangles());
    for (Index t = 0; t < mesh.num_triangles(); ++t) {
      const auto& tri = mesh.triangles[static_cast<size_t>(t)];
      const double m = (logw(k, tri[0], p) + logw(k, tri[1], p) + logw(k, tri[2], p)) / 3.0;
      w[2 * t] = w[2 * t + 1] = std::exp(m) * mesh.triangle_area[t];
    }
    return w;
  };
  auto edge_w = [&](int k, double p) {
    Vec w(mesh.num_boundary());
    for (Index e = 0; e < mesh.num_boundary(); ++e) {
      const auto [a, b] = mesh.boundary_edges[static_cast<size_t>(e)];
      w[e] = std::exp(0.5 * (logw(k, a, p) + logw(k, b, p))) * mesh.edge_length;
    }
    return w;
  };

  double c_bz, c_sz, c_bg, c_sg;
  switch (mode) {
    case CarlemanMode::Full:
      c_bz = lam * lam * lam * std::pow(mu, 4); c_sz = lam * lam * lam * std::pow(mu, 3);
      c_bg = lam * mu * mu; c_sg = lam * mu * mu;
      break;
    case CarlemanMode::NoDivergence:
      c_bz = lam * lam * lam * std::pow(mu, 4); c_sz = lam * lam * lam * std::pow(mu, 3);
      c_bg = lam * mu * mu; c_sg = lam * mu;
      break;
    case CarlemanMode::Adjoint:
    default:
      c_bz = c_sz = lam * lam * lam;
      c_bg = c_sg = lam;
      break;
  }
  const double c_loc = mode == CarlemanMode::Adjoint ? lam * lam * lam : lam * lam * lam * std::pow(mu, 4);

  const bool use_sources = mode != CarlemanMode::Adjoint;
  const bool use_div = mode == CarlemanMode::Full;
  double loc = 0, f1 = 0, f2 = 0, fv = 0, fs = 0, zm = 0, zs = 0;
  const Vec wb = mesh.w_bulk, wsf = mesh.w_surf;
  const Vec ind = region.indicator;

  for (int k = 0; k < n_t; ++k) {
    const double p = dt * level_prob(k);
    const Vec w3 = node_w(k, 3.0);
    const Vec w1 = node_w(k, 1.0);
    const Vec w2 = node_w(k, 2.0);
    const Vec tw1 = tri_w(k, 1.0);
    const Vec ew1 = edge_w(k, 1.0);
    const Vec zw = mode == CarlemanMode::Adjoint ? w3 : w2;
    const auto Z = bsol.z.level(k);
    const Mat G = mesh.grad * Z;
    const Mat D = mesh.surface_grad * Z;
    const Mat Z2 = Z.array().square();
    r.lhs[0] += p * c_bz * (Z2.transpose() * w3.cwiseProduct(wb)).sum();
    r.lhs[1] += p * c_sz * (Z2.transpose() * w3.cwiseProduct(wsf)).sum();
    r.lhs[2] += p * c_bg * (G.array().square().matrix().transpose() * tw1).sum();
    r.lhs[3] += p * c_sg * (D.array().square().matrix().transpose() * ew1).sum();
    loc += p * c_loc * (Z2.transpose() * w3.cwiseProduct(wb).cwiseProduct(ind)).sum();
    const Mat Zm2 = bsol.Zm.level(k).array().square();
    const Mat Zs2 = bsol.Zs.level(k).array().square();
    zm += p * (Zm2.transpose() * zw.cwiseProduct(wb)).sum();
    zs += p * (Zs2.transpose() * Vec(zw.cwiseProduct(wsf).tail(mesh.n_theta))).sum();

    if (use_sources) {
      const double q = dt * level_prob(k + 1);
      const Vec w0 = node_w(k, 0.0);
      if (sources.F1)
        f1 += q * (sources.F1->level(k + 1).array().square().matrix().transpose() * w0.cwiseProduct(wb)).sum();
      if (sources.F2)
        f2 += q * (sources.F2->level(k + 1).array().square().matrix().transpose() * w0.cwiseProduct(wsf)).sum();
      if (use_div && sources.Fvec)
        fv += q * (sources.Fvec->level(k + 1).array().square().matrix().transpose() * tri_w(k, 2.0)).sum();
      if (use_div && sources.Fsurf)
        fs += q * (sources.Fsurf->level(k + 1).array().square().matrix().transpose() * edge_w(k, 2.0)).sum();
    }
  }

  const double l2m2 = lam * lam * mu * mu;
  switch (mode) {
    case CarlemanMode::Full:
      r.rhs = {{"local_z", loc}, {"F1", f1}, {"F2", mu * f2}, {"F", l2m2 * fv},
               {"F_Gamma", l2m2 * fs}, {"Z", l2m2 * zm}, {"Z_hat", l2m2 * zs}};
      break;
    case CarlemanMode::NoDivergence:
      r.rhs = {{"local_z", loc}, {"F1", f1}, {"F2", f2}, {"Z", l2m2 * zm},
               {"Z_hat", lam * lam * mu * zs}};
      break;
    case CarlemanMode::Adjoint:
      r.rhs = {{"local_z", loc}, {"Z", lam * lam * lam * zm}, {"Z_hat", lam * lam * lam * zs}};
      break;
  }
  for (double v : r.lhs) r.lhs_total += v;
  for (const auto& [name, v] : r.rhs) r.rhs_total += v;
  if (r.lhs_total == 0.0 && r.rhs_total == 0.0) r.ratio = 0.0;
  else if (r.rhs_total == 0.0) r.ratio = std::numeric_limits<double>::infinity();
  else r.ratio = r.lhs_total / r.rhs_total;
  return r;
}

ObservabilityReport observability_ratio(const BackwardSolution& bsol, const PolarMesh& mesh,
                                        const ControlRegion& region, double dt, double K) {
  ObservabilityReport r;
  r.K = K;
  const Vec M = mesh.mass();
  const Vec z0 = bsol.z.at(0, 0);
  r.initial_norm = z0.cwiseProduct(M).dot(z0);
  const Vec wg = mesh.w_bulk.cwiseProduct(region.indicator);
  const Vec wb = mesh.w_bulk;
  const Vec ws = mesh.w_surf.tail(mesh.n_theta);
  for (int k = 0; k <= bsol.Zm.last_level(); ++k) {
    const double p = dt * level_prob(k);
    r.observation += p * (bsol.z.level(k).array().square().colwise() * wg.array()).sum();
    r.observation += p * (bsol.Zm.level(k).array().square().colwise() * wb.array()).sum();
    r.observation += p * (bsol.Zs.level(k).array().square().colwise() * ws.array()).sum();
  }
  const double terminal = mean_square_norms(mesh, bsol.z).back();
  r.degenerate = terminal == 0.0;
  if (r.observation > 0.0) {
    r.ratio = r.initial_norm / r.observation;
    r.calibrated_C = K > 0.0 && r.ratio > 0.0 ? std::log(r.ratio) / K : 0.0;
  } else {
    r.failure = r.initial_norm > 0.0;
  }
  return r;
}

GronwallReport gronwall_energy_check(const BackwardSolution& bsol, const PolarMesh& mesh,
                                     const CoefficientNorms& norms, double T) {
  GronwallReport g;
  g.K2 = norms.a1 + norms.a2 + norms.B1 * norms.B1 + norms.B2 * norms.B2;
  const auto ms = mean_square_norms(mesh, bsol.z);
  if (ms.back() == 0.0) {
    g.degenerate = true;
    return g;
  }
  double worst = -std::numeric_limits<double>::infinity();
  for (double m : ms) {
    const double ratio = m > 0.0 ? ms.front() / m : std::numeric_limits<double>::infinity();
    g.ratios.push_back(ratio);
    worst = std::max(worst, std::log(ratio));
  }
  if (g.K2 > 0.0) g.c_star = worst / (T * g.K2);
  else g.c_star = worst <= 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  if (!std::isfinite(g.c_star)) throw Error("Gronwall constant is not finite");
  return g;
}

Vec smooth_random_vector(const PolarMesh& mesh, std::mt19937_64& rng, int sweeps) {
  const Index n = mesh.num_dofs();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = gauss(rng);

  std::vector<std::set<Index>> nbr(static_cast<size_t>(n));
  for (const auto& tri : mesh.triangles)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        if (a != b) nbr[static_cast<size_t>(tri[a])].insert(tri[b]);
  const Vec M = mesh.mass();
  for (int s = 0; s < sweeps; ++s) {
    Vec next(n);
    for (Index i = 0; i < n; ++i) {
      double num = M[i] * v[i], den = M[i];
      for (Index j : nbr[static_cast<size_t>(i)]) {
        num += M[j] * v[j];
        den += M[j];
      }
      next[i] = num / den;
    }
    v = next;
  }
  return v;
}

AdaptedField random_terminal(const PolarMesh& mesh, const BinomialTree& tree,
                             std::mt19937_64& rng, int sweeps) {
  AdaptedField zT = terminal_field(tree, mesh.num_dofs());
  for (Index j = 0; j < BinomialTree::level_size(tree.n_t()); ++j)
    zT.at(tree.n_t(), j) = smooth_random_vector(mesh, rng, sweeps);
  return zT;
}

}  // namespace sbc
