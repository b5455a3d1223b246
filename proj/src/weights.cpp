#include "sbc/weights.hpp"

#include "sbc/error.hpp"

#include <cmath>
#include <limits>

namespace sbc {

namespace {
constexpr double kExpCap = 700.0;
}

double capped_exp(double x, bool& clipped) {
  if (x > kExpCap) {
    clipped = true;
    return std::exp(kExpCap);
  }
  if (x < -kExpCap) {
    clipped = true;
    return std::exp(-kExpCap);
  }
  return std::exp(x);
}

PsiField build_psi(const PolarMesh& mesh, double g1_radius, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("psi scale must be positive");
  if (!(g1_radius > 0.0) || g1_radius >= mesh.R)
    throw GeometryError("G1 must be a disk around the center strictly inside the domain");
  PsiField p;
  p.scale = scale;
  p.g1_radius = g1_radius;
  p.R = mesh.R;
  const Index n = mesh.num_dofs();
  p.values.resize(n);
  p.grad.resize(n, 2);
  for (Index d = 0; d < n; ++d) {
    const Point& x = mesh.nodes[d];
    p.values[d] = mesh.is_boundary(d) ? 0.0 : scale * (mesh.R * mesh.R - x.squaredNorm());
    p.grad.row(d) = -2.0 * scale * x.transpose();
  }
  p.sup_norm = p.values.maxCoeff();
  p.normal_slope = Vec::Constant(mesh.num_boundary(), -2.0 * scale * mesh.R);
  p.boundary_slope_bound = 2.0 * scale * mesh.R;

  for (Index d = 0; d < n; ++d) {
    if (!mesh.is_boundary(d) && !(p.values[d] > 0.0))
      throw GeometryError("psi must be positive at interior nodes");
    if (mesh.radius[d] >= g1_radius && !(p.grad.row(d).norm() > 0.0))
      throw GeometryError("grad psi vanishes outside G1");
  }
  return p;
}

std::vector<double> half_step_times(double T, int n_t) {
  if (!(T > 0.0) || n_t < 1) throw InvalidArgument("need T > 0 and n_t >= 1");
  std::vector<double> t(static_cast<size_t>(n_t));
  for (int k = 0; k < n_t; ++k) t[static_cast<size_t>(k)] = (k + 0.5) * T / n_t;
  return t;
}

WeightSet evaluate_weights(const PsiField& psi, double lambda, double mu, double T,
                           std::span<const double> times, double eps_reg) {
  if (!(lambda >= 1.0) || !(mu >= 1.0)) throw InvalidArgument("lambda and mu must be >= 1");
  if (!(T > 0.0)) throw InvalidArgument("T must be positive");
  if (!(eps_reg > 0.0)) throw InvalidArgument("eps_reg must be positive");
  for (double t : times)
    if (!(t > 0.0 && t < T)) throw SingularWeightError("weight sample outside (0, T)");

  WeightSet w;
  w.lambda = lambda;
  w.mu = mu;
  w.T = T;
  w.eps_reg = eps_reg;
  w.psi_sup = psi.sup_norm;
  w.times.assign(times.begin(), times.end());
  const Index nt = static_cast<Index>(times.size());
  const Index n = psi.values.size();
  for (Mat* m : {&w.alpha, &w.phi, &w.ell, &w.theta, &w.theta_eps, &w.log_phi, &w.log_theta_eps})
    m->resize(nt, n);

  const double top = std::exp(2.0 * mu * psi.sup_norm);
  for (Index k = 0; k < nt; ++k) {
    const double t = times[static_cast<size_t>(k)];
    const double tt = t * (T - t);
    const double tte = (t + eps_reg) * (T - t + eps_reg);
    for (Index d = 0; d < n; ++d) {
      const double e = std::exp(mu * psi.values[d]);
      w.alpha(k, d) = (e - top) / tt;
      w.log_phi(k, d) = mu * psi.values[d] - std::log(tt);
      w.phi(k, d) = e / tt;
      w.ell(k, d) = lambda * w.alpha(k, d);
      w.theta(k, d) = capped_exp(w.ell(k, d), w.overflow);
      w.log_theta_eps(k, d) = lambda * (e - top) / tte;
      w.theta_eps(k, d) = capped_exp(w.log_theta_eps(k, d), w.overflow);
    }
  }
  return w;
}

std::vector<WeightBound> verify_weight_bounds(const WeightSet& ws) {
  const Index nt = ws.num_times();
  if (nt < 3) throw InvalidArgument("weight bounds need at least three time samples");
  const double h = ws.times[1] - ws.times[0];
  const double T = ws.T;
  const double top = std::exp(2.0 * ws.mu * ws.psi_sup);

  double c_phi = std::numeric_limits<double>::infinity();
  double c_phit = 0.0, c_phitt = 0.0, c_alt = 0.0, c_altt = 0.0;
  for (Index d = 0; d < ws.phi.cols(); ++d) {
    for (Index k = 0; k < nt; ++k) c_phi = std::min(c_phi, ws.phi(k, d) * T * T);
    for (Index k = 1; k + 1 < nt; ++k) {
      const double p = ws.phi(k, d);
      const double phit = (ws.phi(k + 1, d) - ws.phi(k - 1, d)) / (2 * h);
      const double phitt = (ws.phi(k + 1, d) - 2 * p + ws.phi(k - 1, d)) / (h * h);
      const double alt = (ws.alpha(k + 1, d) - ws.alpha(k - 1, d)) / (2 * h);
      const double altt = (ws.alpha(k + 1, d) - 2 * ws.alpha(k, d) + ws.alpha(k - 1, d)) / (h * h);
      c_phit = std::max(c_phit, std::abs(phit) / (T * p * p));
      c_phitt = std::max(c_phitt, std::abs(phitt) / (T * T * p * p * p));
      c_alt = std::max(c_alt, std::abs(alt) / (T * top * p * p));
      c_altt = std::max(c_altt, std::abs(altt) / (T * T * top * p * p * p));
    }
  }
  std::vector<WeightBound> out = {{"phi_lower", c_phi},
                                  {"phi_t", c_phit},
                                  {"phi_tt", c_phitt},
                                  {"alpha_t", c_alt},
                                  {"alpha_tt", c_altt}};
  for (const auto& b : out)
    if (!std::isfinite(b.fitted_C)) throw Error("weight bound " + b.name + " is not finite");
  return out;
}

double min_lambda_carleman(double T, double mu, double psi_sup, double lambda0) {
  if (!(T > 0.0)) throw InvalidArgument("T must be positive");
  if (!(mu >= 1.0)) throw InvalidArgument("mu must be >= 1");
  if (!(lambda0 >= 1.0)) throw InvalidArgument("lambda0 must be >= 1");
  return lambda0 * (std::exp(2.0 * mu * psi_sup) * T + T * T);
}

double min_lambda_adjoint(double T, const CoefficientNorms& n, double lambda0) {
  if (!(T > 0.0)) throw InvalidArgument("T must be positive");
  if (!(lambda0 > 0.0)) throw InvalidArgument("lambda0 must be positive");
  return lambda0 * (T + T * T * (1.0 + std::cbrt(n.a1 * n.a1) + std::cbrt(n.a2 * n.a2) +
                                 n.B1 * n.B1 + n.B2 * n.B2));
}

CostFactor cost_factor_K(double T, const CoefficientNorms& n) {
  if (!(T > 0.0)) throw InvalidArgument("T must be positive");
  CostFactor c;
  c.components = {1.0,
                  1.0 / T,
                  std::cbrt(n.a1 * n.a1),
                  std::cbrt(n.a2 * n.a2),
                  T * (n.a1 + n.a2),
                  (1.0 + T) * (n.B1 * n.B1 + n.B2 * n.B2)};
  for (double v : c.components) c.K += v;
  return c;
}

}  // namespace sbc
