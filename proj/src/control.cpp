#include "sbc/control.hpp"

#include "sbc/error.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace sbc {

namespace {

double level_prob(int k) { return 1.0 / static_cast<double>(BinomialTree::level_size(k)); }

void scale_levels(AdaptedField& f, const Mat& rho, int power) {
  for (int k = 0; k <= f.last_level(); ++k) {
    const Vec r = power > 0 ? Vec(rho.col(k)) : Vec(rho.col(k).cwiseInverse());
    f.level(k) = (f.level(k).array().colwise() * r.array()).matrix();
  }
}

double weighted_level_dot(const AdaptedField& a, const AdaptedField& b, const Vec& w, double dt) {
  double s = 0.0;
  for (int k = 0; k <= a.last_level(); ++k)
    s += dt * level_prob(k) *
         ((a.level(k).array() * b.level(k).array()).colwise() * w.array()).sum();
  return s;
}

}  // namespace

ControlProblem make_control_problem(PropagatorPtr prop, ControlRegion region, WeightSet weights,
                                    PenaltyConfig penalty, bool include_state_term) {
  if (!(penalty.eps > 0.0) || !(penalty.eps_reg > 0.0) || !(penalty.cg_tol > 0.0))
    throw InvalidArgument("penalty parameters must be positive");
  if (penalty.cg_max_iter < 1) throw InvalidArgument("cg_max_iter must be positive");
  const PolarMesh& mesh = prop->mesh();
  const int n_t = prop->n_t();
  if (weights.num_times() != n_t || weights.phi.cols() != mesh.num_dofs())
    throw DimensionMismatch("weights must be sampled at the solver's half steps");

  ControlProblem P;
  P.prop = std::move(prop);
  P.region = std::move(region);
  P.weights = std::move(weights);
  P.penalty = penalty;
  P.include_state_term = include_state_term;

  const WeightSet& w = P.weights;
  const double ll = std::log(w.lambda), lm = std::log(w.mu);
  const Index n = mesh.num_dofs();
  Mat ru(n, n_t), r1(n, n_t);
  P.state_w.resize(n, n_t);
  for (int k = 0; k < n_t; ++k) {
    for (Index d = 0; d < n; ++d) {
      const double lt = w.ell(k, d), lp = w.log_phi(k, d);
      ru(d, k) = capped_exp(-3 * ll - 4 * lm - 2 * lt - 3 * lp, P.overflow);
      r1(d, k) = capped_exp(-2 * ll - 2 * lm - 2 * lt - 2 * lp, P.overflow);
      P.state_w(d, k) = capped_exp(-2.0 * w.log_theta_eps(k, d), P.overflow);
    }
  }
  P.rho_u.resize(P.region.size(), n_t);
  for (Index i = 0; i < P.region.size(); ++i) P.rho_u.row(i) = ru.row(P.region.dofs[static_cast<size_t>(i)]);
  P.rho_1 = r1;
  P.rho_2 = r1.bottomRows(mesh.n_theta);
  return P;
}

double control_dot(const ControlProblem& P, const ControlTriple& a, const ControlTriple& b) {
  const PolarMesh& mesh = P.prop->mesh();
  const double dt = P.prop->dt();
  return weighted_level_dot(a.u, b.u, P.region.gather(mesh.w_bulk), dt) +
         weighted_level_dot(a.v1, b.v1, mesh.w_bulk, dt) +
         weighted_level_dot(a.v2, b.v2, Vec(mesh.w_surf.tail(mesh.n_theta)), dt);
}

void control_axpy(double alpha, const ControlTriple& x, ControlTriple& y) {
  y.u.data() += alpha * x.u.data();
  y.v1.data() += alpha * x.v1.data();
  y.v2.data() += alpha * x.v2.data();
}

ControlTriple apply_rho(const ControlProblem& P, const ControlTriple& c, int power) {
  ControlTriple out = c;
  scale_levels(out.u, P.rho_u, power);
  scale_levels(out.v1, P.rho_1, power);
  scale_levels(out.v2, P.rho_2, power);
  return out;
}

ControlTriple unit_weighted_energy(const ControlProblem& P, const ControlTriple& c) {
  ControlTriple out = c;
  auto half = [](AdaptedField& f, const Mat& rho) {
    for (int k = 0; k <= f.last_level(); ++k)
      f.level(k) = (f.level(k).array().colwise() * rho.col(k).array().rsqrt()).matrix();
  };
  half(out.u, P.rho_u);
  half(out.v1, P.rho_1);
  half(out.v2, P.rho_2);
  return out;
}

JepsEvaluation jeps_value_and_gradient(const ControlProblem& P, const ControlTriple& controls,
                                       const Vec& y0, const AdaptedField* target) {
  const Propagator& prop = *P.prop;
  const PolarMesh& mesh = prop.mesh();
  const int n_t = prop.n_t();
  const Index n = mesh.num_dofs();
  const double dt = prop.dt();
  const double eps = P.penalty.eps;
  if (target && (target->width() != n || target->last_level() != n_t))
    throw DimensionMismatch("target must be a leaf-indexed state field");

  JepsEvaluation ev;
  const ControlTriple weighted = apply_rho(P, controls, 1);
  ev.control_term = 0.5 * control_dot(P, weighted, controls);
  ev.forward = forward_solve(P.prop, P.region, y0, controls);
  const AdaptedField& Y = ev.forward.Y;
  const Vec M = mesh.mass();

  AdaptedField zT = terminal_field(prop.tree(), n);
  zT.level(n_t) = Y.level(n_t);
  if (target) zT.level(n_t) -= target->level(n_t);
  ev.terminal_term = 0.5 / eps * (zT.level(n_t).array().square().colwise() * M.array()).sum() *
                     level_prob(n_t);
  zT.data() /= eps;

  BackwardSources src;
  if (P.include_state_term) {
    AdaptedField F(n, n_t);
    for (int k = 0; k < n_t; ++k) {
      const auto Yk = Y.level(k + 1);
      const Vec& sw = P.state_w.col(k);
      ev.state_term += 0.5 * dt * level_prob(k + 1) *
                       (Yk.array().square().colwise() * (M.cwiseProduct(sw)).array()).sum();
      F.level(k + 1) = -(Yk.array().colwise() * sw.array()).matrix();
    }
    src.F1 = F;
    src.F2 = std::move(F);
  }
  ev.value = ev.control_term + ev.state_term + ev.terminal_term;
  ev.backward = backward_solve(P.prop, zT, src);

  ev.gradient = weighted;
  for (int k = 0; k < n_t; ++k) {
    for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
      ev.gradient.u.at(k, j) += P.region.gather(ev.backward.z.at(k, j));
      ev.gradient.v1.at(k, j) += ev.backward.Zm.at(k, j);
      ev.gradient.v2.at(k, j) += ev.backward.Zs.at(k, j);
    }
  }
  return ev;
}

namespace {

SynthesisResult run_cg(const ControlProblem& P, const Vec& y0, const AdaptedField* target,
                       double K, double cost_constant) {
  const Propagator& prop = *P.prop;
  const PolarMesh& mesh = prop.mesh();
  SynthesisResult res;
  HumReport& rep = res.report;
  rep.K = K;
  rep.cost_constant = cost_constant;
  rep.overflow = P.overflow || P.weights.overflow;

  ControlTriple c = zero_controls(prop, P.region);
  const Vec zero_y = Vec::Zero(mesh.num_dofs());
  JepsEvaluation ev = jeps_value_and_gradient(P, c, y0, target);
  rep.J0 = ev.value;
  double J = ev.value;
  rep.j_history.push_back(J);

  ControlTriple r = ev.gradient;
  r.u.data() *= -1.0;
  r.v1.data() *= -1.0;
  r.v2.data() *= -1.0;
  ControlTriple z = apply_rho(P, r, -1);
  double rz = control_dot(P, r, z);
  const double rz0 = rz;
  ControlTriple p = z;

  int it = 0;
  if (rz0 > 0.0) {
    for (; it < P.penalty.cg_max_iter; ++it) {
      if (std::sqrt(rz / rz0) <= P.penalty.cg_tol) {
        rep.converged = true;
        break;
      }
      // Hessian action: gradient of the homogeneous problem.
      const ControlTriple Hp = jeps_value_and_gradient(P, p, zero_y, nullptr).gradient;
      const double pHp = control_dot(P, p, Hp);
      if (!(pHp > 0.0)) {
        rep.monotone = false;
        break;
      }
      const double alpha = rz / pHp;
      control_axpy(alpha, p, c);
      control_axpy(-alpha, Hp, r);
      const double J_next = J - 0.5 * alpha * rz;
      if (J_next > J) rep.monotone = false;
      J = J_next;
      rep.j_history.push_back(J);
      z = apply_rho(P, r, -1);
      const double rz_new = control_dot(P, r, z);
      const double beta = rz_new / rz;
      rz = rz_new;
      ControlTriple next = z;
      control_axpy(beta, p, next);
      p = std::move(next);
    }
    if (!rep.converged && std::sqrt(rz / rz0) <= P.penalty.cg_tol) rep.converged = true;
  } else {
    rep.converged = true;
  }
  rep.iterations = it;
  rep.final_gradient_norm = rz0 > 0.0 ? std::sqrt(std::max(rz, 0.0) / rz0) : 0.0;

  // Re-simulate with the synthesized controls.
  ev = jeps_value_and_gradient(P, c, y0, target);
  rep.J = ev.value;
  const TerminalRatio tr = terminal_ratio(ev.forward, y0);
  rep.terminal_ratio = tr.value;
  rep.terminal_absolute = tr.absolute;
  rep.terminal_distance = 2.0 * P.penalty.eps * ev.terminal_term;
  rep.target_met = rep.terminal_distance <= P.penalty.eps;
  rep.control_cost = control_energy(mesh, P.region, c, prop.dt());
  rep.weighted_cost = 2.0 * ev.control_term;
  const double cn = std::sqrt(control_dot(P, c, c));
  const ControlTriple pg = apply_rho(P, ev.gradient, -1);
  rep.stationarity_residual = cn > 0.0 ? std::sqrt(control_dot(P, pg, pg)) / cn : 0.0;
  const double y0n = y0.cwiseProduct(mesh.mass()).dot(y0);
  rep.bound_value = std::exp(cost_constant * K) * y0n;
  rep.cost_exponent = (y0n > 0.0 && rep.control_cost > 0.0 && K > 0.0)
                          ? std::log(rep.control_cost / y0n) / K
                          : 0.0;
  res.controls = std::move(c);
  return res;
}

}  // namespace

SynthesisResult synthesize_null(const ControlProblem& P, const Vec& y0, double K,
                                double cost_constant) {
  return run_cg(P, y0, nullptr, K, cost_constant);
}

SynthesisResult synthesize_approximate(const ControlProblem& P, const Vec& y0,
                                       const AdaptedField& target, double K,
                                       double cost_constant) {
  return run_cg(P, y0, &target, K, cost_constant);
}

std::string HumReport::to_text() const {
  std::ostringstream os;
  os << std::setprecision(12);
  os << "iterations = " << iterations << "\n"
     << "converged = " << (converged ? "true" : "false") << "\n"
     << "monotone = " << (monotone ? "true" : "false") << "\n"
     << "final_gradient_norm = " << final_gradient_norm << "\n"
     << "terminal_ratio = " << terminal_ratio << "\n"
     << "terminal_absolute = " << (terminal_absolute ? "true" : "false") << "\n"
     << "terminal_distance = " << terminal_distance << "\n"
     << "control_cost = " << control_cost << "\n"
     << "weighted_cost = " << weighted_cost << "\n"
     << "J = " << J << "\n"
     << "J0 = " << J0 << "\n"
     << "K = " << K << "\n"
     << "cost_constant = " << cost_constant << "\n"
     << "bound_value = " << bound_value << "\n"
     << "cost_exponent = " << cost_exponent << "\n"
     << "stationarity_residual = " << stationarity_residual << "\n"
     << "overflow = " << (overflow ? "true" : "false") << "\n";
  return os.str();
}

CostFit fit_cost_law(const std::vector<CostSweepRow>& rows, double y0_norm2) {
  CostFit f;
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows)
    if (r.ok && r.control_cost > 0.0 && y0_norm2 > 0.0)
      pts.emplace_back(r.K, std::log(r.control_cost / y0_norm2));
  f.points = static_cast<int>(pts.size());
  if (pts.size() < 2) return f;
  double mx = 0, my = 0;
  for (auto [x, y] : pts) { mx += x; my += y; }
  mx /= pts.size();
  my /= pts.size();
  double sxx = 0, sxy = 0;
  for (auto [x, y] : pts) { sxx += (x - mx) * (x - mx); sxy += (x - mx) * (y - my); }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (auto [x, y] : pts) { const double e = y - (f.intercept + f.slope * x); ss += e * e; }
  f.residual = std::sqrt(ss / pts.size());
  return f;
}

}  // namespace sbc
