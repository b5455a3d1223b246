#include "sbc/verification.hpp"

#include "sbc/experiment.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace sbc {

ExperimentConfig reference_config() {
  ExperimentConfig c;
  c.R = 1.0;
  c.n_r = 12;
  c.n_theta = 24;
  c.T = 1.0;
  c.n_t = 8;
  c.g0_center = Point::Zero();
  c.g0_radius = 0.3;
  c.g1_radius = 0.1;
  c.A_spec = "identity";
  c.b_surf = 1.0;
  c.a1 = 1.0;
  c.a2 = 0.0;
  c.B1 = Point(1.0, 0.0);
  c.B2 = 0.0;
  c.beta0 = 0.5;
  c.mu = 1.0;
  c.lambda_factor = 2.0;
  c.lambda0 = 1.0;
  c.eps_reg = 0.5;
  c.psi_scale = 0.1;
  c.eps = 1e-6;
  c.cg_tol = 1e-12;
  c.cg_max_iter = 2000;
  c.y0_center = Point(0.3, 0.0);
  c.y0_width = 0.1;
  c.y0_amplitude = 1.0;
  c.seed = 12345;
  c.output_dir = "out";
  return c;
}

namespace {

using Clock = std::chrono::steady_clock;

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(3) << std::scientific << v;
  return os.str();
}

void fill_gaussian(AdaptedField& f, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  for (Index i = 0; i < f.data().size(); ++i) f.data().data()[i] = g(rng);
}

ControlTriple random_controls(const Propagator& prop, const ControlRegion& region,
                              std::mt19937_64& rng) {
  ControlTriple c = zero_controls(prop, region);
  fill_gaussian(c.u, rng);
  fill_gaussian(c.v1, rng);
  fill_gaussian(c.v2, rng);
  return c;
}

double max_rel_diff(const Mat& a, const Mat& b) {
  const double s = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / s;
}

CriterionResult timed(int id, const std::string& name, const std::function<void(CriterionResult&)>& body) {
  CriterionResult r;
  r.id = id;
  r.name = name;
  const auto t0 = Clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail += std::string(" exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  return r;
}

}  // namespace

CriterionResult check_duality(const ExperimentConfig& ref) {
  return timed(1, "exact duality", [&](CriterionResult& r) {
    const Setup s = make_setup(ref);
    double worst = 0.0, fault = 1e300;
    for (int i = 0; i < 10; ++i) {
      std::mt19937_64 rng(ref.seed + 7 * i);
      const Vec y0 = smooth_random_vector(s.mesh(), rng);
      const ControlTriple c = random_controls(*s.prop, s.region, rng);
      const AdaptedField zT = random_terminal(s.mesh(), s.tree(), rng);
      const ForwardSolution f = forward_solve(s.prop, s.region, y0, c);
      BackwardSolution b = backward_solve(s.prop, zT);
      worst = std::max(worst, duality_gap(f, b, s.region, c));
      const Index d = s.region.dofs.front();
      b.Zm.at(0, 0)(d) += 1.0 + std::abs(b.Zm.at(0, 0)(d));
      fault = std::min(fault, duality_gap(f, b, s.region, c));
    }
    r.passed = worst <= 1e-10 && fault > 1e-6;
    r.detail = "max gap " + num(worst) + " (<= 1e-10), fault-injected min gap " + num(fault) +
               " (> 1e-6)";
  });
}

CriterionResult check_backward_oracle(const ExperimentConfig& ref) {
  return timed(2, "backward oracle equivalence", [&](CriterionResult& r) {
    double worst = 0.0;
    Index dofs = 0;
    for (int i = 0; i < 5; ++i) {
      ExperimentConfig c = ref;
      c.n_r = 4;
      c.n_theta = 8;
      c.n_t = 1 + i % 3;
      c.g1_radius = 0.1;
      c.g0_radius = 0.6;
      const Setup s = make_setup(c);
      const PolarMesh& m = s.mesh();
      dofs = m.num_dofs();
      std::mt19937_64 rng(ref.seed + 31 * i);
      const AdaptedField zT = random_terminal(m, s.tree(), rng);
      BackwardSources src;
      src.F1 = AdaptedField(m.num_dofs(), c.n_t);
      src.F2 = AdaptedField(m.num_dofs(), c.n_t);
      src.Fvec = AdaptedField(2 * m.num_triangles(), c.n_t);
      src.Fsurf = AdaptedField(m.num_boundary(), c.n_t);
      fill_gaussian(*src.F1, rng);
      fill_gaussian(*src.F2, rng);
      fill_gaussian(*src.Fvec, rng);
      fill_gaussian(*src.Fsurf, rng);
      const BackwardSolution a = backward_solve(s.prop, zT, src);
      const BackwardSolution b = oracle_backward_dense(*s.prop, zT, src);
      worst = std::max({worst, max_rel_diff(a.z.data(), b.z.data()),
                        max_rel_diff(a.Zm.data(), b.Zm.data()),
                        max_rel_diff(a.Zs.data(), b.Zs.data())});
    }
    r.passed = worst <= 1e-10;
    r.detail = "max relative difference " + num(worst) + " (<= 1e-10) on " +
               std::to_string(dofs) + " dofs, n_t = 1..3";
  });
}

CriterionResult check_gradient(const ExperimentConfig& ref) {
  return timed(3, "J_eps gradient vs central differences", [&](CriterionResult& r) {
    const Setup s = make_setup(ref);
    const ControlProblem P = control_problem(s);
    std::mt19937_64 rng(ref.seed + 3);
    // Directions of unit size in the weighted control norm, so the
    // quadratic control term does not swamp the difference quotient.
    auto energy_scaled = [&]() { return unit_weighted_energy(P, random_controls(*s.prop, s.region, rng)); };
    const ControlTriple c = energy_scaled();
    const JepsEvaluation ev = jeps_value_and_gradient(P, c, s.y0);
    const double h = 1e-4;
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
      const ControlTriple d = energy_scaled();
      ControlTriple cp = c, cm = c;
      control_axpy(h, d, cp);
      control_axpy(-h, d, cm);
      const double fd = (jeps_value_and_gradient(P, cp, s.y0).value -
                         jeps_value_and_gradient(P, cm, s.y0).value) /
                        (2 * h);
      const double an = control_dot(P, ev.gradient, d);
      worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), std::abs(fd)));
    }
    r.passed = worst <= 1e-6;
    r.detail = "max relative error " + num(worst) + " (<= 1e-6) over 5 directions, h = 1e-4";
  });
}

CriterionResult check_null_synthesis(const ExperimentConfig& ref) {
  return timed(4, "null-control synthesis", [&](CriterionResult& r) {
    const Setup s = make_setup(ref);
    const double K = cost_factor(s).K;
    const auto res = synthesize_null(control_problem(s), s.y0, K, ref.cost_constant);
    ExperimentConfig q = ref;
    q.eps = ref.eps / 4;
    const Setup s4 = make_setup(q);
    const auto res4 = synthesize_null(control_problem(s4), s4.y0, K, ref.cost_constant);
    const HumReport& h = res.report;
    const double y0n = s.y0.cwiseProduct(s.mesh().mass()).dot(s.y0);
    const double terminal = h.terminal_ratio * y0n;
    const bool penal = terminal <= 2 * ref.eps * h.J * (1 + 1e-9) && h.J <= h.J0;
    const bool ok_ratio = h.terminal_ratio <= 1e-3;
    const bool ok_stat = h.stationarity_residual <= 1e-6;
    const bool ok_mono = res4.report.terminal_ratio <= h.terminal_ratio;
    r.passed = ok_ratio && ok_stat && ok_mono && h.converged && h.monotone && penal;
    r.detail = "terminal ratio " + num(h.terminal_ratio) + " (<= 1e-3), stationarity " +
               num(h.stationarity_residual) + " (<= 1e-6), eps/4 ratio " +
               num(res4.report.terminal_ratio) + ", iterations " + std::to_string(h.iterations) +
               (h.monotone ? ", J monotone" : ", J NOT monotone") +
               (penal ? "" : ", penalization bound violated");
  });
}

CriterionResult check_observability(const ExperimentConfig& ref) {
  return timed(5, "observability closed form", [&](CriterionResult& r) {
    ExperimentConfig c = ref;
    c.a1 = c.a2 = c.B2 = 0.0;
    c.B1 = Point::Zero();
    c.R = 1.0;
    c.T = 1.0;
    c.g0_center = Point::Zero();
    c.g0_radius = 0.3;
    c.n_r = 15;
    c.n_theta = 32;
    const Setup s = make_setup(c);
    AdaptedField zT = terminal_field(s.tree(), s.mesh().num_dofs());
    zT.level(c.n_t).setOnes();
    const BackwardSolution b = backward_solve(s.prop, zT);
    const auto rep = observability_ratio(b, s.mesh(), s.region, s.tree().dt(), cost_factor(s).K);
    const double expected = 3.0 / 0.09;
    const double rel = std::abs(rep.ratio - expected) / expected;
    r.passed = rel <= 0.02 && !rep.failure;
    r.detail = "ratio " + num(rep.ratio) + " vs " + num(expected) + ", relative error " + num(rel) +
               " (<= 2e-2)";
  });
}

CriterionResult check_carleman(const ExperimentConfig& ref) {
  return timed(6, "Carleman calibrate/holdout", [&](CriterionResult& r) {
    ExperimentConfig c = ref;
    c.audit_instances = 20;
    c.audit_margin = 1.5;
    const CarlemanAudit a = audit_carleman(c, CarlemanMode::Adjoint, 2.0);
    bool nonneg = true;
    for (const auto* set : {&a.calibration, &a.holdout})
      for (const auto& rep : *set) {
        for (double v : rep.lhs) nonneg = nonneg && v >= 0.0;
        for (const auto& [name, v] : rep.rhs) nonneg = nonneg && v >= 0.0;
      }
    r.passed = a.holdout_ok && a.scaling_deviation <= 1e-12 && std::isfinite(a.C_star) &&
               a.C_star > 0.0 && nonneg;
    r.detail = "C* " + num(a.C_star) + ", holdout max " + num(a.holdout_max) + " (<= " +
               num(1.5 * a.C_star) + "), scaling deviation " + num(a.scaling_deviation) +
               " (<= 1e-12)";
  });
}

CriterionResult check_cost_sweep(const ExperimentConfig& ref) {
  return timed(7, "cost-scaling sweep", [&](CriterionResult& r) {
    ExperimentConfig c = ref;
    c.sweep_T = {0.5, 1.0, 2.0};
    c.sweep_a1 = {0.0, 2.0, 8.0};
    const auto rows = sweep_cost(c);
    bool all_ok = true, k_ok = true;
    for (const auto& row : rows) {
      all_ok = all_ok && row.ok;
      const double B = row.B1;
      const double expected = 1.0 + 1.0 / row.T + std::pow(row.a1, 2.0 / 3.0) + row.T * row.a1 +
                              (1.0 + row.T) * B * B;
      k_ok = k_ok && std::abs(row.K - expected) <= 4 * std::numeric_limits<double>::epsilon() * expected;
    }
    const Setup s = make_setup(ref);
    const double y0n = s.y0.cwiseProduct(s.mesh().mass()).dot(s.y0);
    const CostFit fit = fit_cost_law(rows, y0n);
    r.passed = all_ok && k_ok && fit.points == static_cast<int>(rows.size()) && fit.slope >= 0.0;
    r.detail = "slope " + num(fit.slope) + " (>= 0), rms residual " + num(fit.residual) +
               ", K column " + (k_ok ? "matches" : "MISMATCH") + ", " +
               std::to_string(fit.points) + "/" + std::to_string(rows.size()) + " points ok";
  });
}

CriterionResult check_structural(const ExperimentConfig& ref) {
  return timed(8, "structural invariants", [&](CriterionResult& r) {
    std::vector<std::string> failures;
    auto expect = [&](bool ok, const std::string& what) {
      if (!ok) failures.push_back(what);
    };
    const std::pair<int, int> levels[] = {{8, 16}, {12, 24}};
    for (auto [nr, nth] : levels) {
      const std::string tag = " @" + std::to_string(nr) + "x" + std::to_string(nth);
      ExperimentConfig c = ref;
      c.n_r = nr;
      c.n_theta = nth;
      c.n_t = 6;
      c.a1 = c.a2 = c.B2 = 0.0;
      c.B1 = Point::Zero();
      c.A_spec = "radial:1,0.5";
      const Setup s = make_setup(c);
      const PolarMesh& m = s.mesh();
      std::mt19937_64 rng(ref.seed + static_cast<std::uint64_t>(nr));

      // S symmetric, constants in its kernel.
      const SpatialForms& F = s.prop->forms(0);
      const double Sn = Mat(F.S).cwiseAbs().maxCoeff();
      expect(Mat(F.S - SpMat(F.S.transpose())).cwiseAbs().maxCoeff() == 0.0, "S symmetry" + tag);
      expect((F.S * Vec::Ones(m.num_dofs())).cwiseAbs().maxCoeff() <= 1e-13 * Sn, "S kernel" + tag);
      expect(F.M.minCoeff() > 0.0, "M positive" + tag);

      // Mass conservation and contraction, pathwise.
      const Vec y0 = smooth_random_vector(m, rng);
      const ForwardSolution f = forward_solve(s.prop, s.region, y0, zero_controls(*s.prop, s.region));
      const Vec M = m.mass();
      const double mass0 = M.dot(y0);
      double mass_dev = 0.0;
      bool contraction = true;
      for (int k = 0; k < c.n_t; ++k)
        for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
          const Vec a = f.Y.at(k, j);
          const double na = a.cwiseProduct(M).dot(a);
          for (bool up : {true, false}) {
            const Vec b = f.Y.at(k + 1, BinomialTree::child(j, up));
            mass_dev = std::max(mass_dev, std::abs(M.dot(b) - mass0) / std::abs(mass0));
            contraction = contraction && b.cwiseProduct(M).dot(b) <= na * (1 + 1e-13);
          }
        }
      expect(mass_dev <= 1e-12, "mass conservation" + tag + " dev " + num(mass_dev));
      expect(contraction, "forward contraction" + tag);

      // Backward mean-square norm nondecreasing in k.
      const BackwardSolution b = backward_solve(s.prop, random_terminal(m, s.tree(), rng));
      const auto ms = mean_square_norms(m, b.z);
      bool mono = true;
      for (size_t k = 0; k + 1 < ms.size(); ++k) mono = mono && ms[k] <= ms[k + 1] * (1 + 1e-13);
      expect(mono, "backward monotonicity" + tag);

      // Weights constant along the boundary circle.
      const WeightSet ws = weights_for(s, 2.0 * adjoint_threshold(s));
      bool constant = true;
      for (Index k = 0; k < ws.num_times(); ++k) {
        const Index b0 = m.first_boundary_dof();
        const auto ab = ws.alpha.row(k).tail(m.n_theta);
        const auto pb = ws.phi.row(k).tail(m.n_theta);
        constant = constant && ab.maxCoeff() == ab.minCoeff() && pb.maxCoeff() == pb.minCoeff() &&
                   ab(0) == ws.alpha(k, b0);
      }
      expect(constant, "weight boundary constancy" + tag);

      // Filtration identities.
      const BinomialTree& tree = s.tree();
      AdaptedField X(1, tree.n_t());
      fill_gaussian(X, rng);
      bool tower = true;
      for (int k = 0; k < tree.n_t(); ++k) {
        AdaptedField lifted(1, k);
        for (Index j = 0; j < BinomialTree::level_size(k); ++j) lifted.at(k, j) = cond_expect(X, k, j);
        const double lhs = tree_expectation(lifted, k), rhs = tree_expectation(X, k + 1);
        tower = tower && std::abs(lhs - rhs) <= 1e-13 * (1 + std::abs(rhs));
      }
      expect(tower, "tower property" + tag);

      AdaptedField Z(1, tree.n_t() - 1);
      fill_gaussian(Z, rng);
      AdaptedField I(1, tree.n_t());
      double rhs = 0.0;
      for (int k = 0; k < tree.n_t(); ++k) {
        double e2 = 0.0;
        for (Index j = 0; j < BinomialTree::level_size(k); ++j) {
          const double z = Z.at(k, j)(0);
          e2 += z * z;
          for (bool up : {true, false})
            I.at(k + 1, BinomialTree::child(j, up))(0) =
                I.at(k, j)(0) + z * (up ? tree.sqrt_dt() : -tree.sqrt_dt());
        }
        rhs += tree.dt() * e2 / static_cast<double>(BinomialTree::level_size(k));
      }
      double lhs = 0.0;
      const int n = tree.n_t();
      for (Index j = 0; j < BinomialTree::level_size(n); ++j) lhs += I.at(n, j)(0) * I.at(n, j)(0);
      lhs /= static_cast<double>(BinomialTree::level_size(n));
      expect(std::abs(lhs - rhs) <= 1e-12 * rhs, "Ito isometry" + tag);

      // Writing one node leaves its sibling untouched.
      AdaptedField A = X;
      A.at(tree.n_t(), 0)(0) += 1.0;
      expect(A.at(tree.n_t(), 1)(0) == X.at(tree.n_t(), 1)(0), "adaptedness" + tag);
    }
    r.passed = failures.empty();
    r.detail = failures.empty() ? "all identities hold at 8x16 and 12x24" : "failed:";
    for (const auto& f : failures) r.detail += " " + f + ";";
  });
}

std::vector<CriterionResult> run_all_criteria(
    const ExperimentConfig& ref, const std::function<void(const CriterionResult&)>& on_result) {
  using Check = CriterionResult (*)(const ExperimentConfig&);
  const Check checks[] = {check_duality,       check_backward_oracle, check_gradient,
                          check_null_synthesis, check_observability,  check_carleman,
                          check_cost_sweep,    check_structural};
  std::vector<CriterionResult> out;
  for (Check c : checks) {
    out.push_back(c(ref));
    if (on_result) on_result(out.back());
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream os;
  os << (r.passed ? "[PASS]" : "[FAIL]") << " criterion " << r.id << " (" << r.name << "): "
     << r.detail << " [" << std::fixed << std::setprecision(1) << r.seconds << " s]";
  return os.str();
}

}  // namespace sbc
