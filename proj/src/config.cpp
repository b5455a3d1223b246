#include "sbc/config.hpp"

#include "sbc/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace sbc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw ConfigError(key, "trailing characters in '" + v + "'");
    return d;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
}

long long to_integer(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const long long i = std::stoll(v, &pos);
    if (pos != v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
    return i;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split(v, ',')) out.push_back(to_double(key, p));
  if (out.empty()) throw ConfigError(key, "empty list");
  return out;
}

Point to_point(const std::string& key, const std::string& v) {
  const auto l = to_list(key, v);
  if (l.size() != 2) throw ConfigError(key, "expected two comma-separated numbers");
  return {l[0], l[1]};
}

std::string fmt(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string fmt(const Point& p) { return fmt(p.x()) + "," + fmt(p.y()); }

std::string fmt(const std::vector<double>& l) {
  std::string s;
  for (size_t i = 0; i < l.size(); ++i) s += (i ? "," : "") + fmt(l[i]);
  return s;
}

struct Field {
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <typename M>
Field real(M ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = to_double(k, v); },
          [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

Field integer(int ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) {
            const long long i = to_integer(k, v);
            if (i < -2147483647LL || i > 2147483647LL) throw ConfigError(k, "out of range");
            c.*m = static_cast<int>(i);
          },
          [m](const ExperimentConfig& c) { return std::to_string(c.*m); }};
}

Field boolean(bool ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = to_bool(k, v); },
          [m](const ExperimentConfig& c) { return std::string(c.*m ? "true" : "false"); }};
}

Field point(Point ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = to_point(k, v); },
          [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

Field list(std::vector<double> ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string& k, const std::string& v) { c.*m = to_list(k, v); },
          [m](const ExperimentConfig& c) { return fmt(c.*m); }};
}

Field text(std::string ExperimentConfig::*m) {
  return {[m](ExperimentConfig& c, const std::string&, const std::string& v) { c.*m = v; },
          [m](const ExperimentConfig& c) { return c.*m; }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      {"mesh.R", real(&ExperimentConfig::R)},
      {"mesh.n_r", integer(&ExperimentConfig::n_r)},
      {"mesh.n_theta", integer(&ExperimentConfig::n_theta)},
      {"time.T", real(&ExperimentConfig::T)},
      {"time.n_t", integer(&ExperimentConfig::n_t)},
      {"time.allow_deep_tree", boolean(&ExperimentConfig::allow_deep_tree)},
      {"region.g0_center", point(&ExperimentConfig::g0_center)},
      {"region.g0_radius", real(&ExperimentConfig::g0_radius)},
      {"region.g1_radius", real(&ExperimentConfig::g1_radius)},
      {"coeffs.A", text(&ExperimentConfig::A_spec)},
      {"coeffs.b_surf", real(&ExperimentConfig::b_surf)},
      {"coeffs.a1", real(&ExperimentConfig::a1)},
      {"coeffs.a2", real(&ExperimentConfig::a2)},
      {"coeffs.B1", point(&ExperimentConfig::B1)},
      {"coeffs.B2", real(&ExperimentConfig::B2)},
      {"coeffs.beta0", real(&ExperimentConfig::beta0)},
      {"weights.mu", real(&ExperimentConfig::mu)},
      {"weights.lambda_factor", real(&ExperimentConfig::lambda_factor)},
      {"weights.lambda0", real(&ExperimentConfig::lambda0)},
      {"weights.eps_reg", real(&ExperimentConfig::eps_reg)},
      {"weights.psi_scale", real(&ExperimentConfig::psi_scale)},
      {"penalty.eps", real(&ExperimentConfig::eps)},
      {"penalty.cg_tol", real(&ExperimentConfig::cg_tol)},
      {"penalty.cg_max_iter", integer(&ExperimentConfig::cg_max_iter)},
      {"initial.center", point(&ExperimentConfig::y0_center)},
      {"initial.width", real(&ExperimentConfig::y0_width)},
      {"initial.amplitude", real(&ExperimentConfig::y0_amplitude)},
      {"audit.instances", integer(&ExperimentConfig::audit_instances)},
      {"audit.margin", real(&ExperimentConfig::audit_margin)},
      {"audit.cost_constant", real(&ExperimentConfig::cost_constant)},
      {"sweep.T_list", list(&ExperimentConfig::sweep_T)},
      {"sweep.a1_list", list(&ExperimentConfig::sweep_a1)},
      {"seed", {[](ExperimentConfig& c, const std::string& k, const std::string& v) {
                  const long long s = to_integer(k, v);
                  if (s < 0) throw ConfigError(k, "seed must be non-negative");
                  c.seed = static_cast<std::uint64_t>(s);
                },
                [](const ExperimentConfig& c) { return std::to_string(c.seed); }}},
      {"output_dir", text(&ExperimentConfig::output_dir)},
      {"threads", integer(&ExperimentConfig::threads)},
      {"output.trajectory", boolean(&ExperimentConfig::dump_trajectory)},
  };
  return f;
}

const Field& lookup(const std::string& key) {
  for (const auto& [k, f] : fields())
    if (k == key) return f;
  throw ConfigError(key, "unknown key");
}

void assign(ExperimentConfig& cfg, const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(trim(line), "expected key = value");
  const std::string key = trim(line.substr(0, eq));
  const std::string value = trim(line.substr(eq + 1));
  if (value.empty()) throw ConfigError(key, "missing value");
  lookup(key).set(cfg, key, value);
}

void require(bool ok, const char* field, const std::string& msg) {
  if (!ok) throw ConfigError(field, msg);
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    assign(base, line);
  }
  return base;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) { assign(cfg, assignment); }

std::string to_text(const ExperimentConfig& cfg) {
  std::string s;
  for (const auto& [k, f] : fields()) s += k + " = " + f.get(cfg) + "\n";
  return s;
}

CoefficientSet make_coefficients(const ExperimentConfig& cfg) {
  CoefficientSet c = CoefficientSet::constant(Eigen::Matrix2d::Identity(), cfg.b_surf, cfg.a1,
                                              cfg.a2, cfg.B1, cfg.B2, cfg.beta0);
  const std::string& spec = cfg.A_spec;
  if (spec == "identity") return c;
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::vector<double> p =
      colon == std::string::npos ? std::vector<double>{} : to_list("coeffs.A", spec.substr(colon + 1));
  if (kind == "constant") {
    if (p.size() != 3) throw ConfigError("coeffs.A", "constant needs a11,a12,a22");
    Eigen::Matrix2d A;
    A << p[0], p[1], p[1], p[2];
    c.A = [A](double, const Point&) { return A; };
  } else if (kind == "radial") {
    if (p.size() != 2) throw ConfigError("coeffs.A", "radial needs c0,c1");
    const double c0 = p[0], c1 = p[1];
    c.A = [c0, c1](double, const Point& x) {
      return Eigen::Matrix2d((c0 + c1 * x.squaredNorm()) * Eigen::Matrix2d::Identity());
    };
  } else {
    throw ConfigError("coeffs.A", "unknown diffusion spec '" + spec + "'");
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  require(c.R > 0 && std::isfinite(c.R), "mesh.R", "must be positive");
  require(c.n_r >= 4, "mesh.n_r", "must be at least 4");
  require(c.n_theta >= 8, "mesh.n_theta", "must be at least 8");
  require(c.n_theta % 2 == 0, "mesh.n_theta", "must be even");
  require(c.T > 0 && std::isfinite(c.T), "time.T", "must be positive");
  require(c.n_t >= 1, "time.n_t", "must be at least 1");
  require(c.n_t <= 14 || c.allow_deep_tree, "time.n_t", "above 14 needs time.allow_deep_tree");
  require(c.n_t <= 24, "time.n_t", "tree too large");
  require(c.g0_radius > 0, "region.g0_radius", "must be positive");
  require(c.g0_center.norm() + c.g0_radius < c.R, "region.g0_radius", "G0 must lie inside the disk");
  require(c.g1_radius > 0, "region.g1_radius", "must be positive");
  require(c.g0_center.norm() + c.g1_radius < c.g0_radius, "region.g1_radius",
          "G1 must lie strictly inside G0");
  require(c.beta0 > 0, "coeffs.beta0", "must be positive");
  require(c.b_surf >= c.beta0, "coeffs.b_surf", "below beta0");
  const CoefficientSet coeffs = make_coefficients(c);
  for (const Point& x : {Point(0, 0), Point(c.R, 0), Point(0, 0.5 * c.R)}) {
    const Eigen::Matrix2d A = coeffs.A(0.0, x);
    require(std::abs(A(0, 1) - A(1, 0)) == 0.0, "coeffs.A", "not symmetric");
    require(A.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() >= c.beta0, "coeffs.A",
            "eigenvalue below beta0");
  }
  require(c.mu >= 1, "weights.mu", "must be >= 1");
  require(c.lambda_factor > 0, "weights.lambda_factor", "must be positive");
  require(c.lambda0 >= 1, "weights.lambda0", "must be >= 1");
  require(c.eps_reg > 0, "weights.eps_reg", "must be positive");
  require(c.psi_scale > 0, "weights.psi_scale", "must be positive");
  require(c.eps > 0, "penalty.eps", "must be positive");
  require(c.cg_tol > 0, "penalty.cg_tol", "must be positive");
  require(c.cg_max_iter >= 1, "penalty.cg_max_iter", "must be positive");
  require(c.y0_width > 0, "initial.width", "must be positive");
  require(c.audit_instances >= 1, "audit.instances", "must be positive");
  require(c.audit_margin >= 1, "audit.margin", "must be >= 1");
  for (double t : c.sweep_T) require(t > 0, "sweep.T_list", "entries must be positive");
  require(!c.output_dir.empty(), "output_dir", "must not be empty");
  require(c.threads >= 1, "threads", "must be positive");
}

}  // namespace sbc
