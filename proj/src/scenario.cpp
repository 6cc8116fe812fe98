#include "tvopt/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tvopt/exosystem.hpp"
#include "tvopt/loss.hpp"
#include "tvopt/mismatch.hpp"
#include "tvopt/recipes.hpp"
#include "tvopt/regulator.hpp"
#include "tvopt/rng.hpp"
#include "tvopt/spectral.hpp"

namespace tvopt {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// bundled resources
// ---------------------------------------------------------------------------

const char* kQuadratic4Cfg = R"cfg(# Random quadratic tracking problem (n = p = 4) with a skew exosystem.
name = quadratic4
kind = quadratic
seed = 20250810

[problem]
recipe = random
n = 4

[initial]
theta0 = ball 1.0

[synthesis]
margin = 1.0

[integrator]
method = rk45
rtol = 1e-10
atol = 1e-13
h_max = 0.05
t_end = 20
samples = 1001
)cfg";

const char* kQuarticLocalCfg = R"cfg(# Scalar double-well tracking with a constant-but-unknown parameter.
name = quartic_local
kind = quartic
seed = 7

[initial]
theta0 = 0.02

[synthesis]
margin = 1.0

[integrator]
method = rk45
rtol = 1e-10
atol = 1e-13
h_max = 0.05
t_end = 20
samples = 1001
)cfg";

const char* kWardropCfg = R"cfg(# Dynamic traffic assignment on the bundled 4-node network.
name = wardrop
kind = traffic
seed = 11

[problem]
network = builtin:braess

[inflow]
theta0 = 3.0
theta1 = 1.0
theta2 = 0.1
omega1 = 0.1
omega2 = 7.0710678118654755
phi1 = 0.0
phi2 = 0.0

[synthesis]
margin = 1.0

[integrator]
method = rk45
rtol = 1e-9
atol = 1e-12
h_max = 0.05
t_end = 10
samples = 1001
)cfg";

const char* kMismatchConstantCfg = R"cfg(# Constant exosystem with an internal-model defect: closed form vs simulation.
name = mismatch_constant
kind = mismatch
seed = 5

[problem]
mode = constant
n = 3
p = 2

[initial]
theta0 = ball 1.0

[integrator]
method = rk45
rtol = 1e-10
atol = 1e-13
h_max = 0.1
t_end = 40
samples = 1001
)cfg";

const char* kMismatchJordanCfg = R"cfg(# Polynomial-growth exosystem with a damped internal model: tracking is lost.
name = mismatch_jordan
kind = mismatch
seed = 3

[problem]
mode = jordan
epsilon1 = 0.5
epsilon2 = 0.5

[initial]
theta0 = 1 1

[integrator]
method = rk45
rtol = 1e-9
atol = 1e-12
h_max = 0.1
t_end = 100
samples = 1001
)cfg";

const char* kBraessNet = R"net(# 4-node, 5-edge test network with one origin-destination pair.
node o
node a
node b
node d
edge o a 1
edge o b 10
edge a b 1
edge a d 5
edge b d 1
origin o
destination d
)net";

// ---------------------------------------------------------------------------
// config text parsing
// ---------------------------------------------------------------------------

struct ConfigEntry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
  bool used = false;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Config {
 public:
  Config(const std::string& text, std::string base_dir)
      : base_dir_(std::move(base_dir)) {
    std::istringstream stream(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(stream, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') {
          throw ValidationError("config line " + std::to_string(line_no) +
                                ": malformed section header");
        }
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw ValidationError("config line " + std::to_string(line_no) +
                              ": expected 'key = value'");
      }
      ConfigEntry entry;
      entry.section = section;
      entry.key = trim(line.substr(0, eq));
      entry.value = trim(line.substr(eq + 1));
      entry.line = line_no;
      if (entry.key.empty() || entry.value.empty()) {
        throw ValidationError("config line " + std::to_string(line_no) +
                              ": empty key or value");
      }
      entries_.push_back(entry);
    }
  }

  std::optional<std::string> take(const std::string& section,
                                  const std::string& key) {
    for (auto& e : entries_) {
      if (e.section == section && e.key == key) {
        e.used = true;
        return e.value;
      }
    }
    return std::nullopt;
  }

  std::string require(const std::string& section, const std::string& key) {
    auto v = take(section, key);
    if (!v) {
      throw ValidationError("config: missing required key '" +
                            qualified(section, key) + "'");
    }
    return *v;
  }

  void ensure_all_used() const {
    for (const auto& e : entries_) {
      if (!e.used) {
        throw ValidationError("config line " + std::to_string(e.line) +
                              ": unknown key '" +
                              qualified(e.section, e.key) + "'");
      }
    }
  }

  const std::string& base_dir() const { return base_dir_; }

 private:
  static std::string qualified(const std::string& section,
                               const std::string& key) {
    return section.empty() ? key : section + "." + key;
  }

  std::vector<ConfigEntry> entries_;
  std::string base_dir_;
};

double parse_double(const std::string& value, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: bad number '" + value + "' for " + what);
  }
}

int parse_int(const std::string& value, const std::string& what) {
  const double v = parse_double(value, what);
  if (v != std::floor(v)) {
    throw ValidationError("config: expected integer for " + what);
  }
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& value, const std::string& what) {
  try {
    std::size_t pos = 0;
    const std::uint64_t v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: bad seed '" + value + "' for " + what);
  }
}

std::vector<double> parse_numbers(const std::string& value,
                                  const std::string& what) {
  std::vector<double> out;
  std::istringstream stream(value);
  std::string tok;
  while (stream >> tok) out.push_back(parse_double(tok, what));
  if (out.empty()) {
    throw ValidationError("config: expected numbers for " + what);
  }
  return out;
}

Eigen::VectorXd parse_vector(const std::string& value,
                             const std::string& what) {
  const auto nums = parse_numbers(value, what);
  return Eigen::Map<const Eigen::VectorXd>(nums.data(), nums.size());
}

std::string read_file(const std::string& path) {
  std::ifstream file(path);
  if (!file) {
    throw ValidationError("config: cannot read file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return buffer.str();
}

Eigen::MatrixXd parse_matrix(const std::string& value,
                             const std::string& base_dir,
                             const std::string& what) {
  std::vector<std::vector<double>> rows;
  if (!value.empty() && value[0] == '@') {
    // CSV side file: one row per line, comma or whitespace separated.
    const fs::path path = fs::path(base_dir) / value.substr(1);
    std::istringstream stream(read_file(path.string()));
    std::string line;
    while (std::getline(stream, line)) {
      std::replace(line.begin(), line.end(), ',', ' ');
      line = trim(line);
      if (line.empty()) continue;
      rows.push_back(parse_numbers(line, what));
    }
  } else {
    std::string text = value;
    std::string row;
    std::istringstream stream(text);
    while (std::getline(stream, row, ';')) {
      row = trim(row);
      if (row.empty()) continue;
      rows.push_back(parse_numbers(row, what));
    }
  }
  if (rows.empty()) {
    throw ValidationError("config: empty matrix for " + what);
  }
  const std::size_t cols = rows[0].size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) {
      throw ValidationError("config: ragged matrix rows for " + what);
    }
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

void parse_initial(Config& cfg, Scenario& s) {
  if (auto v = cfg.take("initial", "theta0")) {
    std::istringstream stream(*v);
    std::string head;
    stream >> head;
    if (head == "ball") {
      std::string radius;
      stream >> radius;
      s.theta0_random_ball = true;
      s.theta0_radius = radius.empty()
                            ? 1.0
                            : parse_double(radius, "initial.theta0 radius");
      if (s.theta0_radius <= 0.0) {
        throw ValidationError("config: initial.theta0 ball radius must be "
                              "positive");
      }
    } else {
      s.theta0 = parse_vector(*v, "initial.theta0");
    }
  }
  if (auto v = cfg.take("initial", "z0")) {
    if (*v != "zeros") s.z0 = parse_vector(*v, "initial.z0");
  }
}

void parse_integrator(Config& cfg, Scenario& s) {
  IntegratorConfig& ic = s.integrator;
  if (auto v = cfg.take("integrator", "method")) {
    if (*v == "rk45") {
      ic.method = IntegratorMethod::rk45_adaptive;
    } else if (*v == "rk4") {
      ic.method = IntegratorMethod::rk4_fixed;
    } else {
      throw ValidationError("config: integrator.method must be rk4 or rk45");
    }
  }
  if (auto v = cfg.take("integrator", "step"))
    ic.step = parse_double(*v, "integrator.step");
  if (auto v = cfg.take("integrator", "rtol"))
    ic.rtol = parse_double(*v, "integrator.rtol");
  if (auto v = cfg.take("integrator", "atol"))
    ic.atol = parse_double(*v, "integrator.atol");
  if (auto v = cfg.take("integrator", "h_min"))
    ic.h_min = parse_double(*v, "integrator.h_min");
  if (auto v = cfg.take("integrator", "h_max"))
    ic.h_max = parse_double(*v, "integrator.h_max");
  if (auto v = cfg.take("integrator", "t_end"))
    ic.t_end = parse_double(*v, "integrator.t_end");
  if (auto v = cfg.take("integrator", "samples"))
    ic.samples = parse_int(*v, "integrator.samples");
  if (ic.t_end <= 0.0) {
    throw ValidationError("config: integrator.t_end must be positive");
  }
  if (ic.samples < 2) {
    throw ValidationError("config: integrator.samples must be at least 2");
  }
  if (ic.step <= 0.0 || ic.rtol <= 0.0 || ic.atol <= 0.0 ||
      ic.h_min > ic.h_max) {
    throw ValidationError("config: invalid integrator tolerances");
  }
}

}  // namespace

const std::vector<std::string>& bundled_scenario_names() {
  static const std::vector<std::string> names = {
      "mismatch_constant", "mismatch_jordan", "quadratic4", "quartic_local",
      "wardrop"};
  return names;
}

std::string bundled_scenario_text(const std::string& name) {
  static const std::map<std::string, const char*> table = {
      {"quadratic4", kQuadratic4Cfg},
      {"quartic_local", kQuarticLocalCfg},
      {"wardrop", kWardropCfg},
      {"mismatch_constant", kMismatchConstantCfg},
      {"mismatch_jordan", kMismatchJordanCfg}};
  const auto it = table.find(name);
  if (it == table.end()) {
    throw ValidationError("unknown bundled scenario '" + name + "'");
  }
  return it->second;
}

std::string bundled_network_text(const std::string& name) {
  if (name == "braess") return kBraessNet;
  throw ValidationError("unknown bundled network '" + name + "'");
}

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  Config cfg(text, base_dir);
  Scenario s;
  s.name = cfg.require("", "name");
  const std::string kind = cfg.require("", "kind");
  if (kind == "quadratic") {
    s.kind = ScenarioKind::quadratic;
  } else if (kind == "quartic") {
    s.kind = ScenarioKind::quartic;
  } else if (kind == "traffic") {
    s.kind = ScenarioKind::traffic;
  } else if (kind == "mismatch") {
    s.kind = ScenarioKind::mismatch;
  } else {
    throw ValidationError("config: unknown kind '" + kind + "'");
  }
  if (auto v = cfg.take("", "seed")) s.seed = parse_u64(*v, "seed");

  switch (s.kind) {
    case ScenarioKind::quadratic: {
      if (auto v = cfg.take("problem", "recipe")) {
        if (*v != "random") {
          throw ValidationError("config: problem.recipe must be 'random'");
        }
        s.use_random_problem = true;
        s.use_random_skew = true;
        s.problem_size = parse_int(cfg.require("problem", "n"), "problem.n");
        if (s.problem_size < 1) {
          throw ValidationError("config: problem.n must be positive");
        }
      } else {
        s.R = parse_matrix(cfg.require("problem", "R"), base_dir, "problem.R");
        s.Q = parse_matrix(cfg.require("problem", "Q"), base_dir, "problem.Q");
        if (auto v = cfg.take("exosystem", "recipe")) {
          if (*v != "random_skew") {
            throw ValidationError(
                "config: exosystem.recipe must be 'random_skew'");
          }
          s.use_random_skew = true;
        } else if (auto h = cfg.take("exosystem", "harmonic")) {
          const auto freqs = parse_numbers(*h, "exosystem.harmonic");
          s.harmonic_frequencies = freqs;
          if (auto c = cfg.take("exosystem", "constant")) {
            s.harmonic_constant = (*c == "true" || *c == "1");
          }
        } else {
          s.S = parse_matrix(cfg.require("exosystem", "S"), base_dir,
                             "exosystem.S");
        }
      }
      break;
    }
    case ScenarioKind::quartic:
      break;
    case ScenarioKind::traffic: {
      const std::string ref = cfg.require("problem", "network");
      if (ref.rfind("builtin:", 0) == 0) {
        s.network_text = bundled_network_text(ref.substr(8));
      } else {
        s.network_text = read_file((fs::path(base_dir) / ref).string());
      }
      s.inflow.theta0 =
          parse_double(cfg.require("inflow", "theta0"), "inflow.theta0");
      s.inflow.theta1 =
          parse_double(cfg.require("inflow", "theta1"), "inflow.theta1");
      s.inflow.theta2 =
          parse_double(cfg.require("inflow", "theta2"), "inflow.theta2");
      s.inflow.omega1 =
          parse_double(cfg.require("inflow", "omega1"), "inflow.omega1");
      s.inflow.omega2 =
          parse_double(cfg.require("inflow", "omega2"), "inflow.omega2");
      if (auto v = cfg.take("inflow", "phi1"))
        s.inflow.phi1 = parse_double(*v, "inflow.phi1");
      if (auto v = cfg.take("inflow", "phi2"))
        s.inflow.phi2 = parse_double(*v, "inflow.phi2");
      break;
    }
    case ScenarioKind::mismatch: {
      s.mismatch_mode = cfg.require("problem", "mode");
      if (s.mismatch_mode == "jordan") {
        if (auto v = cfg.take("problem", "epsilon1"))
          s.epsilon1 = parse_double(*v, "problem.epsilon1");
        if (auto v = cfg.take("problem", "epsilon2"))
          s.epsilon2 = parse_double(*v, "problem.epsilon2");
        if (s.epsilon1 < 0.0 || s.epsilon1 >= 1.0 || s.epsilon2 < 0.0 ||
            s.epsilon2 >= 1.0) {
          throw ValidationError("config: epsilons must lie in [0, 1)");
        }
      } else if (s.mismatch_mode == "constant") {
        if (auto v = cfg.take("problem", "n"))
          s.mismatch_n = parse_int(*v, "problem.n");
        if (auto v = cfg.take("problem", "p"))
          s.mismatch_p = parse_int(*v, "problem.p");
        if (s.mismatch_n < 1 || s.mismatch_p < 1) {
          throw ValidationError("config: mismatch dimensions must be positive");
        }
      } else {
        throw ValidationError(
            "config: problem.mode must be 'jordan' or 'constant'");
      }
      break;
    }
  }

  parse_initial(cfg, s);
  if (auto v = cfg.take("synthesis", "margin")) {
    s.margin = parse_double(*v, "synthesis.margin");
  }
  if (s.margin <= 0.0) {
    throw ValidationError("config: synthesis.margin must be positive");
  }
  parse_integrator(cfg, s);
  cfg.ensure_all_used();
  return s;
}

Scenario load_scenario(const std::string& name_or_path,
                       const std::string& user_dir) {
  const auto& names = bundled_scenario_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    return parse_scenario(bundled_scenario_text(name_or_path), ".");
  }
  if (fs::exists(name_or_path) && fs::is_regular_file(name_or_path)) {
    const std::string dir = fs::path(name_or_path).parent_path().string();
    return parse_scenario(read_file(name_or_path), dir.empty() ? "." : dir);
  }
  if (!user_dir.empty()) {
    const fs::path candidate = fs::path(user_dir) / (name_or_path + ".cfg");
    if (fs::exists(candidate)) {
      return parse_scenario(read_file(candidate.string()),
                            user_dir.empty() ? "." : user_dir);
    }
  }
  throw ValidationError("unknown scenario '" + name_or_path +
                        "' (not a bundled name or a readable file)");
}

std::vector<std::string> list_scenarios(const std::string& user_dir) {
  std::set<std::string> names(bundled_scenario_names().begin(),
                              bundled_scenario_names().end());
  if (!user_dir.empty() && fs::is_directory(user_dir)) {
    for (const auto& entry : fs::directory_iterator(user_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".cfg") {
        names.insert(entry.path().stem().string());
      }
    }
  }
  return {names.begin(), names.end()};
}

// ---------------------------------------------------------------------------
// scenario execution
// ---------------------------------------------------------------------------

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

nlohmann::json metrics_to_json(const Trajectory& traj) {
  const TrackingMetrics metrics = tracking_metrics(traj, 0.2);
  const Eigen::Index last = traj.times.size() - 1;
  nlohmann::json out;
  out["y0_norm"] = traj.y.row(0).norm();
  out["y_end_norm"] = traj.y.row(last).norm();
  out["y_tail_sup"] = metrics.y_tail_sup;
  out["observer_gap_tail_sup"] = metrics.observer_gap_tail_sup;
  out["decay_rate_estimate"] = metrics.decay_rate_estimate;
  if (traj.z.cols() == traj.theta.cols() && traj.z.cols() > 0) {
    out["observer_gap0"] = (traj.z.row(0) - traj.theta.row(0)).norm();
    out["observer_gap_end"] = (traj.z.row(last) - traj.theta.row(last)).norm();
  }
  return out;
}

Eigen::VectorXd resolve_theta0(const Scenario& s, int dim, Rng& rng,
                               const Eigen::VectorXd& fallback) {
  if (s.theta0_random_ball) return rng.ball(dim, s.theta0_radius);
  if (s.theta0.size() > 0) {
    if (s.theta0.size() != dim) {
      throw ValidationError("config: initial.theta0 must have dimension " +
                            std::to_string(dim));
    }
    return s.theta0;
  }
  return fallback;
}

Eigen::VectorXd resolve_z0(const Scenario& s, int dim) {
  if (s.z0.size() == 0) return Eigen::VectorXd::Zero(dim);
  if (s.z0.size() != dim) {
    throw ValidationError("config: initial.z0 must have dimension " +
                          std::to_string(dim));
  }
  return s.z0;
}

struct RunContext {
  const Scenario& scenario;
  IntegratorConfig integrator;
  Rng rng;
  nlohmann::json summary;
};

void run_quadratic(RunContext& ctx, const Scenario& s, Trajectory& traj) {
  Eigen::MatrixXd R = s.R, Q = s.Q, S = s.S;
  if (s.use_random_problem) {
    const QuadraticRecipe recipe =
        random_quadratic_problem(s.problem_size, ctx.rng);
    R = recipe.R;
    Q = recipe.Q;
    S = recipe.S;
  } else if (s.use_random_skew) {
    S = ctx.rng.skew(static_cast<int>(Q.cols()));
  } else if (!s.harmonic_frequencies.empty()) {
    S = harmonic_bank(s.harmonic_frequencies, s.harmonic_constant)
            .jacobian_at_origin;
  }
  if (Q.cols() != S.rows()) {
    throw ValidationError("config: exosystem dimension does not match Q");
  }

  const LossModel loss = quadratic_loss(R, Q);
  const Exosystem exo = linear_exosystem(S);
  const int p = exo.dim;

  ctx.summary["detectable"] = is_detectable(Q, S);
  const ParameterFeedbackMap hc = quadratic_hc(R, Q);
  const GradientFeedbackAlgorithm alg = algorithm_one(exo, loss, hc, s.margin);

  ctx.summary["spectral"]["s_minus_lq_abscissa"] =
      eigenvalues(S - alg.L * Q).spectral_abscissa;
  ctx.summary["spectral"]["closed_loop_abscissa"] =
      closed_loop_jacobian(alg, loss).spectral_abscissa;

  const Eigen::VectorXd theta0 =
      resolve_theta0(s, p, ctx.rng, Eigen::VectorXd::Zero(p));
  const Eigen::VectorXd z0 = resolve_z0(s, alg.n_c);

  const auto samples = sample_ball(p, 100, 1.0, ctx.rng);
  const CenterManifoldResidual res =
      center_manifold_residual(alg, exo, loss, samples);
  ctx.summary["residuals"]["r_dyn"] = res.r_dyn;
  ctx.summary["residuals"]["r_grad"] = res.r_grad;

  const SigmaSolution sigma = solve_sigma(S, hc.gain, R, Q, S);
  ctx.summary["residuals"]["sigma_identity_error"] =
      (sigma.sigma - Eigen::MatrixXd::Identity(p, p)).cwiseAbs().maxCoeff();
  ctx.summary["residuals"]["sigma_residual"] = sigma.residual;

  traj = integrate_coupled(alg, exo, loss, z0, theta0, ctx.integrator);
}

void run_quartic(RunContext& ctx, const Scenario& s, Trajectory& traj) {
  const LossModel loss = quartic_example_loss();
  const Exosystem exo = linear_exosystem(Eigen::MatrixXd::Zero(1, 1));

  const Eigen::MatrixXd Q =
      theta_jacobian_at(loss, loss.base_point, Eigen::VectorXd::Zero(1));
  ctx.summary["detectable"] = is_detectable(Q, exo.jacobian_at_origin);

  const ParameterFeedbackMap hc = newton_feedback_map(loss, 1e-12, 60);
  const GradientFeedbackAlgorithm alg = algorithm_one(exo, loss, hc, s.margin);
  ctx.summary["spectral"]["s_minus_lq_abscissa"] =
      eigenvalues(exo.jacobian_at_origin - alg.L * Q).spectral_abscissa;
  ctx.summary["spectral"]["closed_loop_abscissa"] =
      closed_loop_jacobian(alg, loss).spectral_abscissa;

  // Local-structure probes around the two critical points.
  nlohmann::json probes;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd root = newton_hc(
      loss, zero, Eigen::VectorXd::Constant(1, -1.5), 1e-12, 60);
  probes["root_at_zero"] = root[0];
  probes["root_residual"] = loss.gradient(root, zero).norm();

  double sweep_max_step = 0.0;
  double sweep_lipschitz = 0.0;
  const int half = 20;
  for (int dir : {+1, -1}) {
    Eigen::VectorXd x_prev = root;
    for (int k = 1; k <= half; ++k) {
      Eigen::VectorXd th(1);
      th[0] = dir * 0.05 * k / half;
      const Eigen::VectorXd x = newton_hc(loss, th, x_prev, 1e-12, 60);
      sweep_max_step = std::max(sweep_max_step, (x - x_prev).norm());
      sweep_lipschitz =
          std::max(sweep_lipschitz, (x - root).norm() / std::abs(th[0]));
      x_prev = x;
    }
  }
  probes["sweep_max_step"] = sweep_max_step;
  probes["sweep_lipschitz"] = sweep_lipschitz;

  try {
    const Eigen::VectorXd degenerate = newton_hc(
        loss, Eigen::VectorXd::Constant(1, 0.1),
        Eigen::VectorXd::Constant(1, 1.0 / std::sqrt(3.0)), 1e-10, 50);
    probes["degenerate_probe"] = "converged";
    probes["degenerate_root"] = degenerate[0];
  } catch (const SingularityError&) {
    probes["degenerate_probe"] = "singularity";
  } catch (const NonConvergenceError&) {
    probes["degenerate_probe"] = "non_convergence";
  }
  ctx.summary["quartic"] = probes;

  const Eigen::VectorXd theta0 =
      resolve_theta0(s, 1, ctx.rng, Eigen::VectorXd::Constant(1, 0.02));
  traj = integrate_coupled(alg, exo, loss, resolve_z0(s, 1), theta0,
                           ctx.integrator);
}

void run_traffic(RunContext& ctx, const Scenario& s, Trajectory& traj) {
  const Network net = parse_network(s.network_text);
  const InflowExosystem inflow = inflow_exosystem(s.inflow);
  const LossModel scalar_loss = lagrangian_loss(net);
  const LossModel loss =
      reparameterize(scalar_loss, inflow.readout.transpose());
  const int ne = net.edge_count();

  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(loss.x_dim);
  const Eigen::VectorXd wzero = Eigen::VectorXd::Zero(5);
  const Eigen::MatrixXd R = hessian_at(loss, origin, wzero);
  const Eigen::MatrixXd Q = theta_jacobian_at(loss, origin, wzero);
  const Eigen::MatrixXd S = inflow.exosystem.jacobian_at_origin;
  ctx.summary["detectable"] = is_detectable(Q, S);

  const ParameterFeedbackMap hc = quadratic_hc(R, Q);
  const GradientFeedbackAlgorithm alg =
      algorithm_one(inflow.exosystem, loss, hc, s.margin);
  ctx.summary["spectral"]["s_minus_lq_abscissa"] =
      eigenvalues(S - alg.L * Q).spectral_abscissa;
  ctx.summary["spectral"]["closed_loop_abscissa"] =
      closed_loop_jacobian(alg, loss).spectral_abscissa;

  const Eigen::VectorXd theta0 =
      resolve_theta0(s, 5, ctx.rng, inflow.initial_state);
  const Eigen::VectorXd z0 = resolve_z0(s, alg.n_c);

  traj = integrate_coupled(
      alg, inflow.exosystem, loss, z0, theta0, ctx.integrator,
      [ne](const Eigen::VectorXd& xt) { return project_nonneg(xt, ne); });

  // Optimality along the trajectory, against the instantaneous frozen-inflow
  // problem.
  const IncidenceSystem sys = incidence_and_divergence(net);
  const int m = static_cast<int>(traj.times.size());
  const int origin_row = [&sys, &net] {
    for (std::size_t r = 0; r < sys.row_nodes.size(); ++r) {
      if (sys.row_nodes[r] == net.origin) return static_cast<int>(r);
    }
    return -1;
  }();

  double kkt_max_after_2h = 0.0;
  double kkt_final = 0.0;
  double conservation_interior_max = 0.0;
  double tracking_sup_after_2h = 0.0;
  double time_stays_below = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> kkt_series(m);
  for (int k = 0; k < m; ++k) {
    const double t = traj.times[k];
    const Eigen::VectorXd flows = traj.x.row(k).head(ne);
    const Eigen::VectorXd lam = traj.x.row(k).tail(loss.x_dim - ne);
    const double level = inflow.readout.dot(traj.theta.row(k));
    kkt_series[k] = wardrop_kkt_residual(net, flows, lam, level);

    const Eigen::VectorXd cons = sys.incidence * flows - sys.delta(level);
    for (int r = 0; r < cons.size(); ++r) {
      if (r == origin_row) continue;
      conservation_interior_max =
          std::max(conservation_interior_max, std::abs(cons[r]));
    }
    if (t >= 2.0) {
      kkt_max_after_2h = std::max(kkt_max_after_2h, kkt_series[k]);
      const WardropSolution oracle =
          solve_static_wardrop(net, std::max(level, 0.0));
      tracking_sup_after_2h =
          std::max(tracking_sup_after_2h,
                   (flows - oracle.flows).lpNorm<Eigen::Infinity>());
    }
  }
  kkt_final = kkt_series.empty() ? 0.0 : kkt_series.back();
  for (int k = 0; k < m; ++k) {
    bool stays = true;
    for (int j = k; j < m; ++j) {
      if (kkt_series[j] >= 1e-3) {
        stays = false;
        break;
      }
    }
    if (stays) {
      time_stays_below = traj.times[k];
      break;
    }
  }

  nlohmann::json tj;
  tj["kkt_max_after_2h"] = kkt_max_after_2h;
  tj["kkt_final"] = kkt_final;
  tj["time_to_kkt_below_1e-3"] = time_stays_below;
  tj["conservation_interior_max"] = conservation_interior_max;
  tj["tracking_sup_after_2h"] = tracking_sup_after_2h;
  ctx.summary["traffic"] = tj;
}

void run_mismatch(RunContext& ctx, const Scenario& s, Trajectory& traj) {
  LinearClosedLoop cl;
  if (s.mismatch_mode == "jordan") {
    cl = jordan_example_loop(s.epsilon1, s.epsilon2);
  } else {
    cl = random_constant_mismatch_loop(s.mismatch_n, s.mismatch_p, ctx.rng);
  }
  const int p = static_cast<int>(cl.S.rows());
  Eigen::VectorXd fallback = Eigen::VectorXd::Ones(p);
  const Eigen::VectorXd theta0 = resolve_theta0(s, p, ctx.rng, fallback);

  nlohmann::json mj;
  mj["mode"] = s.mismatch_mode;
  mj["delta_norm"] = cl.Delta.norm();
  mj["error_matrix_abscissa"] =
      eigenvalues(error_system(cl).A_err).spectral_abscissa;

  const AsymptoticGradient limit = asymptotic_gradient_limit(cl, theta0);
  mj["fvt_verdict"] = limit.divergent ? "divergent" : "finite";
  if (limit.divergent) {
    mj["growth_exponent"] = limit.growth_exponent;
  } else {
    mj["y_inf"] = vector_to_json(limit.y_inf);
    mj["y_inf_norm"] = limit.y_inf.norm();
  }

  traj = simulate_mismatch(cl, theta0, ctx.integrator);

  if (s.mismatch_mode == "jordan") {
    auto norm_at = [&traj](double t) {
      int best = 0;
      for (int k = 0; k < traj.times.size(); ++k) {
        if (std::abs(traj.times[k] - t) <
            std::abs(traj.times[best] - t)) {
          best = k;
        }
      }
      return traj.y.row(best).norm();
    };
    const double y10 = norm_at(10.0);
    const double y100 = norm_at(100.0);
    mj["y_norm_at_10"] = y10;
    mj["y_norm_at_100"] = y100;
    mj["growth_factor_10_to_100"] = y10 > 0.0 ? y100 / y10 : 0.0;
  } else {
    const Eigen::VectorXd y_inf = asymptotic_gradient_constant(cl, theta0);
    mj["y_inf_closed_form"] = vector_to_json(y_inf);
    const ErrorSystem sys = error_system(cl);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(
        sys.output * sys.A_err.inverse());
    mj["norm_bound"] =
        svd.singularValues()[0] * theta0.norm() * cl.Delta.norm();
    const Eigen::VectorXd y_end = traj.y.row(traj.times.size() - 1);
    mj["sim_tail_rel_err"] =
        (y_end - y_inf).norm() / std::max(y_inf.norm(), 1e-30);
  }
  ctx.summary["mismatch"] = mj;
}

}  // namespace

nlohmann::json run_scenario(const Scenario& scenario, const RunOptions& opts) {
  Scenario s = scenario;
  if (opts.seed_override) s.seed = *opts.seed_override;
  if (opts.samples_override) {
    if (*opts.samples_override < 2) {
      throw ValidationError("run: samples override must be at least 2");
    }
    s.integrator.samples = *opts.samples_override;
  }

  RunContext ctx{s, s.integrator, Rng(s.seed), nlohmann::json::object()};
  ctx.summary["schema_version"] = 1;
  ctx.summary["name"] = s.name;
  ctx.summary["seed"] = s.seed;
  ctx.summary["timestamp_utc"] = utc_timestamp();

  Trajectory traj;
  switch (s.kind) {
    case ScenarioKind::quadratic:
      ctx.summary["kind"] = "quadratic";
      run_quadratic(ctx, s, traj);
      break;
    case ScenarioKind::quartic:
      ctx.summary["kind"] = "quartic";
      run_quartic(ctx, s, traj);
      break;
    case ScenarioKind::traffic:
      ctx.summary["kind"] = "traffic";
      run_traffic(ctx, s, traj);
      break;
    case ScenarioKind::mismatch:
      ctx.summary["kind"] = "mismatch";
      run_mismatch(ctx, s, traj);
      break;
  }

  ctx.summary["metrics"] = metrics_to_json(traj);
  ctx.summary["diverged"] = traj.diverged;
  ctx.summary["blow_up_time"] = traj.blow_up_time;

  fs::create_directories(opts.out_dir);
  const fs::path csv_path = fs::path(opts.out_dir) / (s.name + "_trajectory.csv");
  const fs::path json_path = fs::path(opts.out_dir) / (s.name + "_summary.json");
  write_csv(traj, csv_path.string());
  ctx.summary["outputs"]["trajectory_csv"] = csv_path.string();

  std::ofstream out(json_path);
  if (!out) {
    throw ValidationError("run: cannot write " + json_path.string());
  }
  out << ctx.summary.dump(2) << '\n';
  return ctx.summary;
}

}  // namespace tvopt
