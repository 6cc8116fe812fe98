#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tvopt/errors.hpp"
#include "tvopt/simulate.hpp"
#include "tvopt/traffic.hpp"

namespace tvopt {

enum class ScenarioKind { quadratic, quartic, traffic, mismatch };

// Fully parsed experiment description. The seed determines every randomized
// input, so a (config, seed) pair reproduces its outputs byte for byte.
struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::quadratic;
  std::uint64_t seed = 0;

  // quadratic problem: seeded recipe or explicit matrices
  bool use_random_problem = false;
  int problem_size = 4;
  Eigen::MatrixXd R, Q;

  // exosystem: seeded skew recipe, harmonic bank, or explicit matrix
  bool use_random_skew = false;
  std::vector<double> harmonic_frequencies;
  bool harmonic_constant = false;
  Eigen::MatrixXd S;

  // traffic
  std::string network_text;
  InflowModel inflow;

  // mismatch
  std::string mismatch_mode = "jordan";  // jordan | constant
  double epsilon1 = 0.5, epsilon2 = 0.5;
  int mismatch_n = 3, mismatch_p = 2;

  // initial conditions
  bool theta0_random_ball = false;
  double theta0_radius = 1.0;
  Eigen::VectorXd theta0;  // empty when random or defaulted
  Eigen::VectorXd z0;      // empty means zeros

  double margin = 1.0;
  IntegratorConfig integrator;
};

// Parses the line-oriented `key = value` scenario format ([section] headers,
// `#` comments, matrices as semicolon-separated rows or `@file.csv`).
// Unknown keys raise ValidationError naming the key.
Scenario parse_scenario(const std::string& text, const std::string& base_dir);

// Resolves a bundled scenario name or a config file path.
Scenario load_scenario(const std::string& name_or_path,
                       const std::string& user_dir = "");

// Bundled names plus `*.cfg` stems found in the optional user directory.
std::vector<std::string> list_scenarios(const std::string& user_dir = "");

const std::vector<std::string>& bundled_scenario_names();
std::string bundled_scenario_text(const std::string& name);
std::string bundled_network_text(const std::string& name);  // "braess"

struct RunOptions {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
  std::optional<int> samples_override;
};

// Runs synthesis + simulation + analysis, writes <name>_trajectory.csv and
// <name>_summary.json under out_dir, and returns the summary document.
nlohmann::json run_scenario(const Scenario& scenario, const RunOptions& opts);

}  // namespace tvopt
