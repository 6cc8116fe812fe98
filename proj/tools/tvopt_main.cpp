#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tvopt/errors.hpp"
#include "tvopt/scenario.hpp"

namespace {

int dispatch_run(const std::string& target, const tvopt::RunOptions& opts,
                 const std::string& scenario_dir) {
  const tvopt::Scenario scenario = tvopt::load_scenario(target, scenario_dir);
  const nlohmann::json summary = tvopt::run_scenario(scenario, opts);
  std::cout << summary.dump(2) << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tvopt: synthesis and simulation of tracking optimization "
               "algorithms"};
  app.require_subcommand(1);

  std::string target;
  std::string out_dir = ".";
  std::string scenario_dir;
  std::uint64_t seed = 0;
  int samples = 0;

  auto* run = app.add_subcommand("run", "run a scenario and write artifacts");
  run->add_option("scenario", target, "bundled scenario name or config path")
      ->required();
  run->add_option("--out", out_dir, "output directory (default: .)");
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--samples", samples, "override the output grid size");
  run->add_option("--scenario-dir", scenario_dir,
                  "extra directory searched for <name>.cfg");

  auto* list = app.add_subcommand("list", "list available scenarios");
  list->add_option("--scenario-dir", scenario_dir,
                   "extra directory searched for *.cfg");

  auto* validate =
      app.add_subcommand("validate", "parse and validate a config");
  validate->add_option("scenario", target, "scenario name or config path")
      ->required();
  validate->add_option("--scenario-dir", scenario_dir,
                       "extra directory searched for <name>.cfg");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list->parsed()) {
      for (const auto& name : tvopt::list_scenarios(scenario_dir)) {
        std::cout << name << '\n';
      }
      return 0;
    }
    if (validate->parsed()) {
      tvopt::load_scenario(target, scenario_dir);
      std::cout << "ok: " << target << '\n';
      return 0;
    }
    tvopt::RunOptions opts;
    opts.out_dir = out_dir;
    if (run->count("--seed") > 0) opts.seed_override = seed;
    if (run->count("--samples") > 0) opts.samples_override = samples;
    return dispatch_run(target, opts, scenario_dir);
  } catch (const tvopt::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << std::endl;
    return 1;
  } catch (const tvopt::ParseError& e) {
    std::cerr << "parse error: " << e.what() << std::endl;
    return 1;
  } catch (const tvopt::InfeasibilityError& e) {
    std::cerr << "infeasible: " << e.what() << std::endl;
    return 1;
  } catch (const tvopt::SynthesisError& e) {
    std::cerr << "synthesis error: " << e.what() << std::endl;
    return 1;
  } catch (const tvopt::DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << std::endl;
    return 1;
  } catch (const tvopt::Error& e) {
    std::cerr << "numeric error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
}
