#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "reparam/errors.hpp"
#include "scenarios.hpp"

namespace {

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d{
      {"check-commuting", "Lie-bracket commutation report, flow commutation and the nested-bracket condition"},
      {"simulate", "integrate one flow and write the trajectory CSV"},
      {"equivalence", "gradient flow on x against mirror flow on w"},
      {"bias", "underdetermined regression to convergence against the KKT oracle"},
      {"loop-test", "commutator-loop displacement sweep with log-log slope fit"},
      {"legendre-probe", "sampled Legendre and Bregman-function conditions for the potential"},
      {"domain-probe", "per-axis estimate of the flow domain of psi"},
  };
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace reparam::cli;
  CLI::App app{"reparam: reparametrized gradient flow and mirror flow experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  std::optional<long long> seed;
  int jobs = 1;
  for (const auto& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, descriptions().at(name));
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--set", overrides, "override a config entry, key=value (repeatable)");
    sub->add_option("--out", out_dir, "output directory for artifacts");
    sub->add_option("--seed", seed, "random seed (overrides scenario.seed)");
    sub->add_option("--jobs", jobs, "worker threads for independent sweep points")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitPass : kExitError;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    RunContext ctx;
    ctx.config = Config::load(config_path);
    for (const auto& assignment : overrides) ctx.config.set(assignment);
    if (seed) {
      if (*seed < 0) throw reparam::ConfigError("--seed must be non-negative");
      ctx.seed = static_cast<std::uint64_t>(*seed);
    } else {
      const long long s = ctx.config.integer("scenario.seed", 0);
      if (s < 0) throw reparam::ConfigError("scenario.seed must be non-negative");
      ctx.seed = static_cast<std::uint64_t>(s);
    }
    ctx.out_dir = out_dir;
    ctx.jobs = jobs;
    const CommandOutcome outcome = run_command(command, ctx);
    for (const auto& key : ctx.config.unused_keys()) {
      std::cerr << "warning: " << ctx.config.where(key) << " was not used by " << command << '\n';
    }
    std::cout << outcome.summary << '\n';
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
