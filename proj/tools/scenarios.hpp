#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "reparam/families.hpp"
#include "reparam/implicit_bias.hpp"
#include "reparam/integrator.hpp"
#include "reparam/legendre.hpp"
#include "reparam/loss.hpp"
#include "reparam/parametrization.hpp"

namespace reparam::cli {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;
constexpr int kSchemaVersion = 1;

struct Setup {
  std::string family;
  Parametrization g;
  Vector x_init;
  std::optional<CommutingQuadraticFamily> quadratic;  // when G is a commuting quadratic map
};

Setup build_setup(const Config& cfg, std::uint64_t seed);
IntegratorConfig build_integrator(const Config& cfg);
// Applies integrator.* keys on top of `base`.
IntegratorConfig build_integrator(const Config& cfg, IntegratorConfig base);
LegendreFunction build_potential(const Config& cfg, const Setup& setup);
std::optional<RegressionProblem> build_problem(const Config& cfg, Index d, std::uint64_t seed);
TimeDependentLoss build_loss(const Config& cfg, Index d, const std::optional<RegressionProblem>& problem);

struct RunContext {
  Config config;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct CommandOutcome {
  int exit_code = kExitPass;
  nlohmann::json report;  // full artifact, written to <out>/<command>.json
  std::string summary;    // one line for stdout
};

const std::vector<std::string>& command_names();

// Runs a subcommand, writes its artifacts under ctx.out_dir and returns the outcome.
CommandOutcome run_command(const std::string& command, const RunContext& ctx);

}  // namespace reparam::cli
