#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "config.hpp"
#include "reparam/errors.hpp"

using reparam::cli::Config;
namespace fs = std::filesystem;

namespace {

const std::string kBinary = REPARAM_BINARY;
const std::string kConfigs = REPARAM_CONFIG_DIR;
const fs::path kScratch = REPARAM_SCRATCH_DIR;

int run(const std::string& args) {
  const std::string cmd = "\"" + kBinary + "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse(
      "# comment\nscenario.T = 5\nparametrization.init = 1, 0.5\n"
      "parametrization.matrices[0] = 1 0; 0 2\nloss.segments[0].type = linear\n"
      "loss.segments[1].type = zero\n");
  CHECK(c.real("scenario.T") == 5.0);
  CHECK(c.vector("parametrization.init").size() == 2);
  CHECK(c.matrix("parametrization.matrices[0]")(1, 1) == 2.0);
  CHECK(c.count_indexed("loss.segments") == 2);
  CHECK(c.real("scenario.t_max", 7.0) == 7.0);
  CHECK_THROWS_AS(c.real("scenario.missing"), reparam::ConfigError);
  CHECK_THROWS_AS(Config::parse("scenario.T = 1\nscenario.T = 2\n"), reparam::ConfigError);
  CHECK_THROWS_AS(Config::parse("bogus.key = 1\n"), reparam::ConfigError);
  CHECK_THROWS_AS(Config::parse("no equals sign\n"), reparam::ConfigError);
  try {
    Config::parse("scenario.T = 1\n\nscenario.T = 2\n", "x.cfg");
  } catch (const reparam::ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:3") != std::string::npos);
  }
  Config d = Config::parse("scenario.T = 5\nscenario.seed = 1\n");
  CHECK(d.hash() == Config::parse("scenario.seed = 1\nscenario.T = 5\n").hash());
  const std::string before = d.hash();
  d.set("scenario.T=6");
  CHECK(d.hash() != before);
  CHECK(d.where("scenario.T") == "override (scenario.T)");
  (void)d.real("scenario.T");
  CHECK(d.unused_keys() == std::vector<std::string>{"scenario.seed"});
}

TEST_CASE("usage errors exit with code 1") {
  fs::create_directories(kScratch);
  CHECK(run("simulate --config " + (kScratch / "does_not_exist.cfg").string()) == 1);
  CHECK(run("simulate") == 1);
  CHECK(run("no-such-command --config x") == 1);
  CHECK(run("simulate --config " + kConfigs + "/rk4_simulate.cfg --set parametrization.family=nope --out " +
            (kScratch / "bad").string()) == 1);
}

TEST_CASE("fixed-step runs are byte-identical") {
  const fs::path a = kScratch / "det_a", b = kScratch / "det_b";
  const std::string cfg = " --config " + kConfigs + "/rk4_simulate.cfg";
  REQUIRE(run("simulate" + cfg + " --out " + a.string()) == 0);
  REQUIRE(run("simulate" + cfg + " --out " + b.string()) == 0);
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(slurp(a / "simulate.json") == slurp(b / "simulate.json"));
  const nlohmann::json j = read_json(a / "simulate.json");
  CHECK(j["schema_version"] == 1);
  CHECK(j["command"] == "simulate");
  CHECK(j["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("check mismatch exits with code 2") {
  const std::string cfg = " --config " + kConfigs + "/uut_commuting.cfg --out " + (kScratch / "cc").string();
  CHECK(run("check-commuting" + cfg) == 0);
  CHECK(read_json(kScratch / "cc" / "check-commuting.json")["result"]["verdict"] == "non-commuting");
  CHECK(run("check-commuting" + cfg + " --set checks.expect=commuting") == 2);
}

TEST_CASE("equivalence artifacts") {
  const fs::path out = kScratch / "eq";
  REQUIRE(run("equivalence --jobs 2 --config " + kConfigs + "/u2v2_equivalence.cfg --set scenario.seeds=0,1 --out " +
              out.string()) == 0);
  const nlohmann::json j = read_json(out / "equivalence.json");
  CHECK(j["status"] == "pass");
  CHECK(fs::exists(out / "equivalence_seed0.csv"));
}
