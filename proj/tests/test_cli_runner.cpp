#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfse/cli_runner.hpp"
#include "cfse/errors.hpp"

using namespace cfse;
namespace fs = std::filesystem;

namespace {

std::string bin() {
  const char* b = std::getenv("CFSE_BIN");
  return b ? b : "";
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cfse_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmall = R"([run]
seed = 7
[entropy]
beta = 0, 1
K = 20
scale_samples = 64
h_rounds = 1
t_sweeps = 1
restarts = 1
)";

fs::path write_config(const fs::path& dir, const std::string& extra) {
  fs::path p = dir / "exp.ini";
  std::ofstream(p) << kSmall << "[output]\ndir = " << (dir / "out").string() << "\n" << extra;
  return p;
}

struct Result {
  int code = -1;
  std::string log;
};

Result run(const fs::path& cfg, const std::string& cmd, const std::string& flags = "") {
  fs::path log = cfg.parent_path() / "log.txt";
  std::string line = bin() + " " + cmd + " --config " + cfg.string() + " " + flags + " 2> " + log.string();
  int st = std::system(line.c_str());
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, slurp(log)};
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = ExperimentConfig::parse("[model]\nf = 6\nkappa = 2.5\n[vacuum]\nfrequencies = 0, 1, 2, 3, 4, 5\n");
  CHECK(c.f == 6);
  CHECK(c.model.kappa == 2.5);
  CHECK(c.frequencies.size() == 6);
  CHECK(c.K == 100);
  CHECK(!c.sha256.empty());
  CHECK(ExperimentConfig::parse("").sha256 != c.sha256);

  auto throws_kind = [](const std::string& text) {
    try {
      ExperimentConfig::parse(text);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::InvalidArgument;
    }
    return false;
  };
  CHECK(throws_kind("[model]\ncolour = red\n"));
  CHECK(throws_kind("[nowhere]\nf = 1\n"));
  CHECK(throws_kind("[model]\nf = four\n"));
  CHECK(throws_kind("[model]\ns_policy = maximal\n"));
  CHECK(throws_kind("[entropy]\ndt = 0.1, 0.2\n"));
  CHECK(throws_kind("[entangle]\nsites = 1, 2\n"));
}

TEST_CASE("run_command reports missing files") {
  std::ostringstream log;
  CliOptions o;
  o.command = "vacuum";
  o.config_path = "/nonexistent/exp.ini";
  CHECK(run_command(o, log) == kExitValidation);
  o.command = "bogus";
  CHECK(run_command(o, log) == kExitValidation);
}

TEST_CASE("command line tool") {
  REQUIRE(!bin().empty());
  fs::path dir = scratch("main");
  fs::path cfg = write_config(dir, "");

  auto missing = run(cfg, "entropy");
  CHECK(missing.code == kExitValidation);

  auto vac = run(cfg, "vacuum");
  CHECK(vac.code == kExitOk);
  CHECK(vac.log.find("EL residual") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "vacuum.json"));

  auto ent = run(cfg, "entropy");
  REQUIRE(ent.code == kExitOk);
  auto csv = slurp(dir / "out" / "sweep.csv");
  CHECK(csv.rfind("beta,axis,x,value,mc_error,status\n", 0) == 0);
  CHECK(fs::exists(dir / "out" / "ensemble.jsonl"));
  auto report = slurp(dir / "out" / "report.json");
  CHECK(report.find("config_sha256") != std::string::npos);

  auto sw = run(cfg, "sweep");
  REQUIRE(sw.code == kExitOk);
  auto rows = slurp(dir / "out" / "sweep.csv");
  CHECK(rows.find("\n0,static,0,0,0,ok\n") != std::string::npos);

  // Reruns are byte identical, also across thread counts.
  auto first = slurp(dir / "out" / "report.json");
  REQUIRE(run(cfg, "sweep", "--threads 3").code == kExitOk);
  CHECK(slurp(dir / "out" / "report.json") == first);
  CHECK(slurp(dir / "out" / "sweep.csv") == rows);
}

TEST_CASE("command line validation errors") {
  REQUIRE(!bin().empty());
  fs::path dir = scratch("errors");

  auto np = run(write_config(dir, "[vacuum]\nfrequencies = 0, 1.5, 2, 3\n"), "vacuum");
  CHECK(np.code == kExitValidation);
  CHECK(np.log.find("NonPeriodicGenerator") != std::string::npos);

  CHECK(run(write_config(dir, "[model]\nflavour = up\n"), "vacuum").code == kExitValidation);

  fs::path cfg = write_config(dir, "[entangle]\nsites = 1, 0, 1\n");
  REQUIRE(run(cfg, "vacuum").code == kExitOk);
  CHECK(run(cfg, "entangle").code == kExitValidation);

  CHECK(run(cfg, "entropy", "--threads 0").code == kExitValidation);
}
