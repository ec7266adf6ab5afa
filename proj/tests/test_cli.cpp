#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/cli.hpp"

using namespace kpp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("kppwave_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

int run_bin(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + KPPWAVE_BIN + std::string(" ") + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run_bin("") == 2);
  CHECK(run_bin("nonsense") == 2);
  CHECK(run_bin("roots --order") == 2);
  CHECK(run_bin("solve-tw --family nope --out-dir /tmp") == 2);
  CHECK(run_bin("solve-tw --nodes 3 --out-dir /tmp") == 2);
  CHECK(run_bin("--help") == 0);
}

TEST_CASE("I/O and numerical failures have their own codes") {
  CHECK(run_bin("roots --config /nonexistent.cfg") == 4);
  CHECK(run_bin("roots --out-dir /proc/none/x") == 4);
  const auto d = scratch_dir("num");
  CHECK(run_bin("verify-exact --name example3 --lambda0 -119 --out-dir " + d.string()) == 3);
  CHECK(fs::exists(d / "verify_exact.manifest.json"));
}

TEST_CASE("outputs reference their manifest") {
  const auto d = scratch_dir("roots");
  REQUIRE(run_bin("roots --order 4 --n 0 --lambda 0 --out-dir " + d.string()) == 0);
  CHECK(slurp(d / "roots.csv").rfind("# manifest: roots.manifest.json", 0) == 0);
  const auto m = io::read_json_file(d / "roots.manifest.json");
  CHECK(m["command"] == "roots");
  CHECK(m["exit_code"] == 0);
  CHECK(m["parameters"]["order"] == "4");
  CHECK(io::read_json_file(d / "roots.json")["manifest"] == "roots.manifest.json");
}

TEST_CASE("environment variable sets the default output directory") {
  const auto d = scratch_dir("env");
  REQUIRE(run_bin("equilibrium --n 1", std::string(cli::kOutDirEnv) + "=" + d.string()) == 0);
  CHECK(fs::exists(d / "equilibrium.csv"));
}

TEST_CASE("flags beat the config file, which beats defaults") {
  const auto d = scratch_dir("cfg");
  {
    std::ofstream os(d / "run.cfg");
    os << "# sweep\nfamily = kpp4n\nn = 0\nlambda = 0.5\nstem = from_file\nquiet = true\n";
  }
  REQUIRE(run_bin("solve-tw --config " + (d / "run.cfg").string() + " --lambda 1 --out-dir " + d.string()) == 0);
  const auto j = io::read_json_file(d / "from_file.json");
  CHECK(j["spec"]["lambda"] == 1.0);
  CHECK(j["spec"]["n"] == 0.0);
  CHECK(j["config"]["grid"]["nodes"] == 1601);
}

TEST_CASE("rerunning from the emitted config reproduces the CSV") {
  const auto d = scratch_dir("rerun");
  REQUIRE(run_bin("kpp2-speed --y-right 30 --out-dir " + d.string()) == 0);
  const std::string first = slurp(d / "kpp2_speed.csv");
  fs::remove(d / "kpp2_speed.csv");
  REQUIRE(run_bin("kpp2-speed --config " + (d / "kpp2_speed.config").string() + " --out-dir " + d.string()) == 0);
  CHECK(slurp(d / "kpp2_speed.csv") == first);
}

TEST_CASE("sweeps fan out over jobs with one file per point") {
  const auto d = scratch_dir("sweep");
  REQUIRE(run_bin("solve-tw --family kpp4n --n 0,0.1 --lambda 1 --jobs 2 -q --out-dir " + d.string()) == 0);
  CHECK(fs::exists(d / "solve_tw_n0_lambda1.csv"));
  CHECK(fs::exists(d / "solve_tw_n0.1_lambda1.csv"));
}

TEST_CASE("seeded runs are reproducible") {
  const auto d = scratch_dir("seed");
  REQUIRE(run_bin("fit-shift --synthetic --seed 5 --stem a -q --out-dir " + d.string()) == 0);
  REQUIRE(run_bin("fit-shift --synthetic --seed 5 --stem b -q --out-dir " + d.string()) == 0);
  CHECK(io::read_json_file(d / "a.json")["k_fit"] == io::read_json_file(d / "b.json")["k_fit"]);
  CHECK(io::read_json_file(d / "a.manifest.json")["seeds"][0] == 5);
}

TEST_CASE("config tokens and list parsing") {
  const auto d = scratch_dir("tokens");
  {
    std::ofstream os(d / "c.cfg");
    os << "# c\nt_end = 5\n\nfit_window = \"1:2\"\n";
  }
  const auto toks = cli::config_tokens(d / "c.cfg");
  CHECK(toks == std::vector<std::string>{"--t-end=5", "--fit-window=1:2"});
  const auto spliced = cli::splice_config({"kppwave", "simulate", "--config", (d / "c.cfg").string(), "--t-end", "7"},
                                          {"simulate"});
  CHECK(spliced[2] == "--t-end=5");
  CHECK(spliced.back() == "7");
  const auto v = cli::parse_list("0.5, 1,inf");
  CHECK(v.size() == 3);
  CHECK(std::isinf(v[2]));
  CHECK_THROWS_AS(cli::parse_list("1,x"), std::invalid_argument);
  CHECK(cli::parse_window("50:500") == std::pair{50.0, 500.0});
}
