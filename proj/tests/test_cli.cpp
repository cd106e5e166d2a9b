#include "common.hpp"

#include "rwflow/io.hpp"

#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;
using fixtures::problem_path;

namespace {

struct Result {
  int code;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rwflow_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

Result run_cli(const std::string& args) {
  const fs::path err = scratch("stderr.txt");
  const std::string cmd = std::string(RWFLOW_BIN) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(err);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli: 3-path Case A summary") {
  const fs::path out = scratch("caseA");
  const auto r = run_cli("run --problem " + problem_path("three_path_caseA.json") + " --out " + out.string() + " --plot");
  REQUIRE(r.code == 0);
  const json s = json::parse(slurp(out / "summary.json"));
  CHECK(s["extinction_time"].get<double>() >= 0.51);
  CHECK(s["extinction_time"].get<double>() <= 0.53);
  for (const auto& v : s["final_state"]) CHECK(v.get<double>() == doctest::Approx(0.25).epsilon(1e-10));
  CHECK(s["mass_drift"].get<double>() < 1e-10);
  CHECK(s["bound_checks"]["conservation"]["pass"] == true);
  CHECK(fs::exists(out / "events.json"));
  CHECK(fs::exists(out / "plot.svg"));
}

TEST_CASE("cli: 4-cycle events") {
  const fs::path out = scratch("cycle");
  REQUIRE(run_cli("--problem " + problem_path("four_cycle_partition.json") + " --out " + out.string()).code == 0);
  const json ev = json::parse(slurp(out / "events.json"));
  REQUIRE(ev.size() == 2u);
  CHECK(ev[0]["t"].get<double>() == doctest::Approx(0.5108).epsilon(1e-4));
  CHECK(ev[1]["t"].get<double>() == doctest::Approx(1.3218).epsilon(1e-4));
}

TEST_CASE("cli: malformed problem reports the pointer") {
  const fs::path bad = scratch("bad.json");
  std::ofstream(bad) << R"({"problem": {"type": "two_structure", "space1": {"type": "weighted_graph", "n": 2, "edges": [[0, 1, "w"]]}}})";
  const auto r = run_cli("run --problem " + bad.string() + " --out " + scratch("bad_out").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("/problem/space1/edges/0/2") != std::string::npos);
  const fs::path garbage = scratch("garbage.json");
  std::ofstream(garbage) << "{ nope";
  CHECK(run_cli("run --problem " + garbage.string()).code == 2);
  CHECK(run_cli("run --problem /nonexistent.json").code == 2);
  CHECK(run_cli("run --problem " + problem_path("kernel_two_structure_1d.json") + " --integrator exact_modes").code == 2);
  CHECK(run_cli("run --problem " + problem_path("three_path_caseA.json") + " --integrator rk4").code == 2);
}

TEST_CASE("cli: identical configs give byte-identical outputs") {
  const fs::path a = scratch("same_a"), b = scratch("same_b");
  const std::string args = " --problem " + problem_path("four_cycle_partition.json") + " --integrator implicit_euler --T 1 --h 0.01";
  REQUIRE(run_cli("run" + args + " --out " + a.string()).code == 0);
  REQUIRE(run_cli("run" + args + " --out " + b.string()).code == 0);
  CHECK(slurp(a / "trajectory.csv") == slurp(b / "trajectory.csv"));
  CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
}

TEST_CASE("cli: plot reads without mutating and is deterministic") {
  const fs::path out = scratch("plot");
  REQUIRE(run_cli("run --problem " + problem_path("three_path_caseA.json") + " --out " + out.string()).code == 0);
  const std::string before = slurp(out / "trajectory.csv");
  const std::string csv = (out / "trajectory.csv").string();
  const std::string ev = (out / "events.json").string();
  REQUIRE(run_cli("plot --csv " + csv + " --events " + ev + " --out " + (out / "p1.svg").string()).code == 0);
  REQUIRE(run_cli("plot --csv " + csv + " --events " + ev + " --out " + (out / "p2.svg").string()).code == 0);
  CHECK(slurp(out / "p1.svg") == slurp(out / "p2.svg"));
  CHECK(slurp(out / "trajectory.csv") == before);
  std::ofstream(out / "broken.csv") << "t,u0\n0,1\n";
  CHECK(run_cli("plot --csv " + (out / "broken.csv").string() + " --out " + (out / "p3.svg").string()).code != 0);
}

TEST_CASE("cli: verify passes with the certified constant and fails when inflated") {
  const fs::path out = scratch("verify");
  REQUIRE(run_cli("verify --problem " + problem_path("three_path_caseA.json") + " --out " + out.string()).code == 0);
  const json rep = json::parse(slurp(out / "verify.json"));
  bool saw_extinction = false;
  for (const auto& c : rep["checks"]) {
    CHECK(c["pass"] == true);
    if (c["check"] == "extinction_bound") {
      saw_extinction = true;
      CHECK(c["bound"].get<double>() == doctest::Approx(0.75));
      CHECK(c["observed"].get<double>() == doctest::Approx(0.5199).epsilon(2e-3));
    }
  }
  CHECK(saw_extinction);
  const auto bad = run_cli("verify --problem " + problem_path("three_path_caseA.json") + " --lambda 2 --out " + out.string());
  CHECK(bad.code == 1);
  const json fail = json::parse(slurp(out / "verify.json"));
  CHECK(fail["passed"] == false);
  for (const auto& c : fail["checks"]) {
    if (c["check"] == "decay_bound") {
      CHECK(c["pass"] == false);
      CHECK(c["at_time"].get<double>() > 0.0);
    }
  }
}

TEST_CASE("cli: sweep writes content-addressed directories") {
  const fs::path out = scratch("sweep");
  const std::string args = "sweep --problem " + problem_path("three_path_caseA.json") +
                           " --integrator implicit_euler --set h=0.01,0.02 --set T=0.2,0.3 --workers 2 --out " + out.string();
  REQUIRE(run_cli(args).code == 0);
  const json index = json::parse(slurp(out / "index.json"));
  REQUIRE(index.size() == 4u);
  std::set<std::string> keys;
  for (const auto& e : index) {
    keys.insert(e["key"].get<std::string>());
    CHECK(fs::exists(out / e["key"].get<std::string>() / "trajectory.csv"));
    CHECK(fs::exists(out / e["key"].get<std::string>() / "config.json"));
  }
  CHECK(keys.size() == 4u);
  // Rerunning reproduces the same keys and bytes.
  const std::string first = slurp(out / index[0]["key"].get<std::string>() / "summary.json");
  REQUIRE(run_cli(args).code == 0);
  CHECK(slurp(out / index[0]["key"].get<std::string>() / "summary.json") == first);
  CHECK(run_cli("sweep --problem " + problem_path("three_path_caseA.json") + " --set nonsense --out " + out.string()).code != 0);
}
