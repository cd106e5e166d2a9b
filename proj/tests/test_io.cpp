#include "common.hpp"

#include "rwflow/io.hpp"
#include "rwflow/plot.hpp"

#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <set>
#include <sstream>

using namespace rwflow;
using namespace fixtures;
using nlohmann::json;

namespace {

json base_problem() {
  return json::parse(R"({
    "problem": {"type": "two_structure",
      "space1": {"type": "weighted_graph", "n": 3, "edges": [[0, 1, 1], [1, 2, 1]]},
      "space2": {"type": "weighted_graph", "n": 3, "edges": [[0, 1, 1], [1, 2, 1]]},
      "q": 1, "p": 2},
    "u0": [1, 0, 0], "T": 1, "h": 0.001})");
}

std::string pointer_of(const json& doc) {
  try {
    parse_problem(doc);
  } catch (const SchemaError& e) {
    return e.pointer();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("every bundled problem parses") {
  for (const auto& entry : std::filesystem::directory_iterator(RWFLOW_PROBLEMS_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const auto lp = load_problem(entry.path().string());
    CHECK(lp.u0.size() == compile(lp.functional).size());
    CHECK_FALSE(lp.name.empty());
  }
}

TEST_CASE("problem fields") {
  const auto lp = parse_problem(base_problem());
  CHECK(lp.T == 1.0);
  CHECK(lp.h == 0.001);
  CHECK(lp.integrator == "implicit_euler");
  CHECK(lp.finite_graph);
  CHECK(eval_energy(lp.functional, lp.u0) == doctest::Approx(1.5));
}

TEST_CASE("schema errors carry JSON pointers") {
  json d = base_problem();
  d["problem"].erase("type");
  CHECK(pointer_of(d) == "/problem/type");

  d = base_problem();
  d["problem"]["space1"]["edges"].push_back({1, 0, 2.0});
  CHECK(pointer_of(d) == "/problem/space1/edges/2");

  d = base_problem();
  d["problem"]["space2"]["edges"][1][2] = -1.0;
  CHECK(pointer_of(d) == "/problem/space2/edges/1/2");

  d = base_problem();
  d["u0"] = {1, 0};
  CHECK(pointer_of(d) == "/u0");

  d = base_problem();
  d["u0"][2] = "x";
  CHECK(pointer_of(d) == "/u0/2");

  d = base_problem();
  d["integrator"] = "rk4";
  CHECK(pointer_of(d) == "/integrator");

  d = base_problem();
  d["problem"]["p"] = 0.5;
  CHECK(pointer_of(d) == "/problem/p");

  d = base_problem();
  d["problem"]["space1"]["type"] = "hypergraph";
  CHECK(pointer_of(d) == "/problem/space1/type");

  d = base_problem();
  d["problem"]["space2"]["n"] = 4;
  d["problem"]["space2"]["edges"].push_back({2, 3, 1.0});
  CHECK(pointer_of(d) == "/problem/space2");

  d = base_problem();
  d["h"] = 5.0;
  CHECK(pointer_of(d) == "/h");

  CHECK(pointer_of(json::array()) == "");
}

TEST_CASE("partition and kernel problems") {
  const auto cyc = load_problem(problem_path("four_cycle_partition.json"));
  CHECK(std::holds_alternative<PartitionProblem>(cyc.functional));
  CHECK(mass(compile(cyc.functional).metric(), cyc.u0) == 6.0);

  json bad = read_json_file(problem_path("four_cycle_partition.json"));
  bad["problem"]["B"][0] = json::array();
  CHECK(pointer_of(bad) == "/problem/A");
  bad = read_json_file(problem_path("four_cycle_partition.json"));
  bad["problem"]["A"] = {{3}, {2}};
  CHECK(pointer_of(bad) == "/problem/A");

  const auto ker = load_problem(problem_path("kernel_two_structure_1d.json"));
  CHECK_FALSE(ker.finite_graph);
  CHECK(ker.u0.size() == 41);
  CHECK(ker.u0.sum() == 21.0);

  json k = read_json_file(problem_path("kernel_two_structure_1d.json"));
  k["problem"]["space1"]["profile"] = "cosine";
  CHECK(pointer_of(k) == "/problem/space1/profile");
  k = read_json_file(problem_path("kernel_two_structure_1d.json"));
  k["problem"]["space1"]["box"] = {{0, 10}, {0, 1}};
  CHECK(pointer_of(k) == "/problem/space1/box");
}

TEST_CASE("trajectory CSV round trip is exact") {
  const auto model = compile(three_path(1.0, 1.0));
  const VertexFunction u0 = (VertexFunction(3) << 1.0 / 3.0, 0, 1e-300).finished();
  const auto tr = implicit_euler(model, u0, 0.05, 0.01, 1e-9);
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  const std::string text = os.str();
  CHECK(text.rfind("t,u0,u1,u2,mass,energy,dist_mean_L1,dist_mean_L2\n", 0) == 0);
  std::istringstream is(text);
  const auto back = read_trajectory_csv(is);
  REQUIRE(back.times.size() == tr.size());
  CHECK(back.vertices == 3);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    CHECK(back.times[k] == tr.times[k]);
    for (int i = 0; i < 3; ++i) CHECK(std::memcmp(&back.values[k][i], &tr.states[k](i), sizeof(double)) == 0);
  }
  std::istringstream broken("t,u0,mass,energy,dist_mean_L1,dist_mean_L2\n0,1,2,3,x,5\n");
  CHECK_THROWS(read_trajectory_csv(broken));
  std::istringstream short_row("t,u0,mass,energy,dist_mean_L1,dist_mean_L2\n0,1,2\n");
  CHECK_THROWS(read_trajectory_csv(short_row));
  std::istringstream empty("");
  CHECK_THROWS(read_trajectory_csv(empty));
}

TEST_CASE("events JSON") {
  const auto model = compile(three_path(1.0, 1.0));
  const auto ex = integrate_exact(model, (VertexFunction(3) << 1, 0, 0).finished(), 1.0);
  const json j = events_json(ex.events);
  REQUIRE(j.size() == 1u);
  CHECK(j[0]["kind"] == "merge");
  CHECK(j[0]["state"].size() == 3u);
  CHECK(j[0]["edges"][0] == json({0, 1}));
  CHECK(read_event_times(j)[0] == ex.events[0].t);
  CHECK_THROWS_AS(read_event_times(json::object()), SchemaError);
}

TEST_CASE("SVG rendering is deterministic and draws one line per vertex") {
  CsvTrajectory flat;
  flat.vertices = 2;
  for (int k = 0; k <= 10; ++k) {
    flat.times.push_back(0.1 * k);
    flat.values.push_back({0.5, 0.5});
  }
  const std::string a = render_svg(flat, {0.3});
  const std::string b = render_svg(flat, {0.3});
  CHECK(a == b);
  std::size_t lines = 0;
  for (std::size_t pos = a.find("<polyline"); pos != std::string::npos; pos = a.find("<polyline", pos + 1)) ++lines;
  CHECK(lines == 2u);
  CHECK(a.find("stroke-dasharray") != std::string::npos);
  // A constant trajectory gives a horizontal line: every point has the same y.
  const auto first = a.find("points=\"");
  const auto end = a.find('"', first + 8);
  std::istringstream pts(a.substr(first + 8, end - first - 8));
  std::string pt;
  std::set<std::string> ys;
  while (pts >> pt) ys.insert(pt.substr(pt.find(',') + 1));
  CHECK(ys.size() == 1u);
}
