#include "rwflow/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace rwflow {

using nlohmann::json;

namespace {

std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

const json& field(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(child(ptr, key), "required field is missing");
  return *it;
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(ptr, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& ptr) {
  const double v = number(j, ptr);
  if (!(v > 0.0)) throw SchemaError(ptr, "expected a positive number");
  return v;
}

int index_in(const json& j, const std::string& ptr, int n) {
  if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer vertex index");
  const int v = j.get<int>();
  if (v < 0 || v >= n) throw SchemaError(ptr, "vertex index out of range [0, " + std::to_string(n) + ")");
  return v;
}

const json& array(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array");
  return j;
}

GrowthSpec growth(const json& j, const std::string& ptr) {
  const double p = number(j, ptr);
  if (p < 1.0) throw SchemaError(ptr, "growth exponent must be >= 1");
  return p == 1.0 ? GrowthSpec::tv() : GrowthSpec::power(p);
}

RandomWalkSpace graph_space(const json& j, const std::string& ptr) {
  const json& nj = field(j, "n", ptr);
  if (!nj.is_number_integer() || nj.get<int>() < 1) throw SchemaError(child(ptr, "n"), "expected a positive integer");
  const int n = nj.get<int>();
  const std::string eptr = child(ptr, "edges");
  const json& edges = array(field(j, "edges", ptr), eptr);
  Mat w = Mat::Zero(n, n);
  std::set<std::pair<int, int>> seen;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::string p = child(eptr, e);
    const json& ed = array(edges[e], p);
    if (ed.size() != 3) throw SchemaError(p, "edge must be [i, j, w]");
    const int a = index_in(ed[0], child(p, 0), n);
    const int b = index_in(ed[1], child(p, 1), n);
    const double wt = positive(ed[2], child(p, 2));
    if (!seen.insert({std::min(a, b), std::max(a, b)}).second) throw SchemaError(p, "duplicate edge");
    w(a, b) += wt;
    if (a != b) w(b, a) += wt;
  }
  try {
    return from_weighted_graph(w);
  } catch (const SpaceError& e) {
    throw SchemaError(ptr, e.what());
  }
}

GridDomain grid_from(const json& j, const std::string& ptr, int dim) {
  const std::string bptr = child(ptr, "box");
  const json& box = array(field(j, "box", ptr), bptr);
  if (static_cast<int>(box.size()) != dim) throw SchemaError(bptr, "box needs one [lo, hi] per dimension");
  std::vector<std::pair<double, double>> axes;
  for (std::size_t a = 0; a < box.size(); ++a) {
    const std::string p = child(bptr, a);
    const json& ax = array(box[a], p);
    if (ax.size() != 2) throw SchemaError(p, "expected [lo, hi]");
    const double lo = number(ax[0], child(p, 0));
    const double hi = number(ax[1], child(p, 1));
    if (!(hi > lo)) throw SchemaError(p, "expected lo < hi");
    axes.emplace_back(lo, hi);
  }
  return GridDomain(std::move(axes), positive(field(j, "h", ptr), child(ptr, "h")));
}

RandomWalkSpace kernel_space(const json& j, const std::string& ptr, std::optional<GridDomain>* grid) {
  const json& nj = field(j, "N", ptr);
  if (!nj.is_number_integer() || nj.get<int>() < 1 || nj.get<int>() > 3) {
    throw SchemaError(child(ptr, "N"), "dimension must be 1, 2 or 3");
  }
  const int dim = nj.get<int>();
  const json& prof = field(j, "profile", ptr);
  if (!prof.is_string()) throw SchemaError(child(ptr, "profile"), "expected a string");
  KernelProfile profile;
  try {
    profile = parse_profile(prof.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw SchemaError(child(ptr, "profile"), e.what());
  }
  std::vector<double> table;
  if (profile == KernelProfile::Table) {
    const std::string tptr = child(ptr, "table");
    const json& t = array(field(j, "table", ptr), tptr);
    for (std::size_t i = 0; i < t.size(); ++i) table.push_back(number(t[i], child(tptr, i)));
  }
  const double r = positive(field(j, "R", ptr), child(ptr, "R"));
  GridDomain g = grid_from(j, ptr, dim);
  try {
    KernelSpec spec(dim, profile, r, std::move(table));
    RandomWalkSpace s = build_kernel_space(spec, g);
    if (grid) *grid = g;
    return s;
  } catch (const std::invalid_argument& e) {
    throw SchemaError(ptr, e.what());
  }
}

VertexFunction vector_of(const json& j, const std::string& ptr, int n) {
  const json& a = array(j, ptr);
  if (static_cast<int>(a.size()) != n) {
    throw SchemaError(ptr, "expected " + std::to_string(n) + " values, got " + std::to_string(a.size()));
  }
  VertexFunction v(n);
  for (int i = 0; i < n; ++i) v(i) = number(a[i], child(ptr, i));
  return v;
}

VertexSets vertex_sets(const json& j, const std::string& ptr, int n) {
  const json& a = array(j, ptr);
  if (static_cast<int>(a.size()) != n) throw SchemaError(ptr, "expected one neighbour list per vertex");
  VertexSets sets(n);
  for (int x = 0; x < n; ++x) {
    const std::string p = child(ptr, x);
    const json& row = array(a[x], p);
    for (std::size_t i = 0; i < row.size(); ++i) sets[x].push_back(index_in(row[i], child(p, i), n));
  }
  return sets;
}

VertexFunction initial_datum(const json& j, const std::string& ptr, int n,
                             const std::optional<GridDomain>& grid) {
  if (j.is_array()) return vector_of(j, ptr, n);
  if (j.is_object() && j.contains("indicator")) {
    if (!grid) throw SchemaError(child(ptr, "indicator"), "indicator data needs a kernel grid");
    const std::string iptr = child(ptr, "indicator");
    const json& boxes = array(j["indicator"], iptr);
    std::vector<std::vector<std::pair<double, double>>> parsed;
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      const std::string p = child(iptr, b);
      const json& bx = array(boxes[b], p);
      std::vector<std::pair<double, double>> axes;
      if (bx.size() == 2 && bx[0].is_number()) {
        axes.emplace_back(number(bx[0], child(p, 0)), number(bx[1], child(p, 1)));
      } else {
        for (std::size_t a = 0; a < bx.size(); ++a) {
          const json& ax = array(bx[a], child(p, a));
          if (ax.size() != 2) throw SchemaError(child(p, a), "expected [lo, hi]");
          axes.emplace_back(number(ax[0], child(child(p, a), 0)), number(ax[1], child(child(p, a), 1)));
        }
      }
      if (static_cast<int>(axes.size()) != grid->dim()) throw SchemaError(p, "box dimension mismatch");
      parsed.push_back(std::move(axes));
    }
    return grid->indicator(parsed);
  }
  throw SchemaError(ptr, "expected an array of values or {\"indicator\": [...]}");
}

}  // namespace

RandomWalkSpace parse_space(const json& j, const std::string& ptr, std::optional<GridDomain>* grid) {
  const json& type = field(j, "type", ptr);
  if (!type.is_string()) throw SchemaError(child(ptr, "type"), "expected a string");
  const auto t = type.get<std::string>();
  if (t == "weighted_graph") return graph_space(j, ptr);
  if (t == "kernel") return kernel_space(j, ptr, grid);
  throw SchemaError(child(ptr, "type"), "unknown space type '" + t + "'");
}

namespace {

struct ParsedFunctional {
  Functional functional;
  int n;
  bool finite_graph;
  std::optional<GridDomain> grid;
};

ParsedFunctional parse_functional(const json& doc) {
  const std::string pptr = "/problem";
  const json& pj = field(doc, "problem", "");
  const json& type = field(pj, "type", pptr);
  if (!type.is_string()) throw SchemaError(child(pptr, "type"), "expected a string");
  std::optional<GridDomain> grid;
  const auto kind = type.get<std::string>();
  try {
    if (kind == "two_structure") {
      std::optional<GridDomain> grid2;
      RandomWalkSpace s1 = parse_space(field(pj, "space1", pptr), child(pptr, "space1"), &grid);
      RandomWalkSpace s2 = parse_space(field(pj, "space2", pptr), child(pptr, "space2"), &grid2);
      if (s1.size() != s2.size()) throw SchemaError(child(pptr, "space2"), "vertex count differs from space1");
      const bool finite = !grid && !grid2;
      const GrowthSpec q = growth(field(pj, "q", pptr), child(pptr, "q"));
      const GrowthSpec p = growth(field(pj, "p", pptr), child(pptr, "p"));
      const int n = s1.size();
      return {TwoStructureProblem(std::move(s1), std::move(s2), q, p), n, finite, grid};
    } else if (kind == "partition") {
      RandomWalkSpace s = parse_space(field(pj, "space", pptr), child(pptr, "space"), &grid);
      const int n = s.size();
      const VertexSets a = vertex_sets(field(pj, "A", pptr), child(pptr, "A"), n);
      const VertexSets b = vertex_sets(field(pj, "B", pptr), child(pptr, "B"), n);
      const GrowthSpec q = pj.contains("q") ? growth(pj["q"], child(pptr, "q")) : GrowthSpec::tv();
      const GrowthSpec p = growth(field(pj, "p", pptr), child(pptr, "p"));
      try {
        return {build_partition_kernels(s, a, b, q, p), n, !grid, grid};
      } catch (const SpaceError& e) {
        throw SchemaError(child(pptr, "A"), e.what());
      }
    }
    throw SchemaError(child(pptr, "type"), "unknown problem type '" + kind + "'");
  } catch (const SpaceError& e) {
    throw SchemaError(pptr, e.what());
  }
}

}  // namespace

LoadedProblem parse_problem(const json& doc) {
  if (!doc.is_object()) throw SchemaError("", "expected an object");
  auto [functional, n, finite, grid] = parse_functional(doc);
  LoadedProblem lp(std::move(functional));
  lp.document = doc;
  lp.finite_graph = finite;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw SchemaError("/name", "expected a string");
    lp.name = doc["name"].get<std::string>();
  }
  lp.u0 = initial_datum(field(doc, "u0", ""), "/u0", n, grid);
  if (doc.contains("source")) lp.source = vector_of(doc["source"], "/source", n);
  if (doc.contains("T")) lp.T = positive(doc["T"], "/T");
  if (doc.contains("h")) lp.h = positive(doc["h"], "/h");
  if (doc.contains("tol")) lp.tol = positive(doc["tol"], "/tol");
  if (lp.h > lp.T) throw SchemaError("/h", "step exceeds the horizon");
  if (doc.contains("integrator")) {
    if (!doc["integrator"].is_string()) throw SchemaError("/integrator", "expected a string");
    lp.integrator = doc["integrator"].get<std::string>();
    if (lp.integrator != "implicit_euler" && lp.integrator != "exact_modes") {
      throw SchemaError("/integrator", "expected implicit_euler or exact_modes");
    }
  }
  if (doc.contains("checks")) {
    if (!doc["checks"].is_object()) throw SchemaError("/checks", "expected an object");
    lp.checks = doc["checks"];
  }
  return lp;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
}

LoadedProblem load_problem(const std::string& path) { return parse_problem(read_json_file(path)); }

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const auto n = traj.states.empty() ? 0 : traj.states.front().size();
  os << "t";
  for (Eigen::Index i = 0; i < n; ++i) os << ",u" << i;
  os << ",mass,energy,dist_mean_L1,dist_mean_L2\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    os << format_double(traj.times[k]);
    for (Eigen::Index i = 0; i < n; ++i) os << ',' << format_double(traj.states[k](i));
    const auto& d = traj.diagnostics[k];
    os << ',' << format_double(d.mass) << ',' << format_double(d.energy) << ','
       << format_double(d.dist_l1) << ',' << format_double(d.dist_l2) << '\n';
  }
}

CsvTrajectory read_trajectory_csv(std::istream& is) {
  CsvTrajectory out;
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trajectory CSV");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.header.push_back(cell);
  }
  if (out.header.size() < 5 || out.header[0] != "t") throw std::runtime_error("trajectory CSV header must start with t");
  for (std::size_t i = 1; i < out.header.size(); ++i) {
    if (out.header[i] != "u" + std::to_string(i - 1)) break;
    ++out.vertices;
  }
  if (out.header.size() != static_cast<std::size_t>(out.vertices) + 5) {
    throw std::runtime_error("trajectory CSV header has unexpected columns");
  }
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("trajectory CSV row " + std::to_string(row) + ": bad number '" + cell + "'");
      }
    }
    if (vals.size() != out.header.size()) {
      throw std::runtime_error("trajectory CSV row " + std::to_string(row) + " has " +
                               std::to_string(vals.size()) + " columns");
    }
    out.times.push_back(vals[0]);
    out.values.emplace_back(vals.begin() + 1, vals.begin() + 1 + out.vertices);
  }
  return out;
}

json events_json(const std::vector<ExactEvent>& events) {
  json arr = json::array();
  for (const auto& e : events) {
    json edges = json::array();
    for (const auto& [a, b] : e.edges) edges.push_back({a, b});
    std::vector<double> state(e.state.data(), e.state.data() + e.state.size());
    arr.push_back({{"t", e.t}, {"kind", e.kind}, {"edges", edges}, {"state", state}});
  }
  return arr;
}

std::vector<double> read_event_times(const json& j) {
  if (!j.is_array()) throw SchemaError("", "events must be an array");
  std::vector<double> t;
  for (std::size_t i = 0; i < j.size(); ++i) t.push_back(number(field(j[i], "t", child("", i)), child(child("", i), "t")));
  return t;
}

}  // namespace rwflow
