#include "rwflow/exact.hpp"
#include "rwflow/flow.hpp"
#include "rwflow/io.hpp"
#include "rwflow/log.hpp"
#include "rwflow/plot.hpp"
#include "rwflow/poincare.hpp"
#include "rwflow/prox.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rwflow;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kInputError = 2, kSolverError = 3 };

struct Settings {
  std::string problem;
  std::string integrator;
  std::optional<double> h, T, tol;
  std::string out = "out";
  bool plot = false;
  int workers = 1;
  std::uint64_t seed = 1;
  std::optional<double> lambda;
  std::vector<std::string> sweep_axes;
  std::string csv;
  std::string events;
};

// Overrides from the command line take precedence over the problem file.
void apply_overrides(const Settings& s, LoadedProblem& lp) {
  if (!s.integrator.empty()) {
    if (s.integrator != "implicit_euler" && s.integrator != "exact_modes") {
      throw SchemaError("/integrator", "expected implicit_euler or exact_modes");
    }
    lp.integrator = s.integrator;
  }
  if (s.h) lp.h = *s.h;
  if (s.T) lp.T = *s.T;
  if (s.tol) lp.tol = *s.tol;
  if (!(lp.h > 0.0) || !(lp.T > 0.0) || !(lp.tol > 0.0)) throw SchemaError("/h", "h, T and tol must be positive");
  if (lp.h > lp.T) throw SchemaError("/h", "step exceeds the horizon");
  if (lp.integrator == "exact_modes" && !lp.finite_graph) {
    throw SchemaError("/integrator", "exact_modes requires a finite-graph problem");
  }
}

struct RunOutput {
  Trajectory trajectory;
  std::optional<ExactResult> exact;
};

RunOutput integrate(const EnergyModel& model, const LoadedProblem& lp) {
  RunOutput out;
  if (lp.integrator == "exact_modes") {
    if (lp.source) throw SchemaError("/source", "exact_modes does not support sources");
    ExactOptions opt;
    opt.sample_dt = lp.h;
    out.exact = integrate_exact(model, lp.u0, lp.T, opt);
    out.trajectory = out.exact->trajectory;
    out.trajectory.tol = lp.tol;
  } else {
    Source src;
    if (lp.source) {
      const VertexFunction f = *lp.source;
      src = [f](double) { return f; };
    }
    out.trajectory = implicit_euler(model, lp.u0, lp.T, lp.h, lp.tol, src);
  }
  return out;
}

double extinction_eps(const LoadedProblem& lp) {
  if (lp.checks.contains("extinction_eps") && lp.checks["extinction_eps"].is_number()) {
    return lp.checks["extinction_eps"].get<double>();
  }
  return 1e-6;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const EnergyModel& model, const LoadedProblem& lp, const RunOutput& run) {
  const Trajectory& tr = run.trajectory;
  const auto cons = conservation_report(tr);
  double max_increase = 0.0;
  for (std::size_t k = 1; k < tr.diagnostics.size(); ++k) {
    max_increase = std::max(max_increase, tr.diagnostics[k].energy - tr.diagnostics[k - 1].energy);
  }
  const double e0 = tr.diagnostics.front().energy;
  const double allowance = std::max(1e-12, 10.0 * lp.tol) * (1.0 + std::abs(e0));
  json checks = {
      {"conservation", {{"pass", cons.holds()}, {"drift", cons.max_drift}, {"bound", cons.bound}}},
      {"energy_monotone", {{"pass", max_increase <= allowance}, {"max_increase", max_increase}, {"allowance", allowance}}},
  };
  if (!tr.certificates.empty()) {
    double stat = 0.0, comp = 0.0;
    for (const auto& c : tr.certificates) {
      stat = std::max(stat, c.stationarity);
      comp = std::max(comp, c.complementarity);
    }
    checks["certificates"] = {{"pass", stat <= 10.0 * lp.tol && comp <= 10.0 * lp.tol},
                              {"max_stationarity", stat},
                              {"max_complementarity", comp}};
  }
  json s = {
      {"problem", lp.name},
      {"integrator", lp.integrator},
      {"h", lp.h},
      {"T", lp.T},
      {"tol", lp.tol},
      {"vertices", model.size()},
      {"steps", tr.times.size() - 1},
      {"mass_drift", cons.max_drift},
      {"energy_final", tr.diagnostics.back().energy},
      {"extinction_time", optional_number(extinction_time(tr, extinction_eps(lp)))},
      {"extinction_eps", extinction_eps(lp)},
      {"final_state", std::vector<double>(tr.states.back().data(), tr.states.back().data() + tr.states.back().size())},
      {"bound_checks", checks},
  };
  if (run.exact) s["events"] = run.exact->events.size();
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
}

std::string csv_text(const Trajectory& tr) {
  std::ostringstream os;
  write_trajectory_csv(os, tr);
  return os.str();
}

// Writes the artifact set of one run into dir; returns the summary.
json run_into(const LoadedProblem& lp, const fs::path& dir, bool plot) {
  const EnergyModel model = compile(lp.functional);
  for (const auto& w : validity(lp.functional).warnings) log::warn(w);
  const RunOutput run = integrate(model, lp);
  fs::create_directories(dir);
  const std::string csv = csv_text(run.trajectory);
  write_text(dir / "trajectory.csv", csv);
  std::vector<double> event_times;
  if (run.exact) {
    write_text(dir / "events.json", events_json(run.exact->events).dump(2) + "\n");
    for (const auto& e : run.exact->events) event_times.push_back(e.t);
  }
  json summary = summary_json(model, lp, run);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  if (plot) {
    std::istringstream is(csv);
    PlotOptions po;
    po.title = lp.name;
    write_text(dir / "plot.svg", render_svg(read_trajectory_csv(is), event_times, po));
  }
  return summary;
}

LoadedProblem load(const Settings& s) {
  if (s.problem.empty()) throw CLI::RequiredError("--problem");
  if (!fs::exists(s.problem)) throw std::runtime_error("problem file '" + s.problem + "' does not exist");
  LoadedProblem lp = load_problem(s.problem);
  if (lp.name.empty()) lp.name = fs::path(s.problem).stem().string();
  apply_overrides(s, lp);
  return lp;
}

int cmd_run(const Settings& s) {
  const LoadedProblem lp = load(s);
  const json summary = run_into(lp, s.out, s.plot);
  std::cout << summary.dump(2) << "\n";
  return kOk;
}

json check_entry(const std::string& name, bool pass, json detail) {
  detail["check"] = name;
  detail["pass"] = pass;
  return detail;
}

// Lambda for the TV structure of the model (structure 0) in the requested mode.
PoincareEstimate lambda_for(const EnergyModel& model, PoincareMode mode, double q, const std::string& source,
                            std::uint64_t seed) {
  const EnergyModel part = model.structures().size() > 1 ? model.restricted(0) : model;
  if (source == "certified") {
    PoincareEstimate est;
    if (certified_lambda(part, mode, q, est)) return est;
    log::warn("no certified Poincare constant for this model; using the heuristic estimate");
  }
  return estimate_lambda(part, mode, q, seed);
}

int cmd_verify(const Settings& s) {
  const LoadedProblem lp = load(s);
  const EnergyModel model = compile(lp.functional);
  const RunOutput run = integrate(model, lp);
  const Trajectory& tr = run.trajectory;
  const double slack = 10.0 * (lp.h + lp.tol);
  json results = json::array();

  const json summary = summary_json(model, lp, run);
  for (const auto& [name, c] : summary["bound_checks"].items()) results.push_back(check_entry(name, c["pass"], c));

  // Contraction and comparison against a perturbed datum w0 >= u0.
  {
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> gauss;
    const double scale = std::max(1.0, lp.u0.cwiseAbs().maxCoeff());
    VertexFunction w0 = lp.u0;
    for (Eigen::Index i = 0; i < w0.size(); ++i) w0(i) += 0.1 * scale * std::abs(gauss(rng));
    Source src;
    if (lp.source) {
      const VertexFunction f = *lp.source;
      src = [f](double) { return f; };
    }
    const Trajectory a = implicit_euler(model, lp.u0, lp.T, lp.h, lp.tol, src);
    const Trajectory b = implicit_euler(model, w0, lp.T, lp.h, lp.tol, src);
    for (double q : {1.0, 2.0, std::numeric_limits<double>::infinity()}) {
      for (int dir = 0; dir < 2; ++dir) {
        const auto rep = dir == 0 ? check_contraction(b, a, q) : check_contraction(a, b, q);
        results.push_back(check_entry("contraction", rep.holds(slack),
                                      {{"q", std::isinf(q) ? json("inf") : json(q)},
                                       {"direction", dir == 0 ? "w-u" : "u-w"},
                                       {"max_excess", rep.max_excess},
                                       {"at_time", rep.at_time},
                                       {"slack", slack}}));
      }
    }
    double worst = 0.0;
    double at = 0.0;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
      const double d = (a.states[k] - b.states[k]).maxCoeff();
      if (d > worst) {
        worst = d;
        at = a.times[k];
      }
    }
    results.push_back(check_entry("comparison", worst <= slack, {{"max_violation", worst}, {"at_time", at}, {"slack", slack}}));
  }

  const bool poincare_requested = s.lambda || lp.checks.contains("poincare") || lp.checks.contains("lambda");
  if (poincare_requested) {
    const PoincareMode pmode = parse_poincare_mode(lp.checks.value("poincare", std::string("L2")));
    const double q = lp.checks.value("q", 1.0);
    double lambda = 0.0;
    std::string origin;
    if (s.lambda) {
      lambda = *s.lambda;
      origin = "command line";
    } else if (lp.checks.contains("lambda") && lp.checks["lambda"].is_number()) {
      lambda = lp.checks["lambda"].get<double>();
      origin = "problem file";
    } else {
      const std::string src = lp.checks.value("lambda", std::string("certified"));
      const PoincareEstimate est = lambda_for(model, pmode, q, src, s.seed);
      lambda = est.lambda;
      origin = est.method;
    }
    const EnergyModel part = model.structures().size() > 1 ? model.restricted(0) : model;
    const auto prep = verify_poincare(part, lambda, pmode, 10000, q, s.seed);
    results.push_back(check_entry("poincare", prep.passed,
                                  {{"lambda", lambda},
                                   {"lambda_source", origin},
                                   {"worst_ratio", prep.worst_ratio},
                                   {"samples", prep.samples}}));
    DecayMode dmode = pmode == PoincareMode::L1   ? DecayMode::OnePoincare
                      : pmode == PoincareMode::L2 ? DecayMode::TwoPoincare
                                                  : DecayMode::QTwoPoincare;
    if (lp.checks.contains("decay")) dmode = parse_decay_mode(lp.checks["decay"].get<std::string>());
    const double y0 = tr.diagnostics.front().dist_l2;
    const double decay_slack = slack * (1.0 + y0);
    const auto drep = decay_bound_check(tr, lambda, dmode, q);
    results.push_back(check_entry("decay_bound", drep.holds(decay_slack),
                                  {{"max_violation", drep.max_violation},
                                   {"at_time", drep.at_time},
                                   {"slack", decay_slack}}));
    if (std::isfinite(drep.predicted_extinction)) {
      const auto observed = extinction_time(tr, extinction_eps(lp));
      const bool ok = observed && *observed <= drep.predicted_extinction + lp.h;
      results.push_back(check_entry("extinction_bound", ok,
                                    {{"observed", optional_number(observed)},
                                     {"bound", drep.predicted_extinction},
                                     {"slack", observed ? json(drep.predicted_extinction - *observed) : json(nullptr)}}));
    }
  }

  bool all = true;
  for (const auto& r : results) all = all && r["pass"].get<bool>();
  const json report = {{"problem", lp.name}, {"integrator", lp.integrator}, {"passed", all}, {"checks", results}};
  std::cout << report.dump(2) << "\n";
  if (!s.out.empty()) {
    fs::create_directories(s.out);
    write_text(fs::path(s.out) / "verify.json", report.dump(2) + "\n");
  }
  return all ? kOk : kCheckFailed;
}

int cmd_plot(const Settings& s) {
  if (s.csv.empty()) throw CLI::RequiredError("--csv");
  std::ifstream in(s.csv);
  if (!in) throw std::runtime_error("cannot open '" + s.csv + "'");
  const CsvTrajectory traj = read_trajectory_csv(in);
  std::vector<double> events;
  if (!s.events.empty()) events = read_event_times(read_json_file(s.events));
  fs::path out = s.out;
  if (out.extension() != ".svg") {
    fs::create_directories(out);
    out /= "plot.svg";
  }
  PlotOptions po;
  po.title = fs::path(s.csv).parent_path().filename().string();
  write_text(out, render_svg(traj, events, po));
  return kOk;
}

// 64-bit FNV-1a.
std::string fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

struct Axis {
  std::string pointer;
  std::vector<json> values;
};

Axis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) throw std::runtime_error("sweep axis '" + spec + "' must look like key=v1,v2");
  Axis a;
  const std::string key = spec.substr(0, eq);
  a.pointer = key.front() == '/' ? key : "/" + key;
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) a.values.push_back(parse_value(item));
  if (a.values.empty()) throw std::runtime_error("sweep axis '" + key + "' has no values");
  return a;
}

int cmd_sweep(const Settings& s) {
  if (s.problem.empty()) throw CLI::RequiredError("--problem");
  const json base = read_json_file(s.problem);
  std::vector<Axis> axes;
  for (const auto& spec : s.sweep_axes) axes.push_back(parse_axis(spec));

  // Cartesian product in lexicographic order of the axes as given.
  std::vector<json> points;
  std::vector<std::size_t> idx(axes.size(), 0);
  while (true) {
    json doc = base;
    if (!s.integrator.empty()) doc["integrator"] = s.integrator;
    if (s.h) doc["h"] = *s.h;
    if (s.T) doc["T"] = *s.T;
    if (s.tol) doc["tol"] = *s.tol;
    for (std::size_t a = 0; a < axes.size(); ++a) doc[json::json_pointer(axes[a].pointer)] = axes[a].values[idx[a]];
    points.push_back(std::move(doc));
    std::size_t a = 0;
    while (a < axes.size() && ++idx[a] == axes[a].values.size()) idx[a++] = 0;
    if (a == axes.size()) break;
  }

  std::vector<json> results(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next++) < points.size();) {
      const std::string canonical = points[i].dump();
      const std::string key = fnv1a(canonical);
      const fs::path dir = fs::path(s.out) / key;
      json entry = {{"key", key}};
      try {
        LoadedProblem lp = parse_problem(points[i]);
        if (lp.name.empty()) lp.name = fs::path(s.problem).stem().string();
        Settings none;
        apply_overrides(none, lp);
        fs::create_directories(dir);
        write_text(dir / "config.json", points[i].dump(2) + "\n");
        entry["summary"] = run_into(lp, dir, s.plot);
        entry["status"] = "ok";
      } catch (const std::exception& e) {
        entry["status"] = "error";
        entry["error"] = e.what();
      }
      results[i] = std::move(entry);
    }
  };
  const int nw = std::max(1, std::min<int>(s.workers, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  json index = json::array();
  bool ok = true;
  for (std::size_t i = 0; i < points.size(); ++i) {
    json overrides = json::object();
    for (const auto& a : axes) overrides[a.pointer] = points[i][json::json_pointer(a.pointer)];
    index.push_back({{"key", results[i]["key"]}, {"overrides", overrides}, {"status", results[i]["status"]}});
    if (results[i]["status"] != "ok") {
      ok = false;
      index.back()["error"] = results[i]["error"];
    }
  }
  fs::create_directories(s.out);
  write_text(fs::path(s.out) / "index.json", index.dump(2) + "\n");
  std::cout << index.dump(2) << "\n";
  return ok ? kOk : kSolverError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient flows of inhomogeneous growth energies on random walk spaces"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(0, 1);
  app.fallthrough();
  Settings s;
  app.add_option("--problem", s.problem, "problem JSON file");
  app.add_option("--integrator", s.integrator, "implicit_euler | exact_modes");
  app.add_option("--h", s.h, "time step");
  app.add_option("--T", s.T, "horizon");
  app.add_option("--tol", s.tol, "solver tolerance");
  app.add_option("--out", s.out, "output directory (or .svg file for plot)");
  app.add_flag("--plot", s.plot, "also write plot.svg");
  app.add_option("--workers", s.workers, "concurrent sweep points")->check(CLI::PositiveNumber);
  app.add_option("--seed", s.seed, "seed for randomized checks");

  auto* run = app.add_subcommand("run", "integrate a problem and write CSV, events and summary");
  auto* verify = app.add_subcommand("verify", "run and check the dynamic properties");
  verify->add_option("--lambda", s.lambda, "Poincare constant to test");
  auto* plot = app.add_subcommand("plot", "render a trajectory CSV to SVG");
  plot->add_option("--csv", s.csv, "trajectory CSV");
  plot->add_option("--events", s.events, "events JSON");
  auto* sweep = app.add_subcommand("sweep", "run a grid of parameter overrides");
  sweep->add_option("--set", s.sweep_axes, "axis as key=v1,v2 (key is a field or JSON pointer)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*verify) return cmd_verify(s);
    if (*plot) return cmd_plot(s);
    if (*sweep) return cmd_sweep(s);
    (void)run;
    return cmd_run(s);
  } catch (const SchemaError& e) {
    std::cerr << "error: invalid problem at " << e.what() << "\n";
    return kInputError;
  } catch (const FlowError& e) {
    std::cerr << "error: solver failed at step " << e.step() << " (stationarity " << e.stationarity()
              << ", complementarity " << e.complementarity() << "): " << e.what() << "\n";
    return kSolverError;
  } catch (const ProxNonConvergence& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSolverError;
  } catch (const ModeError& e) {
    std::cerr << "error: exact integration failed: " << e.what() << "\n";
    return kSolverError;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
