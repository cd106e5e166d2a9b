#pragma once

// Problem files, trajectory CSV and events JSON.

#include "rwflow/exact.hpp"
#include "rwflow/flow.hpp"
#include "rwflow/kernel_space.hpp"

#include "json.hpp"

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rwflow {

/// Invalid input document; pointer() is the JSON pointer of the offending value.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& pointer, const std::string& msg)
      : std::runtime_error((pointer.empty() ? std::string("/") : pointer) + ": " + msg), pointer_(pointer) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

struct LoadedProblem {
  explicit LoadedProblem(Functional f) : functional(std::move(f)) {}

  std::string name;
  Functional functional;
  VertexFunction u0;
  std::optional<VertexFunction> source;  // constant in time
  double T = 1.0;
  double h = 1e-3;
  double tol = 1e-9;
  std::string integrator = "implicit_euler";
  bool finite_graph = true;
  nlohmann::json checks;  // optional verification settings
  nlohmann::json document;
};

RandomWalkSpace parse_space(const nlohmann::json& j, const std::string& pointer,
                            std::optional<GridDomain>* grid = nullptr);
LoadedProblem parse_problem(const nlohmann::json& doc);
LoadedProblem load_problem(const std::string& path);
nlohmann::json read_json_file(const std::string& path);

/// %.17g formatting.
std::string format_double(double x);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

struct CsvTrajectory {
  std::vector<std::string> header;
  std::vector<double> times;
  std::vector<std::vector<double>> values;  // per row, vertex values only
  int vertices = 0;
};
CsvTrajectory read_trajectory_csv(std::istream& is);

nlohmann::json events_json(const std::vector<ExactEvent>& events);
std::vector<double> read_event_times(const nlohmann::json& j);

}  // namespace rwflow
