#pragma once

// Minimal deterministic SVG line plots of trajectories.

#include "rwflow/io.hpp"

#include <string>
#include <vector>

namespace rwflow {

struct PlotOptions {
  int width = 800;
  int height = 480;
  std::string title;
  int max_series = 64;  // larger vertex counts are subsampled evenly
};

std::string render_svg(const CsvTrajectory& traj, const std::vector<double>& event_times,
                       const PlotOptions& options = {});

}  // namespace rwflow
