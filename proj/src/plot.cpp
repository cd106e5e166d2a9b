#include "rwflow/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace rwflow {

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

std::string colour(int i) {
  static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  return palette[i % 10];
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const CsvTrajectory& traj, const std::vector<double>& event_times,
                       const PlotOptions& options) {
  const double left = 60, right = 20, top = 30, bottom = 40;
  const double pw = options.width - left - right;
  const double ph = options.height - top - bottom;
  double t0 = 0.0, t1 = 1.0, lo = 0.0, hi = 1.0;
  if (!traj.times.empty()) {
    t0 = traj.times.front();
    t1 = traj.times.back();
    lo = hi = traj.values.front().empty() ? 0.0 : traj.values.front().front();
    for (const auto& row : traj.values) {
      for (double v : row) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(t1 > t0)) t1 = t0 + 1.0;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const auto sx = [&](double t) { return left + (t - t0) / (t1 - t0) * pw; };
  const auto sy = [&](double v) { return top + (hi - v) / (hi - lo) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
     << options.height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << options.width << "\" height=\"" << options.height
     << "\" fill=\"white\"/>\n";
  if (!options.title.empty()) {
    os << "<text x=\"" << fmt(left) << "\" y=\"18\">" << escape(options.title) << "</text>\n";
  }
  os << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\""
     << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double t = t0 + (t1 - t0) * k / 4.0;
    const double v = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << fmt(sx(t)) << "\" y=\"" << fmt(top + ph + 16) << "\" text-anchor=\"middle\">"
       << fmt(t) << "</text>\n";
    os << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(sy(v) + 4) << "\" text-anchor=\"end\">" << fmt(v)
       << "</text>\n";
  }
  for (double e : event_times) {
    if (e < t0 || e > t1) continue;
    os << "<line x1=\"" << fmt(sx(e)) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(sx(e)) << "\" y2=\""
       << fmt(top + ph) << "\" stroke=\"#999\" stroke-dasharray=\"4,3\"/>\n";
  }
  const int n = traj.vertices;
  const int stride = std::max(1, (n + options.max_series - 1) / std::max(1, options.max_series));
  for (int i = 0, series = 0; i < n; i += stride, ++series) {
    os << "<polyline fill=\"none\" stroke=\"" << colour(series) << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
      if (k) os << ' ';
      os << fmt(sx(traj.times[k])) << ',' << fmt(sy(traj.values[k][i]));
    }
    os << "\"><title>u" << i << "</title></polyline>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace rwflow
