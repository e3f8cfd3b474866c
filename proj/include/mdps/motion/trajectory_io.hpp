#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mdps/motion/state.hpp"

// Trajectory CSV exchange format. One header line, then one row per state:
//   time_index,t_z_mm,t_y_mm,t_x_mm,r_z_deg,r_y_deg,r_x_deg
// Values are written with %.17g, so a save/load round trip is exact.

namespace mdps {

inline constexpr const char* kTrajectoryCsvHeader =
    "time_index,t_z_mm,t_y_mm,t_x_mm,r_z_deg,r_y_deg,r_x_deg";

inline std::string trajectory_to_csv(const MotionTrajectory& v) {
  std::string out = kTrajectoryCsvHeader;
  out += '\n';
  char buf[64];
  for (std::size_t t = 0; t < v.size(); ++t) {
    out += std::to_string(t);
    for (int p = 0; p < 6; ++p) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v[t][p]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline void save_trajectory_csv(const MotionTrajectory& v,
                                const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  detail::require(f.good(), "save_trajectory_csv: cannot open " + path);
  const std::string csv = trajectory_to_csv(v);
  f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
  detail::require(f.good(), "save_trajectory_csv: write failed for " + path);
}

inline MotionTrajectory trajectory_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)),
                  "trajectory CSV: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  detail::require(line == kTrajectoryCsvHeader,
                  "trajectory CSV: unexpected header '" + line + "'");
  MotionTrajectory v;
  std::size_t expect = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    detail::require(static_cast<bool>(std::getline(row, cell, ',')),
                    "trajectory CSV: malformed row");
    detail::require(std::stoull(cell) == expect,
                    "trajectory CSV: non-contiguous time_index");
    MotionState s;
    for (int p = 0; p < 6; ++p) {
      detail::require(static_cast<bool>(std::getline(row, cell, ',')),
                      "trajectory CSV: row with fewer than 7 columns");
      s.param(p) = std::stod(cell);
    }
    detail::require(!std::getline(row, cell, ','),
                    "trajectory CSV: row with more than 7 columns");
    v.push_back(s);
    ++expect;
  }
  detail::require(!v.empty(), "trajectory CSV: no states");
  return v;
}

inline MotionTrajectory load_trajectory_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  detail::require(f.good(), "load_trajectory_csv: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return trajectory_from_csv(ss.str());
}

}  // namespace mdps
