#pragma once

// GNSS pose log, one record per line:
//   timestamp_s, latitude_deg, longitude_deg, altitude_m, heading_deg
// Blank lines and lines starting with '#' are ignored.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "tadap/error.hpp"
#include "tadap/geometry.hpp"

namespace tadap {

inline std::vector<GeodeticPose> read_gnss_log(std::istream& in) {
  std::vector<GeodeticPose> log;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    GeodeticPose p;
    std::string extra;
    if (!(fields >> p.timestamp >> p.latitude >> p.longitude >> p.altitude >> p.heading) || (fields >> extra))
      throw Error(Errc::parse, "gnss line " + std::to_string(lineno) + ": expected 5 numeric fields");
    try {
      p.validate();
    } catch (const Error& e) {
      throw Error(Errc::parse, "gnss line " + std::to_string(lineno) + ": " + e.what());
    }
    p.heading = normalize_heading_deg(p.heading);
    if (!log.empty())
      require(p.timestamp > log.back().timestamp, Errc::parse,
              "gnss line " + std::to_string(lineno) + ": timestamps must be strictly increasing");
    log.push_back(p);
  }
  return log;
}

inline std::vector<GeodeticPose> read_gnss_log(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path);
  return read_gnss_log(in);
}

inline void write_gnss_log(std::ostream& out, const std::vector<GeodeticPose>& log) {
  char buf[160];
  for (const auto& p : log) {
    std::snprintf(buf, sizeof buf, "%.6f,%.10f,%.10f,%.4f,%.6f\n", p.timestamp, p.latitude, p.longitude,
                  p.altitude, p.heading);
    out << buf;
  }
}

inline std::vector<EnuPose> to_enu(const std::vector<GeodeticPose>& log, const GeodeticPose& origin) {
  std::vector<EnuPose> out;
  out.reserve(log.size());
  for (const auto& p : log) out.push_back(geodetic_to_enu(p, origin));
  return out;
}

/// Index of the pose closest in time to `t`, if it lies within `tolerance`.
inline std::optional<std::size_t> closest_pose(const std::vector<EnuPose>& log, double t, double tolerance = 0.1) {
  if (log.empty()) return std::nullopt;
  const auto it = std::lower_bound(log.begin(), log.end(), t,
                                   [](const EnuPose& p, double value) { return p.timestamp < value; });
  std::size_t best = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - log.begin(),
                                                                       static_cast<std::ptrdiff_t>(log.size()) - 1));
  if (best > 0 && std::abs(log[best - 1].timestamp - t) <= std::abs(log[best].timestamp - t)) --best;
  if (std::abs(log[best].timestamp - t) > tolerance) return std::nullopt;
  return best;
}

}  // namespace tadap
