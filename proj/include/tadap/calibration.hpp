#pragma once

// Camera-to-ground calibration file, plain text:
//
//   # comment
//   homography = h00 h01 h02 h10 h11 h12 h20 h21 h22
//   vehicle_width = 1.8
//   pair = u v X Y        (repeatable; the pairs the homography came from)
//
// If no homography line is present it is estimated from the pairs.

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

struct Calibration {
  Homography homography;
  double vehicle_width = 1.8;
  std::vector<CalibrationPair> pairs;
};

inline Calibration read_calibration(std::istream& in) {
  Calibration cal;
  std::optional<std::vector<double>> h;
  bool have_width = false;
  std::string line;
  std::size_t lineno = 0;
  const auto fail = [&](const std::string& what) {
    throw Error(Errc::parse, "calibration line " + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) fail("expected key = value");
    std::istringstream key_stream(line.substr(0, eq));
    std::string key;
    key_stream >> key;
    std::istringstream values(line.substr(eq + 1));
    std::vector<double> nums;
    for (double v; values >> v;) nums.push_back(v);
    if (!values.eof()) fail("non-numeric value for " + key);
    if (key == "homography") {
      if (nums.size() != 9) fail("homography needs 9 values");
      h = nums;
    } else if (key == "vehicle_width") {
      if (nums.size() != 1 || !(nums[0] > 0)) fail("vehicle_width needs one positive value");
      cal.vehicle_width = nums[0];
      have_width = true;
    } else if (key == "pair") {
      if (nums.size() != 4) fail("pair needs u v X Y");
      cal.pairs.push_back({{nums[0], nums[1]}, {nums[2], nums[3]}});
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  require(have_width, Errc::parse, "calibration lacks vehicle_width");
  if (h) {
    cal.homography = Homography::from_row_major(*h);
  } else {
    require(!cal.pairs.empty(), Errc::parse, "calibration has neither a homography nor point pairs");
    cal.homography = estimate_homography(cal.pairs);
  }
  return cal;
}

inline Calibration read_calibration(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open calibration file " + path);
  return read_calibration(in);
}

inline void write_calibration(std::ostream& out, const Calibration& cal) {
  char buf[64];
  out << "homography =";
  for (double v : cal.homography.row_major()) {
    std::snprintf(buf, sizeof buf, " %.17g", v);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%.17g", cal.vehicle_width);
  out << "\nvehicle_width = " << buf << '\n';
  for (const auto& p : cal.pairs) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g ", p.pixel.u, p.pixel.v);
    out << "pair = " << buf;
    std::snprintf(buf, sizeof buf, "%.17g %.17g", p.ground.x, p.ground.y);
    out << buf << '\n';
  }
}

}  // namespace tadap
