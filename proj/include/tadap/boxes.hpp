#pragma once

// Object-detector boxes, one JSON object per line:
//   {"frame": "000123", "class": "car", "conf": 0.91,
//    "u_min": 10, "v_min": 300, "u_max": 120, "v_max": 390}

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "tadap/error.hpp"

namespace tadap {

struct BoundingBox {
  std::string frame;
  std::string label;
  double confidence = 0;
  double u_min = 0, v_min = 0, u_max = 0, v_max = 0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline bool is_vehicle_class(const std::string& label) {
  static const char* const kVehicles[] = {"car", "truck", "bus", "motorcycle", "vehicle"};
  return std::any_of(std::begin(kVehicles), std::end(kVehicles), [&](const char* v) { return label == v; });
}

inline BoundingBox parse_box(const nlohmann::json& j) {
  try {
    BoundingBox b;
    const auto& frame = j.at("frame");
    b.frame = frame.is_string() ? frame.get<std::string>() : frame.dump();
    b.label = j.at("class").get<std::string>();
    b.confidence = j.at("conf").get<double>();
    b.u_min = j.at("u_min").get<double>();
    b.v_min = j.at("v_min").get<double>();
    b.u_max = j.at("u_max").get<double>();
    b.v_max = j.at("v_max").get<double>();
    require(b.confidence >= 0 && b.confidence <= 1, Errc::parse, "box confidence outside [0, 1]");
    require(b.u_min < b.u_max && b.v_min < b.v_max, Errc::parse, "box has non-positive extent");
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse, std::string("bad box record: ") + e.what());
  }
}

inline nlohmann::json to_json(const BoundingBox& b) {
  return {{"frame", b.frame}, {"class", b.label}, {"conf", b.confidence}, {"u_min", b.u_min},
          {"v_min", b.v_min}, {"u_max", b.u_max}, {"v_max", b.v_max}};
}

inline std::vector<BoundingBox> read_boxes(std::istream& in) {
  std::vector<BoundingBox> boxes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      boxes.push_back(parse_box(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(Errc::parse, "boxes line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(Errc::parse, "boxes line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return boxes;
}

inline std::vector<BoundingBox> read_boxes(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::io, "cannot open " + path);
  return read_boxes(in);
}

inline void write_boxes(std::ostream& out, const std::vector<BoundingBox>& boxes) {
  for (const auto& b : boxes) out << to_json(b).dump() << '\n';
}

inline std::map<std::string, std::vector<BoundingBox>> group_by_frame(const std::vector<BoundingBox>& boxes) {
  std::map<std::string, std::vector<BoundingBox>> out;
  for (const auto& b : boxes) out[b.frame].push_back(b);
  return out;
}

}  // namespace tadap
