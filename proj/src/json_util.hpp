#pragma once

// Internal helpers shared by the JSON-lines readers and writers.

#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "graspcheck/dataset.hpp"
#include "graspcheck/error.hpp"

namespace graspcheck::detail {

using Json = nlohmann::ordered_json;

inline Json box_to_json(const BoundingBox& b) { return Json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

inline BoundingBox box_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("bbox must be an array of 4 numbers");
  for (const auto& v : j) {
    if (!v.is_number()) throw std::invalid_argument("bbox must be an array of 4 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

// Calls `fn(line_number, json)` for every non-blank line of a JSON-lines file.
inline void for_each_jsonl(const std::filesystem::path& path,
                           const std::function<void(int, const Json&)>& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorKind::kIo, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    fn(lineno, j);
  }
}

}  // namespace graspcheck::detail
