#include "graspcheck/backends.hpp"

#include <cmath>

#include "graspcheck/error.hpp"
#include "json_util.hpp"

namespace graspcheck {

using detail::Json;

void validate_detection(const Detection& d) {
  validate_box(d.box, "detection");
  if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "detection confidence outside [0, 1]");
  }
}

double softmax_no_object(double logit_object, double logit_no_object) {
  const double m = std::max(logit_object, logit_no_object);
  const double e_obj = std::exp(logit_object - m);
  const double e_none = std::exp(logit_no_object - m);
  return e_none / (e_obj + e_none);
}

FixtureDetector::FixtureDetector(std::map<std::string, std::vector<Detection>, std::less<>> table)
    : table_(std::move(table)) {
  for (const auto& [id, dets] : table_) {
    for (const auto& d : dets) validate_detection(d);
  }
}

std::unique_ptr<FixtureDetector> FixtureDetector::from_file(const std::filesystem::path& path) {
  const Json j = Json::parse(detail::read_file(path));
  std::map<std::string, std::vector<Detection>, std::less<>> table;
  for (const auto& [id, list] : j.items()) {
    auto& out = table[id];
    for (const auto& item : list) {
      out.push_back({detail::box_from_json(item.at("bbox")), item.at("confidence").get<double>()});
    }
  }
  return std::make_unique<FixtureDetector>(std::move(table));
}

std::vector<Detection> FixtureDetector::detect(const ImageInput& image, double threshold) {
  ++queries_;
  std::vector<Detection> out;
  if (auto it = table_.find(image.id); it != table_.end()) {
    for (const auto& d : it->second) {
      if (d.confidence >= threshold) out.push_back(d);
    }
  }
  return out;
}

FixtureClassifier::FixtureClassifier(std::map<std::string, double, std::less<>> table) : table_(std::move(table)) {
  for (const auto& [id, p] : table_) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::kInvalidArgument, "probability outside [0, 1] for " + id);
  }
}

std::unique_ptr<FixtureClassifier> FixtureClassifier::from_file(const std::filesystem::path& path) {
  const Json j = Json::parse(detail::read_file(path));
  std::map<std::string, double, std::less<>> table;
  for (const auto& [id, p] : j.items()) table[id] = p.get<double>();
  return std::make_unique<FixtureClassifier>(std::move(table));
}

double FixtureClassifier::p_no_object(const ImageInput& crop) {
  ++calls_;
  auto it = table_.find(crop.id);
  if (it == table_.end()) {
    throw Error(ErrorKind::kInvalidArgument, "classifier fixture has no entry for " + std::string(crop.id));
  }
  return it->second;
}

namespace {

std::filesystem::path fixture_path(std::string_view spec) {
  constexpr std::string_view prefix = "fixture:";
  if (!spec.starts_with(prefix)) {
    throw Error(ErrorKind::kInvalidArgument,
                "unsupported backend '" + std::string(spec) + "' (expected fixture:<path>)");
  }
  std::filesystem::path p(spec.substr(prefix.size()));
  if (!std::filesystem::is_regular_file(p)) {
    throw Error(ErrorKind::kInvalidArgument, "backend fixture not found: " + p.string());
  }
  return p;
}

}  // namespace

std::unique_ptr<DetectorBackend> make_detector(std::string_view spec) {
  const auto path = fixture_path(spec);
  try {
    return FixtureDetector::from_file(path);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, "cannot load detector fixture " + path.string() + ": " + e.what());
  }
}

std::unique_ptr<ClassifierBackend> make_classifier(std::string_view spec) {
  const auto path = fixture_path(spec);
  try {
    return FixtureClassifier::from_file(path);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::kInvalidArgument, "cannot load classifier fixture " + path.string() + ": " + e.what());
  }
}

}  // namespace graspcheck
