#include "graspcheck/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "graspcheck/error.hpp"
#include "json_util.hpp"

namespace graspcheck {

using detail::Json;

void DecisionConfig::validate() const {
  if (!(threshold_no_object > 0.0 && threshold_no_object < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "threshold_no_object must be in (0, 1)");
  }
}

GraspLabel decide(double p_no_object, const DecisionConfig& config) {
  config.validate();
  if (!(p_no_object >= 0.0 && p_no_object <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "p_no_object outside [0, 1]");
  }
  return p_no_object >= config.threshold_no_object ? GraspLabel::kNoObject : GraspLabel::kObject;
}

Image crop_with_margin(const Image& image, const BoundingBox& box) {
  const int x0 = static_cast<int>(std::floor(std::max(0.0, box.x_min)));
  const int y0 = static_cast<int>(std::floor(std::max(0.0, box.y_min)));
  const int x1 = static_cast<int>(std::ceil(std::min<double>(image.width, box.x_max)));
  const int y1 = static_cast<int>(std::ceil(std::min<double>(image.height, box.y_max)));
  if (!std::isfinite(box.x_min) || !std::isfinite(box.y_min) || !std::isfinite(box.x_max) ||
      !std::isfinite(box.y_max) || x1 <= x0 || y1 <= y0) {
    throw Error(ErrorKind::kEmptyCrop, "crop box does not overlap the image");
  }
  Image out(x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y) {
    std::memcpy(out.pixel(0, y - y0), image.pixel(x0, y), std::size_t(out.width) * 3);
  }
  return out;
}

void PipelineConfig::validate() const {
  schedule.validate();
  cluster.validate();
  pad.validate();
  decision.validate();
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

GraspVerdict verify_grasp(const ImageInput& image, DetectorBackend& detector, ClassifierBackend& classifier,
                          const PipelineConfig& config) {
  config.validate();
  const ImageSize size{image.image.width, image.image.height};
  GraspVerdict v;
  v.threshold_no_object = config.decision.threshold_no_object;

  auto t = Clock::now();
  const AdaptiveDetection found = adaptive_detect(detector, image, config.schedule);
  v.timings_ms["detect"] = ms_since(t);
  v.detection_threshold = found.threshold;

  t = Clock::now();
  const Selection sel = select_detection(found.detections, size, config.cluster);
  BoundingBox selected = sel.detection.box;
  selected.x_max = std::min<double>(selected.x_max, size.width);
  selected.y_max = std::min<double>(selected.y_max, size.height);
  v.selected_box = selected;
  v.padded_box = pad_box(selected, size, config.pad);
  v.timings_ms["refine"] = ms_since(t);

  t = Clock::now();
  const Image crop = crop_with_margin(image.image, v.padded_box);
  v.timings_ms["crop"] = ms_since(t);

  t = Clock::now();
  v.p_no_object = classifier.p_no_object({image.id, crop});
  v.timings_ms["classify"] = ms_since(t);

  v.label = decide(v.p_no_object, config.decision);
  return v;
}

std::vector<VerdictRow> run_inference(const Dataset& dataset, DetectorBackend& detector,
                                      ClassifierBackend& classifier, const PipelineConfig& config) {
  config.validate();
  std::vector<VerdictRow> rows;
  rows.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) {
    const Image img = read_png(dataset.root / ex.image_ref);
    if (img.width != dataset.image_size.width || img.height != dataset.image_size.height) {
      throw Error(ErrorKind::kInvalidArgument, ex.image_ref + ": image size differs from the manifest header");
    }
    VerdictRow row{ex.image_ref, std::nullopt};
    try {
      row.verdict = verify_grasp({ex.image_ref, img}, detector, classifier, config);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kGripperNotFound) throw;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string serialize_verdicts(const std::vector<VerdictRow>& rows) {
  std::string out;
  for (const auto& r : rows) {
    Json j;
    j["image"] = r.image;
    if (!r.verdict) {
      j["status"] = "gripper_not_found";
    } else {
      const auto& v = *r.verdict;
      j["status"] = "ok";
      j["label"] = static_cast<int>(v.label);
      j["p_no_object"] = v.p_no_object;
      j["threshold_no_object"] = v.threshold_no_object;
      j["detection_threshold"] = v.detection_threshold;
      j["selected_box"] = detail::box_to_json(v.selected_box);
      j["padded_box"] = detail::box_to_json(v.padded_box);
      Json timings = Json::object();
      for (const char* key : kTimingKeys) timings[key] = v.timings_ms.at(key);
      j["timings_ms"] = std::move(timings);
    }
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_verdicts(const std::vector<VerdictRow>& rows, const std::filesystem::path& path) {
  detail::write_file(path, serialize_verdicts(rows));
}

std::vector<VerdictRow> load_verdicts(const std::filesystem::path& path) {
  std::vector<VerdictRow> rows;
  detail::for_each_jsonl(path, [&](int lineno, const Json& j) {
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      VerdictRow r{j.at("image").get<std::string>(), std::nullopt};
      const auto status = j.at("status").get<std::string>();
      if (status == "ok") {
        GraspVerdict v;
        v.label = label_from_int(j.at("label").get<int>());
        v.p_no_object = j.at("p_no_object").get<double>();
        v.threshold_no_object = j.at("threshold_no_object").get<double>();
        v.detection_threshold = j.at("detection_threshold").get<double>();
        v.selected_box = detail::box_from_json(j.at("selected_box"));
        v.padded_box = detail::box_from_json(j.at("padded_box"));
        for (const auto& [k, ms] : j.at("timings_ms").items()) v.timings_ms[k] = ms.get<double>();
        r.verdict = std::move(v);
      } else if (status != "gripper_not_found") {
        throw std::invalid_argument("unknown status '" + status + "'");
      }
      rows.push_back(std::move(r));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kIo, where + ": " + e.what());
    }
  });
  return rows;
}

}  // namespace graspcheck
