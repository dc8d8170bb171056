#include "graspcheck/detect_refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "graspcheck/error.hpp"

namespace graspcheck {

void ThresholdSchedule::validate() const {
  if (!(floor > 0.0 && floor < start && start <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "threshold schedule needs 0 < floor < start <= 1");
  }
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "decay_factor must be in (0, 1)");
  }
}

std::vector<double> ThresholdSchedule::thresholds() const {
  validate();
  std::vector<double> out;
  for (int k = 0;; ++k) {
    const double t = start * std::pow(decay_factor, k);
    if (t <= floor) {
      out.push_back(floor);
      return out;
    }
    out.push_back(t);
  }
}

void ClusterConfig::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw Error(ErrorKind::kInvalidArgument, "eps must be positive");
  if (min_pts < 1) throw Error(ErrorKind::kInvalidArgument, "min_pts must be >= 1");
}

void PadConfig::validate() const {
  if (!(pad_x_frac >= 0.0) || !(pad_y_frac >= 0.0) || !std::isfinite(pad_x_frac) || !std::isfinite(pad_y_frac)) {
    throw Error(ErrorKind::kInvalidArgument, "pad fractions must be finite and >= 0");
  }
}

AdaptiveDetection adaptive_detect(DetectorBackend& detector, const ImageInput& image,
                                  const ThresholdSchedule& schedule) {
  AdaptiveDetection result;
  for (double t : schedule.thresholds()) {
    ++result.queries;
    std::vector<Detection> found = detector.detect(image, t);
    std::erase_if(found, [t](const Detection& d) { return d.confidence < t; });
    if (found.empty()) continue;
    for (const auto& d : found) validate_detection(d);
    result.detections = std::move(found);
    result.threshold = t;
    return result;
  }
  throw Error(ErrorKind::kGripperNotFound, "no detections for '" + std::string(image.id) + "' down to threshold " +
                                               std::to_string(schedule.floor));
}

namespace {

struct Point {
  double x;
  double y;
};

std::vector<Point> normalized_centers(std::span<const Detection> dets, ImageSize size) {
  if (size.width <= 0 || size.height <= 0) throw Error(ErrorKind::kInvalidArgument, "image size must be positive");
  std::vector<Point> pts;
  pts.reserve(dets.size());
  for (const auto& d : dets) pts.push_back({d.box.center_x() / size.width, d.box.center_y() / size.height});
  return pts;
}

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::vector<int> cluster_detections(std::span<const Detection> detections, ImageSize image_size,
                                    const ClusterConfig& config) {
  config.validate();
  const auto pts = normalized_centers(detections, image_size);
  const int n = static_cast<int>(pts.size());
  const double eps2 = config.eps * config.eps;
  auto dist2 = [&](int i, int j) {
    const double dx = pts[i].x - pts[j].x, dy = pts[i].y - pts[j].y;
    return dx * dx + dy * dy;
  };

  std::vector<std::vector<int>> neighbors(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (dist2(i, j) <= eps2) neighbors[i].push_back(j);
    }
  }
  std::vector<bool> core(n);
  for (int i = 0; i < n; ++i) core[i] = static_cast<int>(neighbors[i].size()) >= config.min_pts;

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i) {
    if (!core[i]) continue;
    for (int j : neighbors[i]) {
      if (core[j]) parent[find_root(parent, i)] = find_root(parent, j);
    }
  }

  std::vector<int> group(n);
  for (int i = 0; i < n; ++i) {
    if (core[i]) {
      group[i] = find_root(parent, i);
      continue;
    }
    int best = -1;
    for (int j : neighbors[i]) {
      if (!core[j]) continue;
      if (best < 0 || std::make_tuple(dist2(i, j), pts[j].x, pts[j].y) <
                          std::make_tuple(dist2(i, best), pts[best].x, pts[best].y)) {
        best = j;
      }
    }
    group[i] = best >= 0 ? find_root(parent, best) : i;  // noise: own singleton
  }

  std::vector<int> label_of_group(n, -1);
  std::vector<int> labels(n);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    int& l = label_of_group[group[i]];
    if (l < 0) l = next++;
    labels[i] = l;
  }
  return labels;
}

Selection select_detection(std::span<const Detection> detections, ImageSize image_size, const ClusterConfig& config) {
  if (detections.empty()) throw Error(ErrorKind::kInvalidArgument, "select_detection needs at least one detection");
  const std::vector<int> labels = cluster_detections(detections, image_size, config);
  const int clusters = *std::max_element(labels.begin(), labels.end()) + 1;

  std::vector<std::vector<double>> confs(clusters);
  std::vector<int> best_in(clusters, -1);
  auto box_key = [](const BoundingBox& b) { return std::make_tuple(b.x_min, b.y_min, b.x_max, b.y_max); };
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const int c = labels[i];
    confs[c].push_back(detections[i].confidence);
    const int b = best_in[c];
    if (b < 0 || detections[i].confidence > detections[b].confidence ||
        (detections[i].confidence == detections[b].confidence &&
         box_key(detections[i].box) < box_key(detections[b].box))) {
      best_in[c] = static_cast<int>(i);
    }
  }
  std::vector<double> score(clusters, 0.0);
  for (int c = 0; c < clusters; ++c) {
    std::sort(confs[c].begin(), confs[c].end());  // order-independent summation
    for (double v : confs[c]) score[c] += v;
  }
  int winner = 0;
  for (int c = 1; c < clusters; ++c) {
    const double top_c = detections[best_in[c]].confidence;
    const double top_w = detections[best_in[winner]].confidence;
    if (score[c] > score[winner] || (score[c] == score[winner] && top_c > top_w)) winner = c;
  }
  const auto idx = static_cast<std::size_t>(best_in[winner]);
  return {idx, detections[idx], winner, score[winner]};
}

BoundingBox pad_box(const BoundingBox& box, ImageSize image_size, const PadConfig& config) {
  config.validate();
  validate_box(box, "pad_box input");
  const double w = image_size.width, h = image_size.height;
  if (box.x_max > w || box.y_max > h) throw Error(ErrorKind::kInvalidArgument, "pad_box input exceeds the image");
  const double dx = config.pad_x_frac * box.width();
  const double dy = config.pad_y_frac * box.height();
  return {std::max(0.0, box.x_min - dx), std::max(0.0, box.y_min - dy), std::min(w, box.x_max + dx),
          std::min(h, box.y_max + dy)};
}

}  // namespace graspcheck
