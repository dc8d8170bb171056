#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "graspcheck/backends.hpp"
#include "graspcheck/dataset.hpp"

namespace graspcheck {

/// Geometric threshold schedule: start, start*decay, ... with the last query
/// clamped to `floor`.
struct ThresholdSchedule {
  double start = 0.5;
  double decay_factor = 0.5;
  double floor = 0.01;

  void validate() const;
  std::vector<double> thresholds() const;
};

struct ClusterConfig {
  double eps = 0.10;  // distance between normalized box centers
  int min_pts = 1;    // neighborhood size (self included) for a core point

  void validate() const;
};

struct PadConfig {
  double pad_x_frac = 0.05;
  double pad_y_frac = 0.25;

  void validate() const;
};

struct AdaptiveDetection {
  std::vector<Detection> detections;  // never empty
  double threshold = 0.0;             // first schedule step that produced candidates
  int queries = 0;
};

/// Walks the schedule until the backend returns at least one candidate.
/// Throws kGripperNotFound when the floor is reached without one.
AdaptiveDetection adaptive_detect(DetectorBackend& detector, const ImageInput& image,
                                  const ThresholdSchedule& schedule);

/// DBSCAN over box centers normalized by the image size (Euclidean, eps
/// inclusive). A border point joins the cluster of its nearest core point so
/// the partition does not depend on input order; noise points become
/// singleton clusters. Labels are contiguous from 0 in order of first
/// appearance.
std::vector<int> cluster_detections(std::span<const Detection> detections, ImageSize image_size,
                                    const ClusterConfig& config);

struct Selection {
  std::size_t index = 0;  // position in the input
  Detection detection;
  int cluster = 0;
  double cluster_score = 0.0;  // summed confidence of the winning cluster
};

/// Winner = cluster with the largest summed confidence (ties: the cluster with
/// the single most confident box, then the lowest label); returns that
/// cluster's most confident box (ties: lexicographically smallest corners).
Selection select_detection(std::span<const Detection> detections, ImageSize image_size,
                           const ClusterConfig& config);

/// Grows each side by pad_x_frac * width (horizontal) and pad_y_frac * height
/// (vertical), then clamps to the image.
BoundingBox pad_box(const BoundingBox& box, ImageSize image_size, const PadConfig& config);

}  // namespace graspcheck
