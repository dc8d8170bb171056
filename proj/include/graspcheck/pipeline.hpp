#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graspcheck/backends.hpp"
#include "graspcheck/dataset.hpp"
#include "graspcheck/detect_refine.hpp"
#include "graspcheck/image.hpp"

namespace graspcheck {

struct DecisionConfig {
  static constexpr double kNominalThreshold = 0.5;
  static constexpr double kRealDomainThreshold = 0.15;

  double threshold_no_object = kNominalThreshold;

  void validate() const;
};

/// NO_OBJECT iff p >= threshold.
GraspLabel decide(double p_no_object, const DecisionConfig& config);

/// Pixels under `box` after clamping to the image; fractional edges are
/// widened to whole pixels. Throws kEmptyCrop when nothing is left.
Image crop_with_margin(const Image& image, const BoundingBox& box);

struct PipelineConfig {
  ThresholdSchedule schedule;
  ClusterConfig cluster;
  PadConfig pad;
  DecisionConfig decision;

  void validate() const;
};

inline constexpr const char* kTimingKeys[] = {"detect", "refine", "crop", "classify"};

struct GraspVerdict {
  GraspLabel label = GraspLabel::kObject;
  double p_no_object = 0.0;
  double threshold_no_object = 0.0;
  BoundingBox selected_box;
  BoundingBox padded_box;
  double detection_threshold = 0.0;
  std::map<std::string, double> timings_ms;
};

/// detect -> refine -> crop -> classify -> decide. kGripperNotFound from the
/// detection stage propagates and the classifier is not called.
GraspVerdict verify_grasp(const ImageInput& image, DetectorBackend& detector, ClassifierBackend& classifier,
                          const PipelineConfig& config);

/// One line of verdicts.jsonl. `verdict` is empty when the gripper was not
/// found.
struct VerdictRow {
  std::string image;
  std::optional<GraspVerdict> verdict;
};

/// Runs verify_grasp over every example of a dataset, sequentially.
std::vector<VerdictRow> run_inference(const Dataset& dataset, DetectorBackend& detector,
                                      ClassifierBackend& classifier, const PipelineConfig& config);

std::string serialize_verdicts(const std::vector<VerdictRow>& rows);
void save_verdicts(const std::vector<VerdictRow>& rows, const std::filesystem::path& path);
std::vector<VerdictRow> load_verdicts(const std::filesystem::path& path);

}  // namespace graspcheck
