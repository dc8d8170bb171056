#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "graspcheck/dataset.hpp"
#include "graspcheck/pipeline.hpp"

namespace graspcheck {

struct EvalRecord {
  std::string example_id;
  Category category = Category::kNoObject;
  std::optional<std::string> object_id;
  bool detection_correct = false;
  std::optional<GraspLabel> predicted_label;  // empty when the pipeline aborted
  GraspLabel true_label = GraspLabel::kNoObject;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

void validate_record(const EvalRecord& r);

std::vector<EvalRecord> load_records(const std::filesystem::path& path);
std::string serialize_records(const std::vector<EvalRecord>& records);
void save_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path);

/// Which records a metric is computed over. Both require a predicted label.
enum class Population {
  kPredicted,             // every record with a prediction
  kDetectedAndPredicted,  // additionally requires detection_correct
};

std::string_view to_string(Population p);
Population population_from_string(std::string_view s);

// Table I.

struct DetectionRow {
  std::size_t num_images = 0;
  std::size_t num_detected = 0;
  double pct_detected = 0.0;
  std::optional<double> pct_objects_correct;  // not defined for NO_OBJECT
  std::size_t num_objects = 0;
  std::size_t num_objects_correct = 0;
};

using DetectionTable = std::map<Category, DetectionRow>;

/// An object counts as correct only when every one of its records was
/// detected correctly.
DetectionTable detection_table(const std::vector<EvalRecord>& records);

struct SyntheticTruth {
  std::array<std::array<double, 2>, 2> fingertips_px;
  double mask_fraction = 0.0;  // share of the predicted box covered by gripper or object
};

/// Computable stand-in for the manual review: both fingertips inside the box
/// and mask_fraction >= 0.5. Throws kMissingGroundTruth without truth.
bool detection_correct_synthetic(const BoundingBox& predicted, const std::optional<SyntheticTruth>& truth);

// Table II.

struct AccuracyCell {
  std::size_t correct = 0;
  std::size_t total = 0;
  std::optional<double> pct;  // empty when total == 0
};

using ClassificationTable = std::map<Category, AccuracyCell>;

ClassificationTable classification_table(const std::vector<EvalRecord>& records,
                                         Population population = Population::kPredicted);

// Table III. Positive class is NO_OBJECT; an empty optional marks a zero
// denominator.

struct PRScore {
  std::optional<double> precision;
  std::optional<double> recall;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

PRScore precision_recall(const std::vector<EvalRecord>& records,
                         Population population = Population::kDetectedAndPredicted);

using CategoryCounts = std::map<Category, std::size_t>;

inline const CategoryCounts kRealEvalCounts = {
    {Category::kNoObject, 158}, {Category::kRigid, 150}, {Category::kDeformable, 210}};

/// Rebuilds precision/recall from per-category accuracies (percent) and
/// category sizes. Accuracies are rounded to one decimal first, as printed.
PRScore derive_pr_from_accuracies(const CategoryCounts& counts, const std::map<Category, double>& accuracy_pct);

struct ConsistencyReport {
  PRScore measured;
  PRScore derived;
  double tolerance = 0.002;
  bool consistent = false;
  std::string summary;
};

ConsistencyReport check_consistency(const PRScore& measured, const PRScore& derived, double tolerance = 0.002);

struct LatencyStats {
  double mean_ms = 0.0;
  double std_ms = 0.0;  // population standard deviation
  std::size_t count = 0;
};

LatencyStats latency_stats(const std::vector<double>& durations_ms);

// Formatting. Values are rounded half-up here and nowhere else.

double round_half_up(double value, int decimals);
std::string format_fixed(double value, int decimals);

nlohmann::ordered_json detection_table_json(const DetectionTable& table);
nlohmann::ordered_json classification_table_json(const ClassificationTable& table);
nlohmann::ordered_json pr_json(const PRScore& score);
nlohmann::ordered_json consistency_json(const ConsistencyReport& report);

std::string detection_table_text(const DetectionTable& table);
std::string classification_table_text(const std::vector<std::pair<std::string, ClassificationTable>>& rows);
std::string pr_table_text(const std::vector<std::pair<std::string, PRScore>>& rows);

/// Joins pipeline output with the manifest and a manual-review file
/// (JSON-lines of {example_id, detection_correct}). Examples whose gripper was
/// not found are recorded as detection failures without a prediction. Throws
/// kMissingGroundTruth when a detected example has no review entry and
/// kInvalidArgument when verdicts and manifest do not join.
std::vector<EvalRecord> build_records(const Dataset& dataset, const std::vector<VerdictRow>& verdicts,
                                      const std::filesystem::path& review_path);

}  // namespace graspcheck
