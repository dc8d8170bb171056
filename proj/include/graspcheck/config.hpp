#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "graspcheck/eval_metrics.hpp"
#include "graspcheck/pipeline.hpp"
#include "graspcheck/scene_synth.hpp"
#include "graspcheck/training_plan.hpp"
#include "graspcheck/vqa.hpp"

namespace graspcheck {

struct EvalSettings {
  std::optional<std::filesystem::path> review;  // manual detection review, JSON-lines
  Population classification_population = Population::kPredicted;
  Population pr_population = Population::kDetectedAndPredicted;
  double consistency_tolerance = 0.002;
};

struct VqaSettings {
  VqaConfig prompt;
  std::optional<std::string> client;  // replay:<path> or live:<model>
};

struct RunConfig {
  GenConfig gen;
  PipelineConfig pipeline;
  // Set only when the config names decide.threshold_no_object; otherwise the
  // threshold follows the dataset split (real_eval uses the real-domain value).
  std::optional<double> threshold_no_object;
  TrainingPlan training_plan = default_training_plan();
  EvalSettings eval;
  VqaSettings vqa;

  /// Re-runs every module-level check. Throws kConfig.
  void validate() const;

  /// Decision threshold for a dataset of the given split.
  DecisionConfig decision_for(Split split) const;
};

/// Reads `.yaml`/`.yml` or `.json`. Unknown keys and failed invariants raise
/// kConfig; missing keys keep their defaults.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig run_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

/// One line per accepted key with its default, for --help.
std::string config_key_help();

}  // namespace graspcheck
