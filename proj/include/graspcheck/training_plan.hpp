#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace graspcheck {

enum class TrainableScope { kHeadOnly, kHeadPlusLastBackboneLayer };

std::string_view to_string(TrainableScope s);
TrainableScope scope_from_string(std::string_view s);

/// Dropout is stored as the stage's start and end values; how a trainer
/// interpolates between them is its own business.
struct TrainingStage {
  TrainableScope trainable_scope = TrainableScope::kHeadOnly;
  double dropout_start = 0.5;
  double dropout_end = 0.5;
  double learning_rate = 1e-3;
  int epochs = 10;
};

struct TrainingPlan {
  std::vector<TrainingStage> stages;
  int detector_epochs = 100;
};

/// Head first with heavy dropout, then the last backbone layer unfrozen at a
/// lower learning rate and dropout.
TrainingPlan default_training_plan();

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate_training_plan(const TrainingPlan& plan);

nlohmann::ordered_json training_plan_to_json(const TrainingPlan& plan);
/// Throws kConfig on unknown keys or wrong types. Does not run validation.
TrainingPlan training_plan_from_json(const nlohmann::ordered_json& j);

}  // namespace graspcheck
