#include "graspcheck/training_plan.hpp"

#include <cmath>
#include <set>

#include "graspcheck/error.hpp"

namespace graspcheck {

using Json = nlohmann::ordered_json;

std::string_view to_string(TrainableScope s) {
  return s == TrainableScope::kHeadOnly ? "head_only" : "head_plus_last_backbone_layer";
}

TrainableScope scope_from_string(std::string_view s) {
  if (s == "head_only") return TrainableScope::kHeadOnly;
  if (s == "head_plus_last_backbone_layer") return TrainableScope::kHeadPlusLastBackboneLayer;
  throw Error(ErrorKind::kConfig, "unknown trainable_scope '" + std::string(s) + "'");
}

TrainingPlan default_training_plan() {
  return {.stages = {{.trainable_scope = TrainableScope::kHeadOnly,
                      .dropout_start = 0.7,
                      .dropout_end = 0.5,
                      .learning_rate = 1e-3,
                      .epochs = 20},
                     {.trainable_scope = TrainableScope::kHeadPlusLastBackboneLayer,
                      .dropout_start = 0.3,
                      .dropout_end = 0.3,
                      .learning_rate = 1e-4,
                      .epochs = 10}},
          .detector_epochs = 100};
}

ValidationReport validate_training_plan(const TrainingPlan& plan) {
  ValidationReport r;
  auto fail = [&](std::string msg) { r.violations.push_back(std::move(msg)); };
  if (plan.stages.empty()) fail("at least one stage is required");
  if (plan.detector_epochs < 1) fail("detector_epochs must be >= 1");
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const auto& s = plan.stages[i];
    const std::string tag = "stage " + std::to_string(i + 1) + ": ";
    for (double d : {s.dropout_start, s.dropout_end}) {
      if (!(d >= 0.0 && d < 1.0)) fail(tag + "dropout must be in [0, 1)");
    }
    if (s.dropout_end > s.dropout_start) fail(tag + "dropout increases within the stage");
    if (!(s.learning_rate > 0.0) || !std::isfinite(s.learning_rate)) fail(tag + "learning_rate must be positive");
    if (s.epochs < 1) fail(tag + "epochs must be >= 1");
    if (i == 0) continue;
    const auto& prev = plan.stages[i - 1];
    if (s.dropout_start > prev.dropout_end) fail(tag + "dropout increases across stages");
    if (s.learning_rate > prev.learning_rate) fail(tag + "learning_rate increases across stages");
    if (static_cast<int>(s.trainable_scope) < static_cast<int>(prev.trainable_scope)) {
      fail(tag + "trainable scope shrinks across stages");
    }
  }
  return r;
}

Json training_plan_to_json(const TrainingPlan& plan) {
  Json stages = Json::array();
  for (const auto& s : plan.stages) {
    stages.push_back({{"trainable_scope", to_string(s.trainable_scope)},
                      {"dropout_start", s.dropout_start},
                      {"dropout_end", s.dropout_end},
                      {"learning_rate", s.learning_rate},
                      {"epochs", s.epochs}});
  }
  return {{"stages", std::move(stages)}, {"detector_epochs", plan.detector_epochs}};
}

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, where + " must be a mapping");
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) throw Error(ErrorKind::kConfig, where + ": unknown key '" + k + "'");
  }
}

}  // namespace

TrainingPlan training_plan_from_json(const Json& j) {
  reject_unknown(j, {"stages", "detector_epochs"}, "training_plan");
  TrainingPlan plan;
  try {
    if (j.contains("detector_epochs")) plan.detector_epochs = j.at("detector_epochs").get<int>();
    if (j.contains("stages")) {
      for (const auto& sj : j.at("stages")) {
        reject_unknown(sj, {"trainable_scope", "dropout_start", "dropout_end", "learning_rate", "epochs"},
                       "training_plan.stages[]");
        TrainingStage s;
        s.trainable_scope = scope_from_string(sj.at("trainable_scope").get<std::string>());
        s.dropout_start = sj.at("dropout_start").get<double>();
        s.dropout_end = sj.value("dropout_end", s.dropout_start);
        s.learning_rate = sj.at("learning_rate").get<double>();
        s.epochs = sj.at("epochs").get<int>();
        plan.stages.push_back(s);
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("training_plan: ") + e.what());
  }
  return plan;
}

}  // namespace graspcheck
