#include "graspcheck/config.hpp"

#include <functional>
#include <sstream>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "graspcheck/error.hpp"
#include "json_util.hpp"

namespace graspcheck {

using detail::Json;

namespace {

struct Field {
  std::string path;
  std::string doc;
  std::function<void(RunConfig&, const Json&)> set;
  std::function<Json(const RunConfig&)> get;
};

template <class T, class Ref>
Field plain(std::string path, std::string doc, Ref ref) {
  return {std::move(path), std::move(doc), [ref](RunConfig& c, const Json& j) { ref(c) = j.get<T>(); },
          [ref](const RunConfig& c) { return Json(ref(const_cast<RunConfig&>(c))); }};
}

template <class E, class Ref, class Parse>
Field enumerated(std::string path, std::string doc, Ref ref, Parse parse) {
  return {std::move(path), std::move(doc),
          [ref, parse](RunConfig& c, const Json& j) { ref(c) = parse(j.get<std::string>()); },
          [ref](const RunConfig& c) { return Json(std::string(to_string(ref(const_cast<RunConfig&>(c))))); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    // gen
    f.push_back(plain<int>("gen.batch_size", "examples per scene", [](RunConfig& c) -> auto& { return c.gen.batch_size; }));
    f.push_back(plain<double>("gen.p_grasp", "probability that an example holds an object",
                              [](RunConfig& c) -> auto& { return c.gen.p_grasp; }));
    f.push_back(plain<double>("gen.aperture_step", "normalized step of the closing sweep",
                              [](RunConfig& c) -> auto& { return c.gen.aperture_step; }));
    f.push_back(enumerated<AssetPool>("gen.asset_pool", "train | validation",
                                      [](RunConfig& c) -> auto& { return c.gen.asset_pool; }, asset_pool_from_string));
    f.push_back(plain<double>("gen.grasp_scale_min", "smallest grasped-object scale (m)",
                              [](RunConfig& c) -> auto& { return c.gen.grasp_scale_min; }));
    f.push_back(plain<double>("gen.grasp_scale_max", "largest grasped-object scale (m)",
                              [](RunConfig& c) -> auto& { return c.gen.grasp_scale_max; }));
    f.push_back(plain<int>("gen.grasp_attempts", "object draws before giving up on a grasp",
                           [](RunConfig& c) -> auto& { return c.gen.grasp_attempts; }));
    f.push_back(plain<int>("gen.pose_attempts", "arm poses tried per example",
                           [](RunConfig& c) -> auto& { return c.gen.pose_attempts; }));
    f.push_back(plain<int>("gen.distractors.min_count", "fewest distractors per scene",
                           [](RunConfig& c) -> auto& { return c.gen.distractors.min_count; }));
    f.push_back(plain<int>("gen.distractors.max_count", "most distractors per scene",
                           [](RunConfig& c) -> auto& { return c.gen.distractors.max_count; }));
    f.push_back(plain<double>("gen.distractors.scale_min", "smallest distractor scale (m)",
                              [](RunConfig& c) -> auto& { return c.gen.distractors.scale_min; }));
    f.push_back(plain<double>("gen.distractors.scale_max", "largest distractor scale (m)",
                              [](RunConfig& c) -> auto& { return c.gen.distractors.scale_max; }));
    f.push_back(plain<int>("gen.distractors.max_attempts", "rejected placements allowed per scene",
                           [](RunConfig& c) -> auto& { return c.gen.distractors.max_attempts; }));
    f.push_back(plain<double>("gen.distractors.robot_exclusion_radius", "keep-out radius around the robot (m)",
                              [](RunConfig& c) -> auto& { return c.gen.distractors.robot_exclusion_radius; }));
    // detect
    f.push_back(plain<double>("detect.threshold_start", "first detector confidence threshold",
                              [](RunConfig& c) -> auto& { return c.pipeline.schedule.start; }));
    f.push_back(plain<double>("detect.threshold_decay", "factor applied after an empty query",
                              [](RunConfig& c) -> auto& { return c.pipeline.schedule.decay_factor; }));
    f.push_back(plain<double>("detect.threshold_floor", "lowest threshold tried",
                              [](RunConfig& c) -> auto& { return c.pipeline.schedule.floor; }));
    f.push_back(plain<double>("detect.cluster_eps", "DBSCAN radius in normalized image coordinates",
                              [](RunConfig& c) -> auto& { return c.pipeline.cluster.eps; }));
    f.push_back(plain<int>("detect.cluster_min_pts", "DBSCAN core size, self included",
                           [](RunConfig& c) -> auto& { return c.pipeline.cluster.min_pts; }));
    f.push_back(plain<double>("detect.pad_x_frac", "horizontal padding as a fraction of box width",
                              [](RunConfig& c) -> auto& { return c.pipeline.pad.pad_x_frac; }));
    f.push_back(plain<double>("detect.pad_y_frac", "vertical padding as a fraction of box height",
                              [](RunConfig& c) -> auto& { return c.pipeline.pad.pad_y_frac; }));
    // decide
    f.push_back({"decide.threshold_no_object",
                 "p_no_object at or above this means no_object; null = 0.15 on real_eval, 0.5 elsewhere",
                 [](RunConfig& c, const Json& j) {
                   if (j.is_null()) {
                     c.threshold_no_object.reset();
                   } else {
                     c.threshold_no_object = j.get<double>();
                   }
                 },
                 [](const RunConfig& c) { return c.threshold_no_object ? Json(*c.threshold_no_object) : Json(nullptr); }});
    // training_plan is consumed whole
    f.push_back({"training_plan", "staged classifier fine-tuning schedule (stages[], detector_epochs)",
                 [](RunConfig& c, const Json& j) { c.training_plan = training_plan_from_json(j); },
                 [](const RunConfig& c) { return training_plan_to_json(c.training_plan); }});
    // eval
    f.push_back({"eval.review", "manual detection review file (JSON-lines)",
                 [](RunConfig& c, const Json& j) {
                   if (j.is_null()) {
                     c.eval.review.reset();
                   } else {
                     c.eval.review = j.get<std::string>();
                   }
                 },
                 [](const RunConfig& c) { return c.eval.review ? Json(c.eval.review->string()) : Json(nullptr); }});
    f.push_back(enumerated<Population>("eval.classification_population", "predicted | detected_and_predicted",
                                       [](RunConfig& c) -> auto& { return c.eval.classification_population; },
                                       population_from_string));
    f.push_back(enumerated<Population>("eval.pr_population", "predicted | detected_and_predicted",
                                       [](RunConfig& c) -> auto& { return c.eval.pr_population; },
                                       population_from_string));
    f.push_back(plain<double>("eval.consistency_tolerance", "allowed gap between derived and measured P/R",
                              [](RunConfig& c) -> auto& { return c.eval.consistency_tolerance; }));
    // vqa
    f.push_back(plain<std::string>("vqa.prompt_version", "prompt template version",
                                   [](RunConfig& c) -> auto& { return c.vqa.prompt.prompt_version; }));
    f.push_back(plain<bool>("vqa.object_hints", "must stay false",
                            [](RunConfig& c) -> auto& { return c.vqa.prompt.object_hints; }));
    f.push_back(plain<int>("vqa.jobs", "concurrent VQA calls", [](RunConfig& c) -> auto& { return c.vqa.prompt.jobs; }));
    f.push_back({"vqa.client", "replay:<path> | live:<model>",
                 [](RunConfig& c, const Json& j) {
                   if (j.is_null()) {
                     c.vqa.client.reset();
                   } else {
                     c.vqa.client = j.get<std::string>();
                   }
                 },
                 [](const RunConfig& c) { return c.vqa.client ? Json(*c.vqa.client) : Json(nullptr); }});
    return f;
  }();
  return table;
}

const Field* find_field(const std::string& path) {
  for (const auto& f : fields()) {
    if (f.path == path) return &f;
  }
  return nullptr;
}

void apply(RunConfig& cfg, const Json& node, const std::string& prefix) {
  if (!node.is_object()) throw Error(ErrorKind::kConfig, (prefix.empty() ? "config" : prefix) + " must be a mapping");
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (const Field* f = find_field(path)) {
      try {
        f->set(cfg, value);
      } catch (const Json::exception& e) {
        throw Error(ErrorKind::kConfig, path + ": " + e.what());
      } catch (const Error& e) {
        throw Error(ErrorKind::kConfig, path + ": " + e.what());
      }
      continue;
    }
    const bool is_section = std::any_of(fields().begin(), fields().end(),
                                        [&](const Field& f) { return f.path.starts_with(path + "."); });
    if (!is_section) throw Error(ErrorKind::kConfig, "unknown key '" + path + "'");
    apply(cfg, value, path);
  }
}

Json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      for (const auto& item : n) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : n) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
    case YAML::NodeType::Scalar:
      break;
  }
  if (n.Tag() == "!") return n.Scalar();  // quoted
  bool b;
  if (YAML::convert<bool>::decode(n, b)) return b;
  long long i;
  if (YAML::convert<long long>::decode(n, i)) return i;
  double d;
  if (YAML::convert<double>::decode(n, d)) return d;
  return n.Scalar();
}

}  // namespace

DecisionConfig RunConfig::decision_for(Split split) const {
  if (threshold_no_object) return {*threshold_no_object};
  return {split == Split::kRealEval ? DecisionConfig::kRealDomainThreshold : DecisionConfig::kNominalThreshold};
}

void RunConfig::validate() const {
  try {
    gen.validate();
    pipeline.validate();
    if (threshold_no_object) DecisionConfig{*threshold_no_object}.validate();
    vqa.prompt.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kConfig, e.what());
  }
  const auto report = validate_training_plan(training_plan);
  if (!report.ok()) throw Error(ErrorKind::kConfig, "training_plan: " + report.violations.front());
  if (!(eval.consistency_tolerance >= 0.0)) throw Error(ErrorKind::kConfig, "eval.consistency_tolerance must be >= 0");
}

RunConfig run_config_from_json(const Json& j) {
  RunConfig cfg;
  if (!j.is_null()) apply(cfg, j, "");
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  Json j;
  if (ext == ".yaml" || ext == ".yml") {
    try {
      j = yaml_to_json(YAML::LoadFile(path.string()));
    } catch (const YAML::Exception& e) {
      throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
    }
  } else if (ext == ".json") {
    try {
      j = Json::parse(detail::read_file(path));
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
    }
  } else {
    throw Error(ErrorKind::kConfig, "config must be .yaml, .yml or .json: " + path.string());
  }
  return run_config_from_json(j);
}

Json run_config_to_json(const RunConfig& config) {
  Json out = Json::object();
  for (const auto& f : fields()) {
    Json* node = &out;
    std::string rest = f.path;
    for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      node = &(*node)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    (*node)[rest] = f.get(config);
  }
  return out;
}

std::string config_key_help() {
  const RunConfig defaults;
  std::size_t width = 0;
  for (const auto& f : fields()) width = std::max(width, f.path.size());
  std::ostringstream ss;
  ss << "Config keys (YAML or JSON, nested by the dotted path):\n";
  for (const auto& f : fields()) {
    ss << "  " << f.path << std::string(width - f.path.size() + 2, ' ') << f.doc;
    if (f.path != "training_plan") ss << " [default: " << f.get(defaults).dump() << "]";
    ss << '\n';
  }
  return ss.str();
}

}  // namespace graspcheck
