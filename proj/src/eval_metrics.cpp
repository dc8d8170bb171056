#include "graspcheck/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "graspcheck/error.hpp"
#include "json_util.hpp"

namespace graspcheck {

using detail::Json;

void validate_record(const EvalRecord& r) {
  const std::string where = "record '" + r.example_id + "'";
  if (r.example_id.empty()) throw Error(ErrorKind::kMalformedAnnotation, "record with empty example_id");
  if (r.category == Category::kNoObject) {
    if (r.object_id) throw Error(ErrorKind::kMalformedAnnotation, where + ": no_object record with object_id");
    if (r.true_label != GraspLabel::kNoObject) {
      throw Error(ErrorKind::kMalformedAnnotation, where + ": no_object record must have true_label 1");
    }
  } else if (r.true_label != GraspLabel::kObject) {
    throw Error(ErrorKind::kMalformedAnnotation, where + ": object record must have true_label 0");
  }
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  static const std::set<std::string> keys = {"example_id",      "category",       "object_id",
                                             "detection_correct", "predicted_label", "true_label"};
  std::vector<EvalRecord> out;
  detail::for_each_jsonl(path, [&](int lineno, const Json& j) {
    const std::string where = path.string() + ":" + std::to_string(lineno);
    try {
      for (const auto& [k, v] : j.items()) {
        if (!keys.contains(k)) throw std::invalid_argument("unknown key '" + k + "'");
      }
      EvalRecord r;
      r.example_id = j.at("example_id").get<std::string>();
      r.category = category_from_string(j.at("category").get<std::string>());
      if (j.contains("object_id") && !j.at("object_id").is_null()) r.object_id = j.at("object_id").get<std::string>();
      r.detection_correct = j.at("detection_correct").get<bool>();
      if (!j.at("predicted_label").is_null()) r.predicted_label = label_from_int(j.at("predicted_label").get<int>());
      r.true_label = label_from_int(j.at("true_label").get<int>());
      validate_record(r);
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kMalformedAnnotation, where + ": " + e.what());
    }
  });
  return out;
}

std::string serialize_records(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    Json j;
    j["example_id"] = r.example_id;
    j["category"] = to_string(r.category);
    j["object_id"] = r.object_id ? Json(*r.object_id) : Json(nullptr);
    j["detection_correct"] = r.detection_correct;
    j["predicted_label"] = r.predicted_label ? Json(static_cast<int>(*r.predicted_label)) : Json(nullptr);
    j["true_label"] = static_cast<int>(r.true_label);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_records(const std::vector<EvalRecord>& records, const std::filesystem::path& path) {
  detail::write_file(path, serialize_records(records));
}

std::string_view to_string(Population p) {
  return p == Population::kPredicted ? "predicted" : "detected_and_predicted";
}

Population population_from_string(std::string_view s) {
  if (s == "predicted") return Population::kPredicted;
  if (s == "detected_and_predicted") return Population::kDetectedAndPredicted;
  throw Error(ErrorKind::kInvalidArgument, "unknown population '" + std::string(s) + "'");
}

namespace {

bool in_population(const EvalRecord& r, Population p) {
  if (!r.predicted_label) return false;
  return p == Population::kPredicted || r.detection_correct;
}

}  // namespace

DetectionTable detection_table(const std::vector<EvalRecord>& records) {
  DetectionTable table;
  std::map<Category, std::map<std::string, bool>> objects;
  for (const auto& r : records) {
    auto& row = table[r.category];
    ++row.num_images;
    if (r.detection_correct) ++row.num_detected;
    if (r.object_id) {
      auto [it, inserted] = objects[r.category].try_emplace(*r.object_id, true);
      it->second = it->second && r.detection_correct;
    }
  }
  for (auto& [cat, row] : table) {
    row.pct_detected = 100.0 * static_cast<double>(row.num_detected) / static_cast<double>(row.num_images);
    if (cat == Category::kNoObject) continue;
    const auto& objs = objects[cat];
    row.num_objects = objs.size();
    row.num_objects_correct =
        static_cast<std::size_t>(std::count_if(objs.begin(), objs.end(), [](const auto& kv) { return kv.second; }));
    if (row.num_objects > 0) {
      row.pct_objects_correct =
          100.0 * static_cast<double>(row.num_objects_correct) / static_cast<double>(row.num_objects);
    }
  }
  return table;
}

bool detection_correct_synthetic(const BoundingBox& predicted, const std::optional<SyntheticTruth>& truth) {
  if (!truth) throw Error(ErrorKind::kMissingGroundTruth, "synthetic ground truth required; use manual review");
  validate_box(predicted, "predicted box");
  for (const auto& tip : truth->fingertips_px) {
    if (!predicted.contains_point(tip[0], tip[1])) return false;
  }
  return truth->mask_fraction >= 0.5;
}

ClassificationTable classification_table(const std::vector<EvalRecord>& records, Population population) {
  ClassificationTable table;
  for (Category c : kAllCategories) table[c];
  for (const auto& r : records) {
    if (!in_population(r, population)) continue;
    auto& cell = table[r.category];
    ++cell.total;
    if (*r.predicted_label == r.true_label) ++cell.correct;
  }
  for (auto& [cat, cell] : table) {
    if (cell.total > 0) cell.pct = 100.0 * static_cast<double>(cell.correct) / static_cast<double>(cell.total);
  }
  return table;
}

namespace {

PRScore finish_pr(std::size_t tp, std::size_t fp, std::size_t fn) {
  PRScore s{std::nullopt, std::nullopt, tp, fp, fn};
  if (tp + fp > 0) s.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) s.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return s;
}

}  // namespace

PRScore precision_recall(const std::vector<EvalRecord>& records, Population population) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& r : records) {
    if (!in_population(r, population)) continue;
    const bool pred_pos = *r.predicted_label == GraspLabel::kNoObject;
    const bool true_pos = r.true_label == GraspLabel::kNoObject;
    if (pred_pos && true_pos) ++tp;
    if (pred_pos && !true_pos) ++fp;
    if (!pred_pos && true_pos) ++fn;
  }
  return finish_pr(tp, fp, fn);
}

PRScore derive_pr_from_accuracies(const CategoryCounts& counts, const std::map<Category, double>& accuracy_pct) {
  auto get = [](const auto& m, Category c, const char* what) {
    auto it = m.find(c);
    if (it == m.end()) {
      throw Error(ErrorKind::kInvalidArgument, std::string(what) + " missing for " + std::string(to_string(c)));
    }
    return it->second;
  };
  auto wrong = [&](Category c) {
    const double acc = round_half_up(get(accuracy_pct, c, "accuracy"), 1) / 100.0;
    return static_cast<std::size_t>(std::lround((1.0 - acc) * static_cast<double>(get(counts, c, "count"))));
  };
  const std::size_t n_pos = get(counts, Category::kNoObject, "count");
  const std::size_t tp = n_pos - wrong(Category::kNoObject);
  const std::size_t fp = wrong(Category::kRigid) + wrong(Category::kDeformable);
  return finish_pr(tp, fp, n_pos - tp);
}

ConsistencyReport check_consistency(const PRScore& measured, const PRScore& derived, double tolerance) {
  ConsistencyReport rep{measured, derived, tolerance, false, {}};
  auto close = [&](const std::optional<double>& a, const std::optional<double>& b) {
    return a && b && std::abs(*a - *b) <= tolerance + 1e-12;
  };
  const bool p_ok = close(measured.precision, derived.precision);
  const bool r_ok = close(measured.recall, derived.recall);
  rep.consistent = p_ok && r_ok;
  auto show = [](const std::optional<double>& v) { return v ? format_fixed(*v, 3) : std::string("undefined"); };
  std::ostringstream ss;
  if (rep.consistent) {
    ss << "consistent";
  } else {
    ss << "INCONSISTENT:";
    if (!p_ok) ss << " precision derived " << show(derived.precision) << " vs measured " << show(measured.precision);
    if (!r_ok) ss << " recall derived " << show(derived.recall) << " vs measured " << show(measured.recall);
  }
  ss << " (tolerance " << format_fixed(tolerance, 3) << ")";
  rep.summary = ss.str();
  return rep;
}

LatencyStats latency_stats(const std::vector<double>& durations_ms) {
  if (durations_ms.empty()) throw Error(ErrorKind::kInvalidArgument, "latency_stats needs at least one duration");
  LatencyStats s;
  s.count = durations_ms.size();
  const double n = static_cast<double>(s.count);
  double sum = 0.0;
  for (double d : durations_ms) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw Error(ErrorKind::kInvalidArgument, "durations must be finite and >= 0");
    sum += d;
  }
  s.mean_ms = sum / n;
  double ss = 0.0;
  for (double d : durations_ms) ss += (d - s.mean_ms) * (d - s.mean_ms);
  s.std_ms = std::sqrt(ss / n);
  return s;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = std::abs(value) * scale;
  // Nudge so that values printed as ...5 but stored just below still round up.
  const double r = std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, scaled)) / scale;
  return std::copysign(r, value);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_up(value, decimals));
  return buf;
}

namespace {

Json rounded(const std::optional<double>& v, int decimals) {
  return v ? Json(round_half_up(*v, decimals)) : Json(nullptr);
}

std::string cell_text(const std::optional<double>& v, int decimals, const char* missing = "N/A") {
  return v ? format_fixed(*v, decimals) : std::string(missing);
}

std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string pad_left(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i > 0) out += "  ";
      out += i == 0 ? pad_right(rows[r][i], width[i]) : pad_left(rows[r][i], width[i]);
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : width) total += w;
      out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    }
  }
  return out;
}

}  // namespace

Json detection_table_json(const DetectionTable& table) {
  Json j = Json::object();
  for (const auto& [cat, row] : table) {
    j[std::string(to_string(cat))] = {{"num_images", row.num_images},
                                      {"num_detected", row.num_detected},
                                      {"pct_detected", round_half_up(row.pct_detected, 2)},
                                      {"pct_objects_correct", rounded(row.pct_objects_correct, 2)}};
  }
  return j;
}

Json classification_table_json(const ClassificationTable& table) {
  Json j = Json::object();
  for (const auto& [cat, cell] : table) {
    j[std::string(to_string(cat))] = {
        {"accuracy_pct", rounded(cell.pct, 1)}, {"correct", cell.correct}, {"total", cell.total}};
  }
  return j;
}

Json pr_json(const PRScore& s) {
  return {{"precision", rounded(s.precision, 3)},
          {"recall", rounded(s.recall, 3)},
          {"tp", s.tp},
          {"fp", s.fp},
          {"fn", s.fn}};
}

Json consistency_json(const ConsistencyReport& r) {
  return {{"consistent", r.consistent},
          {"tolerance", r.tolerance},
          {"measured", pr_json(r.measured)},
          {"derived", pr_json(r.derived)},
          {"summary", r.summary}};
}

std::string detection_table_text(const DetectionTable& table) {
  std::vector<std::vector<std::string>> rows = {
      {"Category", "Num. images", "Num. detected", "% detected", "% objects correct"}};
  for (const auto& [cat, row] : table) {
    rows.push_back({std::string(to_string(cat)), std::to_string(row.num_images), std::to_string(row.num_detected),
                    format_fixed(row.pct_detected, 2), cell_text(row.pct_objects_correct, 2)});
  }
  return render(rows);
}

std::string classification_table_text(const std::vector<std::pair<std::string, ClassificationTable>>& models) {
  std::vector<std::vector<std::string>> rows = {{"Model"}};
  for (Category c : kAllCategories) rows[0].emplace_back(to_string(c));
  for (const auto& [name, table] : models) {
    std::vector<std::string> row = {name};
    for (Category c : kAllCategories) {
      auto it = table.find(c);
      row.push_back(it == table.end() ? "N/A" : cell_text(it->second.pct, 1));
    }
    rows.push_back(std::move(row));
  }
  return render(rows);
}

std::string pr_table_text(const std::vector<std::pair<std::string, PRScore>>& models) {
  std::vector<std::vector<std::string>> rows = {{"Model", "Precision", "Recall"}};
  for (const auto& [name, s] : models) {
    rows.push_back({name, cell_text(s.precision, 3, "undefined"), cell_text(s.recall, 3, "undefined")});
  }
  return render(rows);
}

std::vector<EvalRecord> build_records(const Dataset& dataset, const std::vector<VerdictRow>& verdicts,
                                      const std::filesystem::path& review_path) {
  std::map<std::string, bool, std::less<>> review;
  detail::for_each_jsonl(review_path, [&](int lineno, const Json& j) {
    try {
      review[j.at("example_id").get<std::string>()] = j.at("detection_correct").get<bool>();
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kIo, review_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });

  std::map<std::string_view, const VerdictRow*> by_image;
  for (const auto& v : verdicts) {
    if (!dataset.find(v.image)) {
      throw Error(ErrorKind::kInvalidArgument, "verdict for '" + v.image + "' has no manifest entry");
    }
    if (!by_image.emplace(v.image, &v).second) {
      throw Error(ErrorKind::kInvalidArgument, "duplicate verdict for '" + v.image + "'");
    }
  }

  std::vector<EvalRecord> records;
  records.reserve(dataset.examples.size());
  for (const auto& ex : dataset.examples) {
    auto it = by_image.find(ex.image_ref);
    if (it == by_image.end()) throw Error(ErrorKind::kInvalidArgument, "no verdict for '" + ex.image_ref + "'");
    EvalRecord r;
    r.example_id = ex.image_ref;
    r.category = ex.annotation.category;
    r.object_id = ex.annotation.object_id;
    r.true_label = ex.annotation.label;
    if (const auto& v = it->second->verdict) {
      r.predicted_label = v->label;
      auto rv = review.find(ex.image_ref);
      if (rv == review.end()) {
        throw Error(ErrorKind::kMissingGroundTruth, "no detection review for '" + ex.image_ref + "'");
      }
      r.detection_correct = rv->second;
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace graspcheck
