#include "graspcheck/dataset.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "graspcheck/error.hpp"
#include "json_util.hpp"

namespace graspcheck {

namespace fs = std::filesystem;
using detail::Json;

bool BoundingBox::is_valid() const {
  const double v[] = {x_min, y_min, x_max, y_max};
  for (double c : v) {
    if (!std::isfinite(c) || c < 0.0) return false;
  }
  return x_min < x_max && y_min < y_max;
}

bool BoundingBox::contains(const BoundingBox& o) const {
  return x_min <= o.x_min && y_min <= o.y_min && x_max >= o.x_max && y_max >= o.y_max;
}

bool BoundingBox::contains_point(double x, double y) const {
  return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
}

void validate_box(const BoundingBox& box, std::string_view what) {
  if (!box.is_valid()) {
    std::ostringstream ss;
    ss << what << ": invalid bbox [" << box.x_min << ", " << box.y_min << ", " << box.x_max << ", "
       << box.y_max << "]";
    throw Error(ErrorKind::kInvalidArgument, ss.str());
  }
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::kNoObject: return "no_object";
    case Category::kRigid: return "rigid";
    case Category::kDeformable: return "deformable";
  }
  return "?";
}

Category category_from_string(std::string_view s) {
  if (s == "no_object") return Category::kNoObject;
  if (s == "rigid") return Category::kRigid;
  if (s == "deformable") return Category::kDeformable;
  throw Error(ErrorKind::kInvalidArgument, "unknown category '" + std::string(s) + "'");
}

std::string_view to_string(GraspLabel l) { return l == GraspLabel::kObject ? "object" : "no_object"; }

GraspLabel label_from_int(int value) {
  if (value == 0) return GraspLabel::kObject;
  if (value == 1) return GraspLabel::kNoObject;
  throw Error(ErrorKind::kInvalidArgument, "label must be 0 or 1, got " + std::to_string(value));
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kRealEval: return "real_eval";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "validation") return Split::kValidation;
  if (s == "real_eval") return Split::kRealEval;
  throw Error(ErrorKind::kInvalidArgument, "unknown split '" + std::string(s) + "'");
}

void validate_annotation(const Annotation& a, std::string_view example_name) {
  const std::string where(example_name);
  if (!a.gripper_box.is_valid()) {
    throw Error(ErrorKind::kMalformedAnnotation, where + ": invalid bbox");
  }
  if ((a.category == Category::kNoObject) != (a.label == GraspLabel::kNoObject)) {
    throw Error(ErrorKind::kMalformedAnnotation, where + ": category and label disagree");
  }
  if (a.object_id.has_value() != (a.label == GraspLabel::kObject)) {
    throw Error(ErrorKind::kMalformedAnnotation,
                where + ": object_id must be present exactly when an object is held");
  }
  if (a.object_id && a.object_id->empty()) {
    throw Error(ErrorKind::kMalformedAnnotation, where + ": empty object_id");
  }
}

const Example* Dataset::find(std::string_view image_ref) const {
  for (const auto& e : examples) {
    if (e.image_ref == image_ref) return &e;
  }
  return nullptr;
}

void validate_dataset(const Dataset& dataset) {
  std::set<std::string> refs;
  std::set<std::pair<int, int>> slots;
  for (const auto& e : dataset.examples) {
    validate_annotation(e.annotation, e.image_ref);
    if (e.batch_id < 0 || e.index_in_batch < 0) {
      throw Error(ErrorKind::kMalformedAnnotation, e.image_ref + ": negative batch/index");
    }
    if (!refs.insert(e.image_ref).second) {
      throw Error(ErrorKind::kMalformedAnnotation, e.image_ref + ": duplicate image ref");
    }
    if (!slots.insert({e.batch_id, e.index_in_batch}).second) {
      throw Error(ErrorKind::kMalformedAnnotation,
                  e.image_ref + ": duplicate (batch, index) pair");
    }
  }
}

namespace {

Json header_json(const Dataset& d) {
  Json h;
  h["manifest_version"] = d.manifest_version;
  h["split"] = std::string(to_string(d.split));
  h["image_width"] = d.image_size.width;
  h["image_height"] = d.image_size.height;
  return h;
}

Json example_json(const Example& e) {
  Json j;
  j["image"] = e.image_ref;
  j["batch"] = e.batch_id;
  j["index"] = e.index_in_batch;
  j["label"] = static_cast<int>(e.annotation.label);
  j["category"] = std::string(to_string(e.annotation.category));
  j["object_id"] = e.annotation.object_id ? Json(*e.annotation.object_id) : Json(nullptr);
  j["bbox"] = detail::box_to_json(e.annotation.gripper_box);
  return j;
}

void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                         const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorKind::kMalformedAnnotation, where + ": unknown key '" + key + "'");
  }
}

Example example_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j, {"image", "batch", "index", "label", "category", "object_id", "bbox"}, where);
  Example e;
  try {
    e.image_ref = j.at("image").get<std::string>();
    e.batch_id = j.at("batch").get<int>();
    e.index_in_batch = j.at("index").get<int>();
    e.annotation.label = label_from_int(j.at("label").get<int>());
    e.annotation.category = category_from_string(j.at("category").get<std::string>());
    const auto& oid = j.at("object_id");
    if (!oid.is_null()) e.annotation.object_id = oid.get<std::string>();
    e.annotation.gripper_box = detail::box_from_json(j.at("bbox"));
  } catch (const Error& err) {
    throw Error(ErrorKind::kMalformedAnnotation, where + ": " + err.what());
  } catch (const std::exception& err) {
    throw Error(ErrorKind::kMalformedAnnotation, where + ": " + err.what());
  }
  validate_annotation(e.annotation, where + " (" + e.image_ref + ")");
  return e;
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
  const fs::path manifest = root / kManifestFile;
  if (!fs::is_regular_file(manifest)) {
    throw Error(ErrorKind::kMissingManifest, "no " + std::string(kManifestFile) + " in " + root.string());
  }
  Dataset d;
  d.root = root;
  bool have_header = false;
  try {
    detail::for_each_jsonl(manifest, [&](int lineno, const Json& j) {
      const std::string where = manifest.filename().string() + ":" + std::to_string(lineno);
      if (!have_header) {
        reject_unknown_keys(j, {"manifest_version", "split", "image_width", "image_height"}, where);
        try {
          d.manifest_version = j.at("manifest_version").get<std::string>();
          d.split = split_from_string(j.at("split").get<std::string>());
          d.image_size.width = j.at("image_width").get<int>();
          d.image_size.height = j.at("image_height").get<int>();
        } catch (const std::exception& err) {
          throw Error(ErrorKind::kMalformedAnnotation, where + ": bad header: " + err.what());
        }
        if (d.image_size.width <= 0 || d.image_size.height <= 0) {
          throw Error(ErrorKind::kMalformedAnnotation, where + ": image size must be positive");
        }
        have_header = true;
        return;
      }
      d.examples.push_back(example_from_json(j, where));
    });
  } catch (const Error& err) {
    if (err.kind() == ErrorKind::kIo) throw Error(ErrorKind::kMalformedAnnotation, err.what());
    throw;
  }
  if (!have_header) throw Error(ErrorKind::kMalformedAnnotation, "manifest has no header line");
  validate_dataset(d);
  for (const auto& e : d.examples) {
    if (!fs::exists(root / e.image_ref)) {
      throw Error(ErrorKind::kDanglingImageRef, e.image_ref + " does not exist under " + root.string());
    }
  }
  return d;
}

std::string serialize_manifest(const Dataset& dataset) {
  validate_dataset(dataset);
  std::string out = header_json(dataset).dump();
  out += '\n';
  for (const auto& e : dataset.examples) {
    out += example_json(e).dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  detail::write_file(root / kManifestFile, serialize_manifest(dataset));
}

std::map<Category, std::size_t> category_counts(const Dataset& dataset) {
  std::map<Category, std::size_t> counts;
  for (Category c : kAllCategories) counts[c] = 0;
  for (const auto& e : dataset.examples) ++counts[e.annotation.category];
  return counts;
}

std::set<std::string> distinct_objects(const Dataset& dataset, Category category) {
  std::set<std::string> ids;
  for (const auto& e : dataset.examples) {
    if (e.annotation.category == category && e.annotation.object_id) ids.insert(*e.annotation.object_id);
  }
  return ids;
}

}  // namespace graspcheck
