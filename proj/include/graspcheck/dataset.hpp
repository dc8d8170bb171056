#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace graspcheck {

struct ImageSize {
  int width = 640;
  int height = 480;
};

/// Axis-aligned box in pixel coordinates, origin top-left.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool is_valid() const;
  bool contains(const BoundingBox& other) const;
  bool contains_point(double x, double y) const;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Throws ErrorKind::kInvalidArgument naming `what` when the box is invalid.
void validate_box(const BoundingBox& box, std::string_view what);

enum class GraspLabel : int { kObject = 0, kNoObject = 1 };

enum class Category { kNoObject, kRigid, kDeformable };

inline constexpr Category kAllCategories[] = {Category::kNoObject, Category::kRigid,
                                              Category::kDeformable};

std::string_view to_string(Category c);
Category category_from_string(std::string_view s);
std::string_view to_string(GraspLabel l);
GraspLabel label_from_int(int value);

struct Annotation {
  BoundingBox gripper_box;
  GraspLabel label = GraspLabel::kNoObject;
  Category category = Category::kNoObject;
  std::optional<std::string> object_id;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

// Checks box validity, category/label agreement and object_id presence.
void validate_annotation(const Annotation& a, std::string_view example_name);

struct Example {
  std::string image_ref;  // relative to the dataset root
  Annotation annotation;
  int batch_id = 0;
  int index_in_batch = 0;

  friend bool operator==(const Example&, const Example&) = default;
};

enum class Split { kTrain, kValidation, kRealEval };

std::string_view to_string(Split s);
Split split_from_string(std::string_view s);

struct Dataset {
  std::string manifest_version = "1";
  Split split = Split::kTrain;
  ImageSize image_size;
  std::vector<Example> examples;
  std::filesystem::path root;  // not serialized

  const Example* find(std::string_view image_ref) const;
};

inline constexpr const char* kManifestFile = "manifest.jsonl";

/// Parses `root/manifest.jsonl`, validates every invariant and checks that each
/// referenced file exists. Throws kMissingManifest, kMalformedAnnotation or
/// kDanglingImageRef.
Dataset load_dataset(const std::filesystem::path& root);

/// Validation shared by load and save: annotation invariants, unique image
/// refs and unique (batch, index) pairs.
void validate_dataset(const Dataset& dataset);

/// Canonical manifest text. Loading and re-serializing a canonical manifest is
/// byte-identical.
std::string serialize_manifest(const Dataset& dataset);
void save_manifest(const Dataset& dataset, const std::filesystem::path& root);

std::map<Category, std::size_t> category_counts(const Dataset& dataset);
std::set<std::string> distinct_objects(const Dataset& dataset, Category category);

}  // namespace graspcheck
