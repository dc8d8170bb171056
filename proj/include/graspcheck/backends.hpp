#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "graspcheck/dataset.hpp"
#include "graspcheck/image.hpp"

namespace graspcheck {

struct Detection {
  BoundingBox box;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

void validate_detection(const Detection& d);

/// What a backend sees: the pixels plus the example id they came from.
struct ImageInput {
  std::string_view id;
  const Image& image;
};

/// Stage-1 contract: every candidate with confidence >= threshold. Lowering the
/// threshold must never remove a candidate.
class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual std::vector<Detection> detect(const ImageInput& image, double threshold) = 0;
};

/// Stage-2 contract: probability in [0, 1] that the crop shows an empty
/// gripper. Deterministic for fixed weights and input.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;
  virtual double p_no_object(const ImageInput& crop) = 0;
};

/// Two-logit heads are reduced to the no-object probability with a softmax.
double softmax_no_object(double logit_object, double logit_no_object);

/// Candidates keyed by image id, read from
/// `{"<id>": [{"bbox": [x0, y0, x1, y1], "confidence": c}, ...], ...}`.
/// Unknown ids yield no detections.
class FixtureDetector final : public DetectorBackend {
 public:
  explicit FixtureDetector(std::map<std::string, std::vector<Detection>, std::less<>> table);
  static std::unique_ptr<FixtureDetector> from_file(const std::filesystem::path& path);

  std::vector<Detection> detect(const ImageInput& image, double threshold) override;
  int query_count() const { return queries_.load(); }

 private:
  std::map<std::string, std::vector<Detection>, std::less<>> table_;
  std::atomic<int> queries_{0};
};

/// Probabilities keyed by image id: `{"<id>": p, ...}`.
class FixtureClassifier final : public ClassifierBackend {
 public:
  explicit FixtureClassifier(std::map<std::string, double, std::less<>> table);
  static std::unique_ptr<FixtureClassifier> from_file(const std::filesystem::path& path);

  double p_no_object(const ImageInput& crop) override;
  int call_count() const { return calls_.load(); }

 private:
  std::map<std::string, double, std::less<>> table_;
  std::atomic<int> calls_{0};
};

/// Resolves a backend spec of the form `fixture:<path>`. Anything else (model
/// files need an inference runtime this build does not ship) raises
/// kInvalidArgument.
std::unique_ptr<DetectorBackend> make_detector(std::string_view spec);
std::unique_ptr<ClassifierBackend> make_classifier(std::string_view spec);

}  // namespace graspcheck
