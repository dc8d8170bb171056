#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "graspcheck/dataset.hpp"
#include "graspcheck/eval_metrics.hpp"

namespace graspcheck {

struct VqaConfig {
  std::string prompt_version = "v1";
  bool object_hints = false;  // refused: the prompt must not describe the object
  int jobs = 1;

  void validate() const;
};

struct VqaPrompt {
  std::string version;
  std::string text;

  friend bool operator==(const VqaPrompt&, const VqaPrompt&) = default;
};

/// The fixed question, identical for every example. Throws kUnsupportedOption
/// for object hints or an unknown template version.
VqaPrompt build_prompt(const VqaConfig& config);

/// First whole-word "yes" (OBJECT) or "no" (NO_OBJECT), case-insensitive.
/// Throws kUnparseableAnswer when neither appears.
GraspLabel parse_answer(std::string_view raw_text);

struct VqaRequest {
  std::string_view example_id;
  const std::filesystem::path& image_path;
  const VqaPrompt& prompt;
};

struct VqaResponse {
  std::string raw_text;
  double latency_ms = 0.0;
  double cost = 0.0;
  std::string currency = "EUR";
};

/// Implementations must be safe to call concurrently when jobs > 1. Transport
/// problems are reported as kClientFailure.
class VqaClient {
 public:
  virtual ~VqaClient() = default;
  virtual VqaResponse ask(const VqaRequest& request) = 0;
};

/// Serves answers from a recording: JSON-lines of
/// {example_id, raw_text, latency_ms, cost[, currency]}.
class ReplayClient final : public VqaClient {
 public:
  explicit ReplayClient(std::map<std::string, VqaResponse, std::less<>> answers);
  static std::unique_ptr<ReplayClient> from_file(const std::filesystem::path& path);

  VqaResponse ask(const VqaRequest& request) override;

 private:
  std::map<std::string, VqaResponse, std::less<>> answers_;
};

inline constexpr const char* kVqaApiKeyEnv = "GRASPCHECK_VQA_API_KEY";
inline constexpr const char* kVqaEndpointEnv = "GRASPCHECK_VQA_ENDPOINT";

/// Chat-completions style HTTPS endpoint. The key is read from
/// GRASPCHECK_VQA_API_KEY, the base URL from GRASPCHECK_VQA_ENDPOINT (default
/// https://api.openai.com). Cost per call is whatever the caller configures.
class LiveClient final : public VqaClient {
 public:
  struct Options {
    std::string model = "gpt-4o";
    double cost_per_call = 0.0;
    std::string currency = "EUR";
    int timeout_s = 60;
  };

  explicit LiveClient(Options options);
  VqaResponse ask(const VqaRequest& request) override;

 private:
  Options options_;
  std::string api_key_;
  std::string endpoint_;
};

/// `replay:<path>` or `live:<model>`.
std::unique_ptr<VqaClient> make_vqa_client(std::string_view spec);

struct VqaRunResult {
  std::vector<EvalRecord> records;         // dataset order; unparseable answers have no prediction
  std::vector<std::string> unparseable;    // example ids
  std::vector<double> latencies_ms;        // one per completed call
  std::optional<LatencyStats> latency;
  double total_cost = 0.0;
  std::string currency = "EUR";
  std::size_t calls = 0;
  bool complete = true;
  std::string failure;  // first client failure when incomplete
};

/// One call per example with the same prompt. Client failures stop the run
/// and leave a partial result with complete == false. Records always have
/// detection_correct set, since there is no detection stage.
VqaRunResult run_vqa_eval(const Dataset& dataset, VqaClient& client, const VqaPrompt& prompt, int jobs = 1);

nlohmann::ordered_json vqa_summary_json(const VqaRunResult& result, const VqaPrompt& prompt);

}  // namespace graspcheck
