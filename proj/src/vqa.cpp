#include "graspcheck/vqa.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>

#include "graspcheck/error.hpp"
#include "json_util.hpp"

namespace graspcheck {

using detail::Json;

void VqaConfig::validate() const {
  if (jobs < 1) throw Error(ErrorKind::kInvalidArgument, "vqa jobs must be >= 1");
}

VqaPrompt build_prompt(const VqaConfig& config) {
  config.validate();
  if (config.object_hints) {
    throw Error(ErrorKind::kUnsupportedOption, "object hints are not allowed in the VQA prompt");
  }
  if (config.prompt_version != "v1") {
    throw Error(ErrorKind::kUnsupportedOption, "unknown prompt version '" + config.prompt_version + "'");
  }
  return {"v1",
          "The image was taken by the head camera of a service robot right after it tried to grasp something. "
          "Look at the robot's gripper. Is the gripper holding any object? "
          "Reply with a single word: YES if it holds an object, NO if it is empty."};
}

GraspLabel parse_answer(std::string_view raw_text) {
  std::string token;
  auto judge = [&]() -> std::optional<GraspLabel> {
    if (token == "yes") return GraspLabel::kObject;
    if (token == "no") return GraspLabel::kNoObject;
    return std::nullopt;
  };
  for (char ch : raw_text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (auto l = judge()) return *l;
    token.clear();
  }
  if (auto l = judge()) return *l;
  throw Error(ErrorKind::kUnparseableAnswer, "no yes/no token in answer: " + std::string(raw_text.substr(0, 80)));
}

ReplayClient::ReplayClient(std::map<std::string, VqaResponse, std::less<>> answers) : answers_(std::move(answers)) {
  for (const auto& [id, r] : answers_) {
    if (!(r.latency_ms >= 0.0) || !(r.cost >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "recording for " + id + " has negative latency or cost");
    }
  }
}

std::unique_ptr<ReplayClient> ReplayClient::from_file(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorKind::kClientFailure, "replay file not found: " + path.string());
  }
  std::map<std::string, VqaResponse, std::less<>> answers;
  detail::for_each_jsonl(path, [&](int lineno, const Json& j) {
    try {
      VqaResponse r;
      r.raw_text = j.at("raw_text").get<std::string>();
      r.latency_ms = j.at("latency_ms").get<double>();
      r.cost = j.at("cost").get<double>();
      r.currency = j.value("currency", r.currency);
      const auto id = j.at("example_id").get<std::string>();
      if (!answers.emplace(id, std::move(r)).second) throw std::invalid_argument("duplicate example_id " + id);
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kClientFailure, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return std::make_unique<ReplayClient>(std::move(answers));
}

VqaResponse ReplayClient::ask(const VqaRequest& request) {
  auto it = answers_.find(request.example_id);
  if (it == answers_.end()) {
    throw Error(ErrorKind::kClientFailure, "recording has no answer for '" + std::string(request.example_id) + "'");
  }
  return it->second;
}

namespace {

std::string base64(const std::string& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

}  // namespace

LiveClient::LiveClient(Options options)
    : options_(std::move(options)),
      api_key_(env_or(kVqaApiKeyEnv, "")),
      endpoint_(env_or(kVqaEndpointEnv, "https://api.openai.com")) {
  if (api_key_.empty()) {
    throw Error(ErrorKind::kClientFailure, std::string("live VQA client needs ") + kVqaApiKeyEnv + " to be set");
  }
  if (options_.model.empty()) throw Error(ErrorKind::kInvalidArgument, "live VQA client needs a model name");
}

VqaResponse LiveClient::ask(const VqaRequest& request) {
  const std::string image = detail::read_file(request.image_path);
  Json body = {{"model", options_.model},
               {"max_tokens", 10},
               {"messages",
                Json::array({{{"role", "user"},
                              {"content", Json::array({{{"type", "text"}, {"text", request.prompt.text}},
                                                       {{"type", "image_url"},
                                                        {"image_url",
                                                         {{"url", "data:image/png;base64," + base64(image)}}}}})}}})}};
  httplib::Client http(endpoint_);
  http.set_read_timeout(options_.timeout_s, 0);
  http.set_bearer_token_auth(api_key_);
  const auto start = std::chrono::steady_clock::now();
  auto res = http.Post("/v1/chat/completions", body.dump(), "application/json");
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (!res) {
    throw Error(ErrorKind::kClientFailure, "request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorKind::kClientFailure, "service returned HTTP " + std::to_string(res->status));
  }
  try {
    const Json reply = Json::parse(res->body);
    return {reply.at("choices").at(0).at("message").at("content").get<std::string>(), ms, options_.cost_per_call,
            options_.currency};
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kClientFailure, std::string("malformed service reply: ") + e.what());
  }
}

std::unique_ptr<VqaClient> make_vqa_client(std::string_view spec) {
  if (spec.starts_with("replay:")) return ReplayClient::from_file(std::filesystem::path(spec.substr(7)));
  if (spec.starts_with("live:")) return std::make_unique<LiveClient>(LiveClient::Options{.model = std::string(spec.substr(5))});
  throw Error(ErrorKind::kInvalidArgument,
              "unsupported VQA client '" + std::string(spec) + "' (expected replay:<path> or live:<model>)");
}

namespace {

// Refuses any call whose prompt differs from the first one it saw.
class PromptGuard {
 public:
  explicit PromptGuard(VqaClient& inner) : inner_(inner) {}

  VqaResponse ask(const VqaRequest& request) {
    {
      std::lock_guard lock(mu_);
      if (!first_) {
        first_ = request.prompt.text;
      } else if (*first_ != request.prompt.text) {
        throw Error(ErrorKind::kPreconditionViolation, "prompt changed within a VQA run");
      }
    }
    return inner_.ask(request);
  }

 private:
  VqaClient& inner_;
  std::mutex mu_;
  std::optional<std::string> first_;
};

struct Slot {
  std::optional<VqaResponse> response;
  std::string transport_error;
  std::exception_ptr fatal;  // anything that is not a transport problem
};

}  // namespace

VqaRunResult run_vqa_eval(const Dataset& dataset, VqaClient& client, const VqaPrompt& prompt, int jobs) {
  if (jobs < 1) throw Error(ErrorKind::kInvalidArgument, "jobs must be >= 1");
  PromptGuard guard(client);
  const auto n = static_cast<long>(dataset.examples.size());
  std::vector<Slot> slots(dataset.examples.size());

#pragma omp parallel for num_threads(jobs) schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    const auto& ex = dataset.examples[i];
    const auto path = dataset.root / ex.image_ref;
    try {
      slots[i].response = guard.ask({ex.image_ref, path, prompt});
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kClientFailure || e.kind() == ErrorKind::kIo) {
        slots[i].transport_error = e.what();
      } else {
        slots[i].fatal = std::current_exception();
      }
    } catch (...) {
      slots[i].fatal = std::current_exception();
    }
  }

  VqaRunResult out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& ex = dataset.examples[i];
    auto& slot = slots[i];
    if (!slot.response) {
      if (slot.fatal) std::rethrow_exception(slot.fatal);
      out.complete = false;
      out.failure = ex.image_ref + ": " + slot.transport_error;
      break;
    }
    const VqaResponse& r = *slot.response;
    EvalRecord rec{ex.image_ref, ex.annotation.category, ex.annotation.object_id, true, std::nullopt,
                   ex.annotation.label};
    try {
      rec.predicted_label = parse_answer(r.raw_text);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kUnparseableAnswer) throw;
      out.unparseable.push_back(ex.image_ref);
    }
    out.records.push_back(std::move(rec));
    out.latencies_ms.push_back(r.latency_ms);
    out.total_cost += r.cost;
    out.currency = r.currency;
    ++out.calls;
  }
  if (!out.latencies_ms.empty()) out.latency = latency_stats(out.latencies_ms);
  return out;
}

Json vqa_summary_json(const VqaRunResult& r, const VqaPrompt& prompt) {
  Json j;
  j["prompt_version"] = prompt.version;
  j["calls"] = r.calls;
  j["parsed"] = r.calls - r.unparseable.size();
  j["unparseable"] = r.unparseable.size();
  j["unparseable_examples"] = r.unparseable;
  if (r.latency) {
    j["latency_ms"] = {{"mean", r.latency->mean_ms}, {"std", r.latency->std_ms}};
  } else {
    j["latency_ms"] = nullptr;
  }
  j["total_cost"] = round_half_up(r.total_cost, 6);
  j["currency"] = r.currency;
  j["complete"] = r.complete;
  if (!r.complete) j["failure"] = r.failure;
  return j;
}

}  // namespace graspcheck
