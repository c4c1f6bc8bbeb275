#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boundary/manifest.hpp"

namespace boundary {

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string model_name;
  std::optional<std::string> api_key;
  double timeout_s = 120.0;
  int max_retries = 3;
  int max_concurrency = 8;
  int max_tokens = 1024;
  int retry_base_ms = 1000;  // exponential backoff base, full jitter

  void validate() const;
};

enum class Mode { kGreedy, kSampled };

std::string mode_name(Mode mode);
Mode mode_from_name(const std::string& name);

struct SamplingPlan {
  Mode mode = Mode::kGreedy;
  int k = 1;
  double temperature = 0.0;
  double top_p = 1.0;
  std::uint64_t seed_base = 0;
};

SamplingPlan greedy_plan(std::uint64_t seed_base);
SamplingPlan sampled_plan(int k, double temperature, double top_p, std::uint64_t seed_base);

struct RawResponse {
  std::string item_id;
  int sample_index = 0;
  Mode mode = Mode::kGreedy;
  std::string text;
  std::uint64_t request_seed = 0;
  int latency_ms = 0;
  std::optional<std::string> endpoint_error;
};

nlohmann::json raw_response_to_json(const RawResponse& r);
RawResponse raw_response_from_json(const nlohmann::json& j);
std::vector<RawResponse> read_raw_responses(const std::string& path);

struct PromptTemplate {
  // Must contain {question} and {options}.
  std::string text = "{question}\n\nOptions:\n{options}";
  bool embed_item_marker = true;

  void validate() const;
};

// Fixed suffix appended to every rendered prompt.
inline constexpr const char* kAnswerFormatInstruction =
    "Reason step by step inside <think> </think> tags, then give your final choice as a "
    "single option letter inside <answer> </answer> tags.";

// Builds the chat-completions body for one item: model, one user message with
// an image data-URI part followed by the rendered text part, and max_tokens.
// Sampling fields (temperature, top_p, seed, n) are added per request by
// run_plan. Byte-identical for identical inputs.
nlohmann::json render_prompt(const McqItem& item, const PromptTemplate& tmpl,
                             const EndpointConfig& endpoint);

std::string render_options_block(const McqItem& item);

struct WireResult {
  std::string text;
  std::optional<std::string> error;
  int latency_ms = 0;
};

// Issues n chat-completion POSTs with bounded concurrency and retries.
// body_for is called lazily from worker threads; on_done (optional) is called
// under an internal lock as each request finishes.
std::vector<WireResult> post_chat_batch(
    std::size_t n, const std::function<nlohmann::json(std::size_t)>& body_for,
    const EndpointConfig& endpoint,
    const std::function<void(std::size_t, const WireResult&)>& on_done = nullptr);

struct RunSummary {
  std::uint64_t attempted = 0;
  std::uint64_t ok = 0;
  std::uint64_t failed = 0;
  std::uint64_t skipped_existing = 0;
};

struct RunOptions {
  PromptTemplate prompt;
  // Stop after this many requests in this invocation (0 = no cap). The run
  // stays resumable: a later invocation fills in whatever is missing.
  std::uint64_t max_requests = 0;
};

// Sends one request per missing (item, sample_index) pair and appends each
// RawResponse to `out_path` as it completes. Pairs already present in the
// file are skipped, so interrupted runs can be resumed by re-invoking.
RunSummary run_plan(const std::vector<McqItem>& items, const EndpointConfig& endpoint,
                    const SamplingPlan& plan, const std::string& out_path,
                    const RunOptions& opts = {});

std::uint64_t request_seed_for(const SamplingPlan& plan, const std::string& item_id,
                               int sample_index);

}  // namespace boundary
