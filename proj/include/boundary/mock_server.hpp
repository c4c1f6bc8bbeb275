#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

namespace boundary {

// Scripted behavior for the chat-completions test double. All probabilities
// are resolved from rng_seed and a per-request counter, so a replayed request
// sequence reproduces byte-identical responses.
struct ScriptedModelSpec {
  double default_p_correct = 1.0;
  std::map<std::string, double> per_item_p;
  std::map<std::string, char> answer_key;
  std::string distractor_policy = "UNIFORM_WRONG";
  double malformed_rate = 0.0;
  double error_rate = 0.0;
  std::uint64_t rng_seed = 0;

  // Judge route: verdict keyed by the answer letter detected in the graded
  // response section; judge_default covers unmapped/undetected letters.
  std::map<char, std::string> judge_map;
  std::string judge_default = "NO";

  // Modality route: fixed reply text.
  std::string modality_reply = "none";

  // Artificial per-request latency, for exercising concurrency.
  int delay_ms = 0;

  void validate() const;

  static ScriptedModelSpec from_json_file(const std::string& path);
};

struct MockServerStats {
  std::uint64_t total_requests = 0;
  std::uint64_t http_errors_injected = 0;
  int inflight = 0;
  int high_water_mark = 0;
};

// Local chat-completions test double. Also exposes GET /__mock/stats with the
// connection high-water mark.
class MockServer {
 public:
  explicit MockServer(ScriptedModelSpec spec);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  // Binds 127.0.0.1 and starts serving; port 0 picks a free port.
  void start(int port = 0);
  void stop();

  int port() const;
  std::string base_url() const;
  MockServerStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace boundary
