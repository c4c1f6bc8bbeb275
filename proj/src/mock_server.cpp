#include "boundary/mock_server.hpp"

#include <cctype>
#include <chrono>
#include <mutex>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "boundary/common.hpp"
#include "boundary/markers.hpp"
#include "boundary/verification.hpp"

namespace boundary {

namespace {

void check_unit(double v, const char* name) {
  if (v < 0.0 || v > 1.0) {
    throw ValidationError(std::string("mock spec: ") + name + " must be in [0, 1], got " +
                          std::to_string(v));
  }
}

}  // namespace

void ScriptedModelSpec::validate() const {
  check_unit(default_p_correct, "default_p_correct");
  check_unit(malformed_rate, "malformed_rate");
  check_unit(error_rate, "error_rate");
  for (const auto& [item, p] : per_item_p) {
    if (p < 0.0 || p > 1.0) {
      throw ValidationError("mock spec: per_item_p[\"" + item + "\"] must be in [0, 1]");
    }
  }
  if (distractor_policy != "UNIFORM_WRONG") {
    throw ValidationError("mock spec: unsupported distractor_policy \"" + distractor_policy + "\"");
  }
  for (const auto& [item, letter] : answer_key) {
    if (letter < 'A' || letter > 'Z') {
      throw ValidationError("mock spec: answer_key[\"" + item + "\"] must be an uppercase letter");
    }
  }
  if (delay_ms < 0) throw ValidationError("mock spec: delay_ms must be >= 0");
}

ScriptedModelSpec ScriptedModelSpec::from_json_file(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file_bytes(path));
  } catch (const nlohmann::json::parse_error& ex) {
    throw ValidationError(path + ": " + ex.what());
  }
  ScriptedModelSpec spec;
  try {
    if (j.contains("default_p_correct")) spec.default_p_correct = j["default_p_correct"].get<double>();
    if (j.contains("per_item_p")) {
      for (const auto& [k, v] : j["per_item_p"].items()) spec.per_item_p[k] = v.get<double>();
    }
    if (j.contains("answer_key")) {
      for (const auto& [k, v] : j["answer_key"].items()) {
        auto s = v.get<std::string>();
        if (s.size() != 1) throw ValidationError("mock spec: answer_key values are single letters");
        spec.answer_key[k] = s[0];
      }
    }
    if (j.contains("distractor_policy")) spec.distractor_policy = j["distractor_policy"].get<std::string>();
    if (j.contains("malformed_rate")) spec.malformed_rate = j["malformed_rate"].get<double>();
    if (j.contains("error_rate")) spec.error_rate = j["error_rate"].get<double>();
    if (j.contains("rng_seed")) spec.rng_seed = j["rng_seed"].get<std::uint64_t>();
    if (j.contains("judge_map")) {
      for (const auto& [k, v] : j["judge_map"].items()) {
        if (k.size() != 1) throw ValidationError("mock spec: judge_map keys are single letters");
        spec.judge_map[k[0]] = v.get<std::string>();
      }
    }
    if (j.contains("judge_default")) spec.judge_default = j["judge_default"].get<std::string>();
    if (j.contains("modality_reply")) spec.modality_reply = j["modality_reply"].get<std::string>();
    if (j.contains("delay_ms")) spec.delay_ms = j["delay_ms"].get<int>();
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(path + ": " + ex.what());
  }
  spec.validate();
  return spec;
}

struct MockServer::Impl {
  ScriptedModelSpec spec;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mutex;
  MockServerStats st;
  std::uint64_t counter = 0;
};

namespace {

std::string request_text(const nlohmann::json& body) {
  if (!body.contains("messages")) return {};
  for (const auto& msg : body["messages"]) {
    if (!msg.contains("content")) continue;
    if (msg["content"].is_string()) return msg["content"].get<std::string>();
    for (const auto& part : msg["content"]) {
      if (part.value("type", "") == "text") return part.value("text", "");
    }
  }
  return {};
}

// Option letters are the uppercase line leads of the "X. text" block.
std::vector<char> option_letters(const std::string& text) {
  std::vector<char> letters;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line(text.data() + pos,
                          (eol == std::string::npos ? text.size() : eol) - pos);
    if (line.size() >= 3 && line[0] >= 'A' && line[0] <= 'Z' && line[1] == '.' && line[2] == ' ') {
      letters.push_back(line[0]);
    }
    if (eol == std::string::npos) break;
    pos = eol + 1;
  }
  return letters;
}

void reply_json(httplib::Response& res, int status, const nlohmann::json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void reply_completion(httplib::Response& res, std::uint64_t counter, const std::string& model,
                      const std::string& content) {
  nlohmann::json j{
      {"id", "mock-" + std::to_string(counter)},
      {"object", "chat.completion"},
      {"model", model},
      {"choices",
       nlohmann::json::array({nlohmann::json{{"index", 0},
                                             {"message", {{"role", "assistant"}, {"content", content}}},
                                             {"finish_reason", "stop"}}})}};
  reply_json(res, 200, j);
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, nlohmann::json{{"error", {{"message", message}}}});
}

}  // namespace

MockServer::MockServer(ScriptedModelSpec spec) : impl_(std::make_unique<Impl>()) {
  spec.validate();
  impl_->spec = std::move(spec);

  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(32); };
  impl_->server.set_tcp_nodelay(true);
  impl_->server.set_keep_alive_max_count(1 << 20);

  impl_->server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
    Impl& im = *impl_;
    std::uint64_t counter;
    {
      std::lock_guard<std::mutex> lock(im.mutex);
      counter = ++im.counter;
      ++im.st.total_requests;
      ++im.st.inflight;
      im.st.high_water_mark = std::max(im.st.high_water_mark, im.st.inflight);
    }
    struct Leave {
      Impl& im;
      ~Leave() {
        std::lock_guard<std::mutex> lock(im.mutex);
        --im.st.inflight;
      }
    } leave{im};

    if (im.spec.delay_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(im.spec.delay_ms));
    }

    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error&) {
      reply_error(res, 400, "request body is not JSON");
      return;
    }
    std::string text = request_text(body);
    std::string model = body.value("model", "mock");

    if (text.find(kJudgeRouteMarker) != std::string::npos) {
      std::string graded;
      auto open = text.find(kJudgeResponseOpen);
      if (open != std::string::npos) {
        auto close = text.find(kJudgeResponseClose, open + 3);
        if (close != std::string::npos) graded = text.substr(open + 3, close - open - 3);
      }
      std::string verdict = im.spec.judge_default;
      if (auto letter = parse_answer(graded)) {
        auto it = im.spec.judge_map.find(*letter);
        if (it != im.spec.judge_map.end()) verdict = it->second;
      }
      reply_completion(res, counter, model, verdict);
      return;
    }

    if (text.find(kModalityRouteMarker) != std::string::npos) {
      reply_completion(res, counter, model, im.spec.modality_reply);
      return;
    }

    auto item_id = extract_item_marker(text);
    if (!item_id) {
      reply_error(res, 400, "no item marker in request text");
      return;
    }
    auto key = im.spec.answer_key.find(*item_id);
    if (key == im.spec.answer_key.end()) {
      reply_error(res, 400, "item \"" + *item_id + "\" missing from the answer key");
      return;
    }

    std::uint64_t state = mix_seed(im.spec.rng_seed, counter);
    auto draw = [&state] { return state = splitmix64(state); };

    if (uniform01(draw()) < im.spec.error_rate) {
      {
        std::lock_guard<std::mutex> lock(im.mutex);
        ++im.st.http_errors_injected;
      }
      reply_error(res, 500, "injected error");
      return;
    }
    if (uniform01(draw()) < im.spec.malformed_rate) {
      reply_completion(res, counter, model,
                       "Honestly it is hard to commit to a single option here.");
      return;
    }

    double p = im.spec.default_p_correct;
    if (auto it = im.spec.per_item_p.find(*item_id); it != im.spec.per_item_p.end()) {
      p = it->second;
    }
    char answer = key->second;
    if (uniform01(draw()) >= p) {
      std::vector<char> wrong;
      for (char letter : option_letters(text)) {
        if (letter != key->second) wrong.push_back(letter);
      }
      if (!wrong.empty()) answer = wrong[draw() % wrong.size()];
    }
    reply_completion(res, counter, model,
                     "<think>scripted</think><answer>" + std::string(1, answer) + "</answer>");
  });

  impl_->server.Get("/__mock/stats", [this](const httplib::Request&, httplib::Response& res) {
    auto st = stats();
    reply_json(res, 200,
               nlohmann::json{{"total_requests", st.total_requests},
                              {"http_errors_injected", st.http_errors_injected},
                              {"inflight", st.inflight},
                              {"high_water_mark", st.high_water_mark}});
  });
}

MockServer::~MockServer() { stop(); }

void MockServer::start(int port) {
  if (impl_->thread.joinable()) throw ValidationError("mock server already started");
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    if (impl_->port <= 0) throw ValidationError("mock server: failed to bind a port");
  } else {
    if (!impl_->server.bind_to_port("127.0.0.1", port)) {
      throw ValidationError("mock server: failed to bind port " + std::to_string(port));
    }
    impl_->port = port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void MockServer::stop() {
  if (!impl_) return;
  if (impl_->thread.joinable()) {
    impl_->server.stop();
    impl_->thread.join();
  }
}

int MockServer::port() const { return impl_->port; }

std::string MockServer::base_url() const {
  return "http://127.0.0.1:" + std::to_string(impl_->port);
}

MockServerStats MockServer::stats() const {
  std::lock_guard<std::mutex> lock(impl_->mutex);
  return impl_->st;
}

}  // namespace boundary
