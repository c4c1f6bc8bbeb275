#include "boundary/inference.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>

#include "boundary/common.hpp"
#include "boundary/jsonl.hpp"
#include "boundary/markers.hpp"

namespace boundary {

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ValidationError("endpoint: base_url is empty");
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    throw ValidationError("endpoint: base_url must start with http:// or https://, got \"" +
                          base_url + "\"");
  }
  if (model_name.empty()) throw ValidationError("endpoint: model_name is empty");
  if (timeout_s <= 0.0) throw ValidationError("endpoint: timeout_s must be positive");
  if (max_retries < 0) throw ValidationError("endpoint: max_retries must be >= 0");
  if (max_concurrency < 1) throw ValidationError("endpoint: max_concurrency must be >= 1");
  if (max_tokens < 1) throw ValidationError("endpoint: max_tokens must be >= 1");
  if (retry_base_ms < 0) throw ValidationError("endpoint: retry_base_ms must be >= 0");
}

std::string mode_name(Mode mode) { return mode == Mode::kGreedy ? "GREEDY" : "SAMPLED"; }

Mode mode_from_name(const std::string& name) {
  if (name == "GREEDY") return Mode::kGreedy;
  if (name == "SAMPLED") return Mode::kSampled;
  throw ValidationError("unknown mode \"" + name + "\"");
}

SamplingPlan greedy_plan(std::uint64_t seed_base) {
  SamplingPlan p;
  p.mode = Mode::kGreedy;
  p.k = 1;
  p.temperature = 0.0;
  p.top_p = 1.0;
  p.seed_base = seed_base;
  return p;
}

SamplingPlan sampled_plan(int k, double temperature, double top_p, std::uint64_t seed_base) {
  if (k < 1) throw ValidationError("sampling plan: k must be >= 1");
  if (temperature < 0.0) throw ValidationError("sampling plan: temperature must be >= 0");
  if (top_p <= 0.0 || top_p > 1.0) throw ValidationError("sampling plan: top_p must be in (0, 1]");
  SamplingPlan p;
  p.mode = Mode::kSampled;
  p.k = k;
  p.temperature = temperature;
  p.top_p = top_p;
  p.seed_base = seed_base;
  return p;
}

std::uint64_t request_seed_for(const SamplingPlan& plan, const std::string& item_id,
                               int sample_index) {
  return plan.seed_base + fnv1a64(item_id) * static_cast<std::uint64_t>(plan.k) +
         static_cast<std::uint64_t>(sample_index);
}

void PromptTemplate::validate() const {
  if (text.find("{question}") == std::string::npos) {
    throw ValidationError("prompt template must contain {question}");
  }
  if (text.find("{options}") == std::string::npos) {
    throw ValidationError("prompt template must contain {options}");
  }
}

std::string render_options_block(const McqItem& item) {
  std::string block;
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    if (i > 0) block += "\n";
    block += std::string(1, item.options[i].letter) + ". " + item.options[i].text;
  }
  return block;
}

namespace {

std::string replace_all(std::string text, const std::string& needle, const std::string& repl) {
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    text.replace(pos, needle.size(), repl);
    pos += repl.size();
  }
  return text;
}

std::string mime_for(const std::string& image_path) {
  auto dot = image_path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : to_lower(image_path.substr(dot));
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  throw ValidationError("unsupported image extension \"" + ext + "\" in " + image_path);
}

}  // namespace

nlohmann::json render_prompt(const McqItem& item, const PromptTemplate& tmpl,
                             const EndpointConfig& endpoint) {
  tmpl.validate();
  std::string mime = mime_for(item.image_path);
  std::string data_uri = "data:" + mime + ";base64," + base64_encode(read_file_bytes(item.image_path));

  std::string text = replace_all(tmpl.text, "{question}", item.question);
  text = replace_all(text, "{options}", render_options_block(item));
  if (tmpl.embed_item_marker) text = item_marker(item.item_id) + "\n" + text;
  text += "\n\n";
  text += kAnswerFormatInstruction;

  nlohmann::json body;
  body["model"] = endpoint.model_name;
  body["messages"] = nlohmann::json::array(
      {nlohmann::json{{"role", "user"},
                      {"content", nlohmann::json::array(
                                      {nlohmann::json{{"type", "image_url"},
                                                      {"image_url", {{"url", data_uri}}}},
                                       nlohmann::json{{"type", "text"}, {"text", text}}})}}});
  body["max_tokens"] = endpoint.max_tokens;
  return body;
}

nlohmann::json raw_response_to_json(const RawResponse& r) {
  nlohmann::json j;
  j["item_id"] = r.item_id;
  j["sample_index"] = r.sample_index;
  j["mode"] = mode_name(r.mode);
  j["text"] = r.text;
  j["request_seed"] = r.request_seed;
  j["latency_ms"] = r.latency_ms;
  if (r.endpoint_error) {
    j["endpoint_error"] = *r.endpoint_error;
  } else {
    j["endpoint_error"] = nullptr;
  }
  return j;
}

RawResponse raw_response_from_json(const nlohmann::json& j) {
  try {
    RawResponse r;
    r.item_id = j.at("item_id").get<std::string>();
    r.sample_index = j.at("sample_index").get<int>();
    r.mode = mode_from_name(j.at("mode").get<std::string>());
    r.text = j.at("text").get<std::string>();
    r.request_seed = j.at("request_seed").get<std::uint64_t>();
    r.latency_ms = j.at("latency_ms").get<int>();
    if (!j.at("endpoint_error").is_null()) {
      r.endpoint_error = j.at("endpoint_error").get<std::string>();
    }
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed raw response: ") + ex.what());
  }
}

std::vector<RawResponse> read_raw_responses(const std::string& path) {
  std::vector<RawResponse> out;
  for_each_jsonl_line(path, [&](std::size_t lineno, const nlohmann::json& j) {
    try {
      out.push_back(raw_response_from_json(j));
    } catch (const ValidationError& ex) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  });
  return out;
}

namespace {

WireResult post_once(httplib::Client& client, const nlohmann::json& body) {
  auto start = std::chrono::steady_clock::now();
  auto res = client.Post("/v1/chat/completions", body.dump(), "application/json");
  auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                     std::chrono::steady_clock::now() - start)
                     .count();
  WireResult wr;
  wr.latency_ms = static_cast<int>(elapsed);
  if (!res) {
    wr.error = "transport error: " + httplib::to_string(res.error());
    return wr;
  }
  if (res->status != 200) {
    wr.error = "HTTP " + std::to_string(res->status);
    return wr;
  }
  try {
    auto j = nlohmann::json::parse(res->body);
    wr.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    wr.error = std::string("malformed response body: ") + ex.what();
  }
  return wr;
}

bool retryable(const WireResult& wr) {
  if (!wr.error) return false;
  const std::string& e = *wr.error;
  if (e.rfind("transport error", 0) == 0) return true;
  if (e.rfind("HTTP ", 0) == 0) {
    int status = std::atoi(e.c_str() + 5);
    return status == 429 || status >= 500;
  }
  return false;
}

}  // namespace

std::vector<WireResult> post_chat_batch(
    std::size_t n, const std::function<nlohmann::json(std::size_t)>& body_for,
    const EndpointConfig& endpoint,
    const std::function<void(std::size_t, const WireResult&)>& on_done) {
  endpoint.validate();
  std::vector<WireResult> results(n);
  if (n == 0) return results;

  std::atomic<std::size_t> next{0};
  std::mutex done_mutex;
  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(endpoint.max_concurrency), n);

  auto worker = [&](unsigned worker_id) {
    httplib::Client client(endpoint.base_url);
    client.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(endpoint.timeout_s * 1000)));
    client.set_read_timeout(std::chrono::milliseconds(static_cast<int>(endpoint.timeout_s * 1000)));
    client.set_write_timeout(std::chrono::milliseconds(static_cast<int>(endpoint.timeout_s * 1000)));
    client.set_keep_alive(true);
    client.set_tcp_nodelay(true);
    if (endpoint.api_key) client.set_bearer_token_auth(*endpoint.api_key);

    std::mt19937_64 jitter(std::random_device{}() + worker_id);
    while (true) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) break;
      nlohmann::json body = body_for(i);
      WireResult wr;
      for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
        if (attempt > 0) {
          double cap = static_cast<double>(endpoint.retry_base_ms) *
                       static_cast<double>(1ULL << (attempt - 1));
          std::uniform_real_distribution<double> dist(0.0, cap);
          std::this_thread::sleep_for(
              std::chrono::milliseconds(static_cast<long long>(dist(jitter))));
        }
        wr = post_once(client, body);
        if (!retryable(wr)) break;
      }
      results[i] = wr;
      if (on_done) {
        std::lock_guard<std::mutex> lock(done_mutex);
        on_done(i, results[i]);
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker, static_cast<unsigned>(w));
  for (auto& t : pool) t.join();
  return results;
}

RunSummary run_plan(const std::vector<McqItem>& items, const EndpointConfig& endpoint,
                    const SamplingPlan& plan, const std::string& out_path,
                    const RunOptions& opts) {
  endpoint.validate();
  opts.prompt.validate();
  if (plan.k < 1) throw ValidationError("sampling plan: k must be >= 1");

  std::set<std::pair<std::string, int>> existing;
  if (std::filesystem::exists(out_path)) {
    long long torn = for_each_jsonl_line(
        out_path,
        [&](std::size_t, const nlohmann::json& j) {
          existing.emplace(j.at("item_id").get<std::string>(), j.at("sample_index").get<int>());
        },
        /*tolerate_torn_tail=*/true);
    if (torn >= 0) std::filesystem::resize_file(out_path, static_cast<std::uintmax_t>(torn));
  }

  struct Pending {
    const McqItem* item;
    int sample_index;
  };
  std::vector<Pending> pending;
  RunSummary summary;
  for (const auto& item : items) {
    for (int idx = 0; idx < plan.k; ++idx) {
      if (existing.count({item.item_id, idx})) {
        ++summary.skipped_existing;
      } else {
        pending.push_back({&item, idx});
      }
    }
  }
  if (opts.max_requests > 0 && pending.size() > opts.max_requests) {
    pending.resize(opts.max_requests);
  }
  summary.attempted = pending.size();
  if (pending.empty()) return summary;

  std::ofstream out(out_path, std::ios::binary | std::ios::app);
  if (!out) throw ValidationError("cannot open " + out_path + " for append");

  auto body_for = [&](std::size_t i) {
    const Pending& p = pending[i];
    nlohmann::json body = render_prompt(*p.item, opts.prompt, endpoint);
    body["n"] = 1;
    body["temperature"] = plan.temperature;
    if (plan.mode == Mode::kSampled) body["top_p"] = plan.top_p;
    body["seed"] = request_seed_for(plan, p.item->item_id, p.sample_index);
    return body;
  };
  auto on_done = [&](std::size_t i, const WireResult& wr) {
    const Pending& p = pending[i];
    RawResponse r;
    r.item_id = p.item->item_id;
    r.sample_index = p.sample_index;
    r.mode = plan.mode;
    r.request_seed = request_seed_for(plan, p.item->item_id, p.sample_index);
    r.latency_ms = wr.latency_ms;
    if (wr.error) {
      r.endpoint_error = wr.error;
      ++summary.failed;
    } else {
      r.text = wr.text;
      ++summary.ok;
    }
    append_jsonl_line(out, raw_response_to_json(r));
    out.flush();
  };
  post_chat_batch(pending.size(), body_for, endpoint, on_done);
  return summary;
}

}  // namespace boundary
