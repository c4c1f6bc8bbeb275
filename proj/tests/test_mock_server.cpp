#include "boundary/mock_server.hpp"

#include <map>
#include <set>
#include <string>

#include <doctest.h>

#include "boundary/common.hpp"
#include "boundary/inference.hpp"
#include "boundary/markers.hpp"
#include "boundary/stats.hpp"
#include "boundary/verification.hpp"
#include "test_util.hpp"

using namespace boundary;

namespace {

ScriptedModelSpec spec_for(const std::vector<McqItem>& items, double p) {
  ScriptedModelSpec spec;
  spec.default_p_correct = p;
  for (const auto& item : items) spec.answer_key[item.item_id] = item.correct_letter;
  return spec;
}

EndpointConfig endpoint_for(const MockServer& server, int concurrency = 4) {
  EndpointConfig ep;
  ep.base_url = server.base_url();
  ep.model_name = "mock-model";
  ep.max_concurrency = concurrency;
  ep.retry_base_ms = 1;
  return ep;
}

// Runs a plan against the server and reduces to per-item correct counts.
std::map<std::string, int> correct_counts(const std::vector<McqItem>& items,
                                          const EndpointConfig& ep, const SamplingPlan& plan,
                                          const std::string& out_path) {
  auto summary = run_plan(items, ep, plan, out_path);
  REQUIRE(summary.failed == 0);
  std::map<std::string, McqItem> by_id;
  for (const auto& item : items) by_id[item.item_id] = item;
  auto records = verify(read_raw_responses(out_path), by_id, VerifyOptions{});
  std::map<std::string, int> counts;
  for (const auto& rec : records) {
    if (rec.verdict == Verdict::kCorrect) ++counts[rec.item_id];
  }
  return counts;
}

}  // namespace

TEST_CASE("p=1 answers every item correctly, p=0 never does") {
  testutil::TempDir dir;
  auto items = testutil::make_items(dir, 6, 'B', 4);

  SUBCASE("always correct") {
    MockServer server(spec_for(items, 1.0));
    server.start();
    auto counts =
        correct_counts(items, endpoint_for(server), sampled_plan(4, 0.7, 0.9, 1), dir.file("a.jsonl"));
    for (const auto& item : items) CHECK(counts[item.item_id] == 4);
    server.stop();
  }
  SUBCASE("never correct, distractors still parse") {
    MockServer server(spec_for(items, 0.0));
    server.start();
    auto raw_path = dir.file("b.jsonl");
    auto counts =
        correct_counts(items, endpoint_for(server), sampled_plan(4, 0.7, 0.9, 1), raw_path);
    for (const auto& item : items) CHECK(counts[item.item_id] == 0);
    // wrong but well-formed: every response still parses to some option letter
    std::map<std::string, McqItem> by_id;
    for (const auto& item : items) by_id[item.item_id] = item;
    for (const auto& rec : verify(read_raw_responses(raw_path), by_id, VerifyOptions{})) {
      CHECK(rec.verdict == Verdict::kWrong);
      REQUIRE(rec.parsed_letter.has_value());
      CHECK(rec.parsed_letter.value() != by_id[rec.item_id].correct_letter);
    }
    server.stop();
  }
}

TEST_CASE("p=0.5 yields pass-at-4 near its analytic value") {
  testutil::TempDir dir;
  auto items = testutil::make_items(dir, 60, 'B', 4);
  auto spec = spec_for(items, 0.5);
  spec.rng_seed = 2026;
  MockServer server(spec);
  server.start();
  // serial requests keep the draw-to-item assignment deterministic
  auto counts = correct_counts(items, endpoint_for(server, 1), sampled_plan(16, 0.7, 0.9, 7),
                               dir.file("c.jsonl"));
  double mean = 0.0;
  for (const auto& item : items) mean += pass_at_k(16, counts[item.item_id], 4);
  mean /= static_cast<double>(items.size());
  CHECK(mean == doctest::Approx(0.9375).epsilon(0.08));
  server.stop();
}

TEST_CASE("identical specs replay byte-identical responses") {
  testutil::TempDir dir;
  auto items = testutil::make_items(dir, 5, 'C', 4);
  auto spec = spec_for(items, 0.4);
  spec.rng_seed = 99;
  spec.malformed_rate = 0.2;

  auto transcript = [&](MockServer& server) {
    auto ep = endpoint_for(server, 1);
    std::vector<std::string> texts;
    auto bodies = [&](std::size_t i) {
      return render_prompt(items[i % items.size()], PromptTemplate{}, ep);
    };
    auto results = post_chat_batch(20, bodies, ep);
    for (const auto& r : results) {
      REQUIRE_FALSE(r.error.has_value());
      texts.push_back(r.text);
    }
    return texts;
  };

  MockServer a(spec);
  a.start();
  auto ta = transcript(a);
  a.stop();

  MockServer b(spec);
  b.start();
  auto tb = transcript(b);
  b.stop();

  CHECK(ta == tb);
}

TEST_CASE("error_rate=1 surfaces as endpoint errors after retries") {
  testutil::TempDir dir;
  auto items = testutil::make_items(dir, 3, 'A', 2);
  auto spec = spec_for(items, 1.0);
  spec.error_rate = 1.0;
  MockServer server(spec);
  server.start();
  auto ep = endpoint_for(server);
  ep.max_retries = 1;
  auto out = dir.file("err.jsonl");
  auto summary = run_plan(items, ep, greedy_plan(1), out);
  CHECK(summary.failed == 3);
  CHECK(summary.ok == 0);
  for (const auto& r : read_raw_responses(out)) {
    REQUIRE(r.endpoint_error.has_value());
    CHECK(r.text.empty());
  }
  CHECK(server.stats().http_errors_injected >= 6);  // 3 requests x (1 try + 1 retry)
  server.stop();
}

TEST_CASE("malformed_rate=1 yields unparseable responses") {
  testutil::TempDir dir;
  auto items = testutil::make_items(dir, 4, 'B', 3);
  auto spec = spec_for(items, 1.0);
  spec.malformed_rate = 1.0;
  MockServer server(spec);
  server.start();
  auto out = dir.file("m.jsonl");
  auto summary = run_plan(items, endpoint_for(server), greedy_plan(1), out);
  CHECK(summary.failed == 0);
  std::map<std::string, McqItem> by_id;
  for (const auto& item : items) by_id[item.item_id] = item;
  for (const auto& rec : verify(read_raw_responses(out), by_id, VerifyOptions{})) {
    CHECK(rec.verdict == Verdict::kUnparseable);
  }
  server.stop();
}

TEST_CASE("judge route maps detected letters to scripted verdicts") {
  testutil::TempDir dir;
  auto png = testutil::write_tiny_png(dir);
  auto item = testutil::make_item(png, "it1", 'B', 3);
  ScriptedModelSpec spec;
  spec.answer_key["it1"] = 'B';
  spec.judge_map['B'] = "YES";
  spec.judge_map['C'] = "NO";
  spec.judge_default = "NO";
  MockServer server(spec);
  server.start();
  auto ep = endpoint_for(server, 1);

  auto ask = [&](const std::string& graded) {
    auto body = render_prompt(item, PromptTemplate{}, ep);
    std::string prompt = judge_prompt(item, graded, true);
    body["messages"][0]["content"][1]["text"] = prompt;
    auto results = post_chat_batch(1, [&](std::size_t) { return body; }, ep);
    REQUIRE_FALSE(results[0].error.has_value());
    return results[0].text;
  };

  CHECK(ask("<answer>B</answer>") == "YES");
  CHECK(ask("<answer>C</answer>") == "NO");
  CHECK(ask("free text with no tags") == "NO");
  server.stop();
}

TEST_CASE("modality route returns the scripted reply") {
  testutil::TempDir dir;
  auto png = testutil::write_tiny_png(dir);
  auto item = testutil::make_item(png, "m1");
  ScriptedModelSpec spec;
  spec.modality_reply = "CT";
  MockServer server(spec);
  server.start();
  auto ep = endpoint_for(server, 1);
  std::string prompt = modality_judge_prompt(item, default_modality_vocabulary());
  REQUIRE(prompt.find(kModalityRouteMarker) != std::string::npos);
  auto body = render_prompt(item, PromptTemplate{}, ep);
  body["messages"][0]["content"][1]["text"] = prompt;
  auto results = post_chat_batch(1, [&](std::size_t) { return body; }, ep);
  REQUIRE_FALSE(results[0].error.has_value());
  CHECK(results[0].text == "CT");

  // the high-level tagger resolves the reply against the vocabulary
  auto tags = tag_modalities({item}, ep);
  REQUIRE(tags.size() == 1);
  CHECK(tags[0].item_id == "m1");
  CHECK(tags[0].predicted_modality == "ct");
  CHECK(tags[0].raw_judge_output == "CT");
  server.stop();
}

TEST_CASE("stats endpoint tracks totals and the concurrency high-water mark") {
  testutil::TempDir dir;
  auto items = testutil::make_items(dir, 10, 'A', 2);
  auto spec = spec_for(items, 1.0);
  spec.delay_ms = 20;
  MockServer server(spec);
  server.start();
  auto ep = endpoint_for(server, 4);
  auto out = dir.file("hwm.jsonl");
  run_plan(items, ep, sampled_plan(4, 0.7, 0.9, 3), out);
  auto st = server.stats();
  CHECK(st.total_requests == 40);
  CHECK(st.high_water_mark <= 4);
  CHECK(st.high_water_mark >= 2);
  CHECK(st.inflight == 0);
  server.stop();
}

TEST_CASE("spec validation and JSON loading") {
  ScriptedModelSpec bad;
  bad.default_p_correct = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.default_p_correct = 0.5;
  bad.error_rate = -0.1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.error_rate = 0.0;
  bad.per_item_p["x"] = 2.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  testutil::TempDir dir;
  auto path = dir.file("spec.json");
  testutil::write_text_file(path, R"({
    "default_p_correct": 0.25,
    "per_item_p": {"it1": 0.75},
    "answer_key": {"it1": "B", "it2": "C"},
    "malformed_rate": 0.1,
    "error_rate": 0.05,
    "rng_seed": 7,
    "judge_map": {"B": "YES"},
    "judge_default": "NO",
    "modality_reply": "mri",
    "delay_ms": 2
  })");
  auto spec = ScriptedModelSpec::from_json_file(path);
  CHECK(spec.default_p_correct == doctest::Approx(0.25));
  CHECK(spec.per_item_p.at("it1") == doctest::Approx(0.75));
  CHECK(spec.answer_key.at("it2") == 'C');
  CHECK(spec.judge_map.at('B') == "YES");
  CHECK(spec.modality_reply == "mri");
  CHECK(spec.rng_seed == 7);
  CHECK(spec.delay_ms == 2);
}

TEST_CASE("per-item probabilities override the default") {
  testutil::TempDir dir;
  auto items = testutil::make_items(dir, 2, 'B', 4);
  auto spec = spec_for(items, 0.0);
  spec.per_item_p[items[0].item_id] = 1.0;
  MockServer server(spec);
  server.start();
  auto counts = correct_counts(items, endpoint_for(server, 1), sampled_plan(8, 0.7, 0.9, 5),
                               dir.file("p.jsonl"));
  CHECK(counts[items[0].item_id] == 8);
  CHECK(counts[items[1].item_id] == 0);
  server.stop();
}
