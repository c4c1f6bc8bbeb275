#include "boundary/verification.hpp"

#include <cctype>
#include <fstream>

#include "boundary/common.hpp"
#include "boundary/jsonl.hpp"
#include "boundary/markers.hpp"

namespace boundary {

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kCorrect: return "CORRECT";
    case Verdict::kWrong: return "WRONG";
    case Verdict::kUnparseable: return "UNPARSEABLE";
    case Verdict::kEndpointError: return "ENDPOINT_ERROR";
  }
  throw ValidationError("unknown verdict");
}

Verdict verdict_from_name(const std::string& name) {
  if (name == "CORRECT") return Verdict::kCorrect;
  if (name == "WRONG") return Verdict::kWrong;
  if (name == "UNPARSEABLE") return Verdict::kUnparseable;
  if (name == "ENDPOINT_ERROR") return Verdict::kEndpointError;
  throw ValidationError("unknown verdict \"" + name + "\"");
}

std::string verifier_name(VerifierKind v) {
  return v == VerifierKind::kRule ? "RULE" : "JUDGE";
}

VerifierKind verifier_from_name(const std::string& name) {
  if (name == "RULE") return VerifierKind::kRule;
  if (name == "JUDGE") return VerifierKind::kJudge;
  throw ValidationError("unknown verifier \"" + name + "\"");
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Matches '<' ws* [/] ws* "answer" ws* '>' case-insensitively starting at pos.
// Returns one-past-the-tag on success, 0 on mismatch.
std::size_t match_tag(std::string_view text, std::size_t pos, bool closing) {
  if (pos >= text.size() || text[pos] != '<') return 0;
  std::size_t i = pos + 1;
  auto skip_ws = [&] { while (i < text.size() && is_space(text[i])) ++i; };
  skip_ws();
  if (closing) {
    if (i >= text.size() || text[i] != '/') return 0;
    ++i;
    skip_ws();
  }
  static constexpr std::string_view kWord = "answer";
  for (char expect : kWord) {
    if (i >= text.size() ||
        std::tolower(static_cast<unsigned char>(text[i])) != expect) {
      return 0;
    }
    ++i;
  }
  skip_ws();
  if (i >= text.size() || text[i] != '>') return 0;
  return i + 1;
}

}  // namespace

std::optional<char> parse_answer(std::string_view text) {
  // Last complete <answer>...</answer> span wins.
  std::optional<std::pair<std::size_t, std::size_t>> span;
  std::size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] != '<') {
      ++pos;
      continue;
    }
    std::size_t open_end = match_tag(text, pos, false);
    if (open_end == 0) {
      ++pos;
      continue;
    }
    std::size_t scan = open_end;
    while (scan < text.size()) {
      if (text[scan] == '<') {
        std::size_t close_end = match_tag(text, scan, true);
        if (close_end != 0) {
          span = {open_end, scan};
          break;
        }
      }
      ++scan;
    }
    pos = open_end;
  }
  if (!span) return std::nullopt;

  std::string_view inner = text.substr(span->first, span->second - span->first);
  while (!inner.empty() && is_space(inner.front())) inner.remove_prefix(1);
  while (!inner.empty() && is_space(inner.back())) inner.remove_suffix(1);
  if (inner.empty()) return std::nullopt;
  unsigned char head = static_cast<unsigned char>(inner[0]);
  if (!std::isalpha(head)) return std::nullopt;
  if (inner.size() > 1 && std::isalnum(static_cast<unsigned char>(inner[1]))) {
    return std::nullopt;  // a word, not a committed option letter
  }
  return static_cast<char>(std::toupper(head));
}

std::string judge_prompt(const McqItem& item, const std::string& raw_response,
                         bool embed_item_marker) {
  std::string p;
  if (embed_item_marker) p += item_marker(item.item_id) + "\n";
  p += "You are grading one multiple-choice answer.\n\n";
  p += "Question: " + item.question + "\n\nOptions:\n";
  p += render_options_block(item);
  p += "\nCorrect option: " + std::string(1, item.correct_letter) + "\n\n";
  p += "Model response to grade:\n";
  p += std::string(kJudgeResponseOpen) + "\n" + raw_response + "\n" +
       std::string(kJudgeResponseClose) + "\n\n";
  p += "Does the response commit to the correct option? ";
  p += kJudgeRouteMarker;
  return p;
}

namespace {

nlohmann::json judge_body(const McqItem& item, const std::string& raw_response,
                          const EndpointConfig& judge, bool embed_item_marker) {
  nlohmann::json body;
  body["model"] = judge.model_name;
  body["messages"] = nlohmann::json::array({nlohmann::json{
      {"role", "user"},
      {"content", nlohmann::json::array({nlohmann::json{
                      {"type", "text"},
                      {"text", judge_prompt(item, raw_response, embed_item_marker)}}})}}});
  body["temperature"] = 0.0;
  body["max_tokens"] = judge.max_tokens;
  body["n"] = 1;
  return body;
}

}  // namespace

std::vector<SampleRecord> verify(const std::vector<RawResponse>& responses,
                                 const std::map<std::string, McqItem>& items,
                                 const VerifyOptions& opts) {
  if (opts.policy == VerifyPolicy::kRuleThenJudge && !opts.judge) {
    throw ValidationError("verify: RULE_THEN_JUDGE needs a judge endpoint");
  }

  std::vector<SampleRecord> records;
  records.reserve(responses.size());
  std::vector<std::size_t> escalate;
  for (const auto& r : responses) {
    auto it = items.find(r.item_id);
    if (it == items.end()) {
      throw ValidationError("verify: response references unknown item \"" + r.item_id + "\"");
    }
    const McqItem& item = it->second;

    SampleRecord rec;
    rec.item_id = r.item_id;
    rec.sample_index = r.sample_index;
    rec.mode = r.mode;
    rec.raw_text = r.text;
    rec.verifier = VerifierKind::kRule;
    if (r.endpoint_error) {
      rec.verdict = Verdict::kEndpointError;
    } else if (auto letter = parse_answer(r.text)) {
      rec.parsed_letter = letter;
      rec.verdict = *letter == item.correct_letter ? Verdict::kCorrect : Verdict::kWrong;
    } else {
      rec.verdict = Verdict::kUnparseable;
      if (opts.policy == VerifyPolicy::kRuleThenJudge) escalate.push_back(records.size());
    }
    records.push_back(std::move(rec));
  }

  if (!escalate.empty()) {
    const EndpointConfig& judge = *opts.judge;
    judge.validate();
    auto body_for = [&](std::size_t i) {
      const SampleRecord& rec = records[escalate[i]];
      return judge_body(items.at(rec.item_id), rec.raw_text, judge, opts.embed_item_marker);
    };
    auto results = post_chat_batch(escalate.size(), body_for, judge);
    for (std::size_t i = 0; i < escalate.size(); ++i) {
      SampleRecord& rec = records[escalate[i]];
      const WireResult& wr = results[i];
      rec.verifier = VerifierKind::kJudge;
      if (wr.error) {
        rec.judge_raw = "endpoint error: " + *wr.error;
        continue;  // stays UNPARSEABLE
      }
      rec.judge_raw = wr.text;
      std::string reply = to_lower(trim(wr.text));
      if (reply == "yes") {
        rec.verdict = Verdict::kCorrect;
      } else if (reply == "no") {
        rec.verdict = Verdict::kWrong;
      }
      // Any other reply leaves the record UNPARSEABLE.
    }
  }
  return records;
}

nlohmann::json sample_record_to_json(const SampleRecord& r) {
  nlohmann::json j;
  j["item_id"] = r.item_id;
  j["sample_index"] = r.sample_index;
  j["mode"] = mode_name(r.mode);
  j["raw_text"] = r.raw_text;
  if (r.parsed_letter) {
    j["parsed_letter"] = std::string(1, *r.parsed_letter);
  } else {
    j["parsed_letter"] = nullptr;
  }
  j["verdict"] = verdict_name(r.verdict);
  j["verifier"] = verifier_name(r.verifier);
  if (r.judge_raw) {
    j["judge_raw"] = *r.judge_raw;
  } else {
    j["judge_raw"] = nullptr;
  }
  return j;
}

SampleRecord sample_record_from_json(const nlohmann::json& j) {
  try {
    SampleRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    r.sample_index = j.at("sample_index").get<int>();
    r.mode = mode_from_name(j.at("mode").get<std::string>());
    r.raw_text = j.at("raw_text").get<std::string>();
    if (!j.at("parsed_letter").is_null()) {
      auto s = j.at("parsed_letter").get<std::string>();
      if (s.size() != 1) throw ValidationError("parsed_letter must be one character");
      r.parsed_letter = s[0];
    }
    r.verdict = verdict_from_name(j.at("verdict").get<std::string>());
    r.verifier = verifier_from_name(j.at("verifier").get<std::string>());
    if (!j.at("judge_raw").is_null()) r.judge_raw = j.at("judge_raw").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed sample record: ") + ex.what());
  }
}

std::vector<SampleRecord> read_sample_records(const std::string& path) {
  std::vector<SampleRecord> out;
  for_each_jsonl_line(path, [&](std::size_t lineno, const nlohmann::json& j) {
    try {
      out.push_back(sample_record_from_json(j));
    } catch (const ValidationError& ex) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  });
  return out;
}

void write_sample_records(const std::string& path, const std::vector<SampleRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  for (const auto& r : records) out << sample_record_to_json(r).dump() << "\n";
}

}  // namespace boundary
