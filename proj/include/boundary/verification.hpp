#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "boundary/common.hpp"
#include "boundary/inference.hpp"
#include "boundary/manifest.hpp"

namespace boundary {

enum class Verdict { kCorrect, kWrong, kUnparseable, kEndpointError };
enum class VerifierKind { kRule, kJudge };

std::string verdict_name(Verdict v);
Verdict verdict_from_name(const std::string& name);
std::string verifier_name(VerifierKind v);
VerifierKind verifier_from_name(const std::string& name);

struct SampleRecord {
  std::string item_id;
  int sample_index = 0;
  Mode mode = Mode::kGreedy;
  std::string raw_text;
  std::optional<char> parsed_letter;
  Verdict verdict = Verdict::kUnparseable;
  VerifierKind verifier = VerifierKind::kRule;
  std::optional<std::string> judge_raw;
};

nlohmann::json sample_record_to_json(const SampleRecord& r);
SampleRecord sample_record_from_json(const nlohmann::json& j);
std::vector<SampleRecord> read_sample_records(const std::string& path);
void write_sample_records(const std::string& path, const std::vector<SampleRecord>& records);

// Extracts the committed option letter from a response. Takes the LAST
// <answer>...</answer> span (tags case-insensitive, whitespace tolerated
// inside the brackets); within the span accepts a leading letter on its own
// or followed by punctuation / the option text. Total: never throws.
std::optional<char> parse_answer(std::string_view text);

enum class VerifyPolicy { kRuleOnly, kRuleThenJudge };

struct VerifyOptions {
  VerifyPolicy policy = VerifyPolicy::kRuleOnly;
  std::optional<EndpointConfig> judge;
  bool embed_item_marker = true;
};

// The YES/NO grading prompt sent to the judge for unparseable responses.
std::string judge_prompt(const McqItem& item, const std::string& raw_response,
                         bool embed_item_marker);

// Rule-checks every response against its item's correct letter; under
// RULE_THEN_JUDGE, unparseable responses are escalated to the judge endpoint.
// A successful rule parse is never overridden by the judge.
std::vector<SampleRecord> verify(const std::vector<RawResponse>& responses,
                                 const std::map<std::string, McqItem>& items,
                                 const VerifyOptions& opts);

}  // namespace boundary
