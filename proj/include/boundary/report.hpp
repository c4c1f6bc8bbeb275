#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boundary/recipe.hpp"
#include "boundary/stats.hpp"

namespace boundary {

// Provenance sidecar written next to run outputs; reports reference one
// RunMetadata by the digest of its canonical JSON form.
struct RunMetadata {
  std::string command_line;
  nlohmann::json config_snapshot = nlohmann::json::object();
  std::string tool_version;
  std::string started_at;
  std::string finished_at;
  std::string endpoint_fingerprint;  // base_url + " " + model_name
  nlohmann::json seeds = nlohmann::json::object();
  nlohmann::json sampling_plan = nlohmann::json::object();
  nlohmann::json estimator_choices = nlohmann::json::object();
  std::map<std::string, std::string> input_digests;  // path -> sha256
};

nlohmann::json run_metadata_to_json(const RunMetadata& m);
RunMetadata run_metadata_from_json(const nlohmann::json& j);
std::string run_metadata_digest(const RunMetadata& m);

struct ReportInputs {
  std::vector<SupportEstimate> estimates;
  std::vector<RecipeDecision> decisions;
  std::vector<DeltaReport> deltas;
  std::optional<RunMetadata> metadata;
  std::map<std::string, std::string> input_digests;  // report's own inputs
};

enum class ReportFormat { kJson, kMarkdown, kCsv };

// Markdown: modality-grouped tables (Task | Acc@1 | Pass@K... | G_K |
// Verdict, percent with two decimals) plus a full-precision JSON payload
// appendix. JSON mirrors the same tree. CSV emits the Pass@K-vs-K series.
// All three are pure functions of their inputs: re-rendering unchanged
// inputs is byte-identical.
std::string emit_report(const ReportInputs& inputs, ReportFormat format);

nlohmann::json report_payload(const ReportInputs& inputs);

// Parses the fenced JSON payload back out of a Markdown report.
nlohmann::json parse_markdown_payload(const std::string& markdown);

}  // namespace boundary
