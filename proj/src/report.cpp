#include "boundary/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "boundary/common.hpp"
#include "boundary/digest.hpp"

namespace boundary {

nlohmann::json run_metadata_to_json(const RunMetadata& m) {
  nlohmann::json j;
  j["command_line"] = m.command_line;
  j["config_snapshot"] = m.config_snapshot;
  j["tool_version"] = m.tool_version;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  j["endpoint_fingerprint"] = m.endpoint_fingerprint;
  j["seeds"] = m.seeds;
  j["sampling_plan"] = m.sampling_plan;
  j["estimator_choices"] = m.estimator_choices;
  j["input_digests"] = m.input_digests;
  return j;
}

RunMetadata run_metadata_from_json(const nlohmann::json& j) {
  try {
    RunMetadata m;
    m.command_line = j.at("command_line").get<std::string>();
    m.config_snapshot = j.at("config_snapshot");
    m.tool_version = j.at("tool_version").get<std::string>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    m.endpoint_fingerprint = j.at("endpoint_fingerprint").get<std::string>();
    m.seeds = j.at("seeds");
    m.sampling_plan = j.at("sampling_plan");
    m.estimator_choices = j.at("estimator_choices");
    m.input_digests = j.at("input_digests").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed run metadata: ") + ex.what());
  }
}

std::string run_metadata_digest(const RunMetadata& m) {
  // nlohmann objects iterate key-sorted, so dump() is canonical.
  return sha256_hex(run_metadata_to_json(m).dump());
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v * 100.0);
  return buf;
}

std::string num6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// Rounds every float in the tree to six decimals so payload emission is
// stable regardless of upstream arithmetic noise.
void round6(nlohmann::json& j) {
  if (j.is_number_float()) {
    double v = j.get<double>();
    j = std::round(v * 1e6) / 1e6;
  } else if (j.is_object() || j.is_array()) {
    for (auto& child : j) round6(child);
  }
}

void require_nonempty(const ReportInputs& in) {
  if (in.estimates.empty() && in.decisions.empty() && in.deltas.empty()) {
    throw ValidationError("report: no estimates, decisions, or deltas to report");
  }
}

std::string csv_report(const ReportInputs& in) {
  std::string out = "task_id,modality,k,pass_at_k\n";
  for (const auto& e : in.estimates) {
    for (const auto& [k, v] : e.S) {
      out += e.task_id + "," + e.modality + "," + std::to_string(k) + "," + num6(v) + "\n";
    }
  }
  return out;
}

std::string markdown_report(const ReportInputs& in, const nlohmann::json& payload) {
  std::map<std::string, std::vector<const SupportEstimate*>> by_modality;
  for (const auto& e : in.estimates) by_modality[e.modality].push_back(&e);
  std::map<std::string, std::string> verdict_of;
  for (const auto& d : in.decisions) verdict_of[d.task_id] = recipe_verdict_name(d.verdict);

  std::string md = "# Support Boundary Report\n\n";
  md += "Tool version " + std::string(kToolVersion) + ".\n";
  if (in.metadata) {
    md += "Run metadata digest: `" + run_metadata_digest(*in.metadata) + "`\n";
  }
  md += "\n";

  for (const auto& [modality, group] : by_modality) {
    std::set<int> ks;
    for (const auto* e : group) {
      for (const auto& [k, _] : e->S) ks.insert(k);
    }
    int g_k = ks.empty() ? 0 : *ks.rbegin();

    md += "## Modality: " + modality + "\n\n";
    md += "| Task | Items | Acc@1 |";
    for (int k : ks) md += " Pass@" + std::to_string(k) + " |";
    md += " G@" + std::to_string(g_k) + " | Verdict |\n";
    md += "| --- | --- | --- |";
    for (std::size_t i = 0; i < ks.size(); ++i) md += " --- |";
    md += " --- | --- |\n";
    for (const auto* e : group) {
      md += "| " + e->task_id + " | " + std::to_string(e->n_items) + " | ";
      md += e->A ? pct(*e->A) : std::string("-");
      md += " |";
      for (int k : ks) {
        auto it = e->S.find(k);
        md += " " + (it == e->S.end() ? std::string("-") : pct(it->second)) + " |";
      }
      auto git = e->G.find(g_k);
      md += " " + (git == e->G.end() ? std::string("-") : pct(git->second)) + " |";
      auto vit = verdict_of.find(e->task_id);
      md += " " + (vit == verdict_of.end() ? std::string("-") : vit->second) + " |\n";
    }
    md += "\n";
  }

  if (!in.deltas.empty()) {
    md += "## Before/after deltas\n\n";
    md += "| Train task | Eval task | Regime | dAcc@1 | dS@k_ref | Support |\n";
    md += "| --- | --- | --- | --- | --- | --- |\n";
    for (const auto& d : in.deltas) {
      md += "| " + d.train_task + " | " + d.eval_task + " | " + regime_name(d.regime) + " | " +
            pct(d.delta_a) + " | " + pct(d.delta_s_k) + " | " +
            (d.collapse_flag ? "collapse" : "stable") + " |\n";
    }
    md += "\n";
  }

  if (!in.decisions.empty()) {
    md += "## Decisions\n\n";
    for (const auto& d : in.decisions) {
      md += "- **" + d.task_id + "**: " + recipe_verdict_name(d.verdict) + ". " + d.rationale +
            "\n";
    }
    md += "\n";
  }

  md += "## Payload\n\n";
  md += "```json\n";
  md += payload.dump(2);
  md += "\n```\n";
  return md;
}

}  // namespace

nlohmann::json report_payload(const ReportInputs& inputs) {
  require_nonempty(inputs);
  nlohmann::json j;
  j["tool_version"] = kToolVersion;
  j["estimates"] = nlohmann::json::array();
  for (const auto& e : inputs.estimates) j["estimates"].push_back(support_estimate_to_json(e));
  j["decisions"] = nlohmann::json::array();
  for (const auto& d : inputs.decisions) j["decisions"].push_back(recipe_decision_to_json(d));
  j["deltas"] = nlohmann::json::array();
  for (const auto& d : inputs.deltas) j["deltas"].push_back(delta_report_to_json(d));
  if (inputs.metadata) {
    j["metadata_digest"] = run_metadata_digest(*inputs.metadata);
    j["metadata"] = run_metadata_to_json(*inputs.metadata);
  } else {
    j["metadata_digest"] = nullptr;
  }
  j["input_digests"] = inputs.input_digests;
  round6(j);
  return j;
}

std::string emit_report(const ReportInputs& inputs, ReportFormat format) {
  require_nonempty(inputs);
  auto payload = report_payload(inputs);
  switch (format) {
    case ReportFormat::kJson:
      return payload.dump(2) + "\n";
    case ReportFormat::kCsv:
      return csv_report(inputs);
    case ReportFormat::kMarkdown:
      return markdown_report(inputs, payload);
  }
  throw ValidationError("unknown report format");
}

nlohmann::json parse_markdown_payload(const std::string& markdown) {
  const std::string open = "```json\n";
  auto start = markdown.find(open);
  if (start == std::string::npos) {
    throw ValidationError("markdown report has no fenced JSON payload");
  }
  start += open.size();
  auto end = markdown.find("\n```", start);
  if (end == std::string::npos) {
    throw ValidationError("markdown report payload fence is unterminated");
  }
  try {
    return nlohmann::json::parse(markdown.substr(start, end - start));
  } catch (const nlohmann::json::parse_error& ex) {
    throw ValidationError(std::string("markdown report payload is not valid JSON: ") + ex.what());
  }
}

}  // namespace boundary
