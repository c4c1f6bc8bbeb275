#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "boundary/verification.hpp"

namespace boundary {

// Unbiased Pass@K estimator 1 - C(n-c, k)/C(n, k), evaluated in the
// numerically stable product form.
double pass_at_k(int n, int c, int k);

struct ItemOutcome {
  std::string item_id;
  int n = 0;  // sampled draws
  int c = 0;  // sampled draws verified CORRECT
  std::optional<bool> greedy_correct;
};

struct ConfidenceInterval {
  double lo = 0.0;
  double hi = 0.0;
};

struct SupportEstimate {
  std::string task_id;
  std::string modality = "none";
  std::optional<double> A;             // Acc@1
  std::map<int, double> S;             // K -> Pass@K
  std::map<int, double> G;             // K -> S[K] - A
  int n_items = 0;
  int k_max = 0;
  std::map<std::string, ConfidenceInterval> ci;  // "A", "S@16", "G@16", ...
  double unparseable_rate = 0.0;
  double error_rate = 0.0;

  // Provenance extras.
  std::string a_definition = "greedy";  // or "pass@1-fallback", "absent"
  std::uint64_t bootstrap_seed = 0;
  int bootstrap_resamples = 0;
  std::string run_digest;               // RunMetadata reference, may be empty
  std::vector<ItemOutcome> items;       // per-item outcomes for re-pooling
};

struct EstimateOptions {
  std::vector<int> ks = {1, 2, 4, 8, 16};
  int bootstrap_resamples = 1000;
  std::uint64_t bootstrap_seed = 0;
  // strict: all sampled items must share one n. lenient: per-item n, still
  // requiring n >= max(ks) everywhere.
  bool strict_equal_n = true;
  // When no greedy records exist, report A as Pass@1 and label it.
  bool allow_pass1_fallback = true;
};

std::vector<ItemOutcome> collect_outcomes(const std::vector<SampleRecord>& records);

SupportEstimate estimate_support(const std::string& task_id,
                                 const std::vector<SampleRecord>& records,
                                 const EstimateOptions& opts);

// Same estimator over pre-aggregated outcomes (used for pooling).
SupportEstimate estimate_from_outcomes(const std::string& task_id,
                                       std::vector<ItemOutcome> outcomes,
                                       const EstimateOptions& opts, double unparseable_rate = 0.0,
                                       double error_rate = 0.0);

// Pools estimates item-weighted per group and re-bootstraps CIs over the
// pooled item set. Estimates lacking per-item outcomes pool weighted means
// only (no CIs).
std::map<std::string, SupportEstimate> aggregate_by_group(
    const std::vector<SupportEstimate>& estimates,
    const std::map<std::string, std::string>& grouping, const EstimateOptions& opts);

nlohmann::json support_estimate_to_json(const SupportEstimate& e);
SupportEstimate support_estimate_from_json(const nlohmann::json& j);
SupportEstimate read_support_estimate(const std::string& path);
void write_support_estimate(const std::string& path, const SupportEstimate& e);

}  // namespace boundary
