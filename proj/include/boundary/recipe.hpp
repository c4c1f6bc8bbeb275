#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "boundary/stats.hpp"

namespace boundary {

struct RecipeConfig {
  double tau = 0.0;           // target reliability threshold, in (0, 1]
  int k_ref = 16;             // the K whose S_K is compared against tau
  double collapse_margin = 0.02;

  void validate() const;
};

enum class RecipeVerdict { kBridge, kSharpen };

std::string recipe_verdict_name(RecipeVerdict v);

struct RecipeDecision {
  std::string task_id;
  RecipeVerdict verdict = RecipeVerdict::kBridge;
  double s_k = 0.0;
  double a = 0.0;
  double g_k = 0.0;
  std::string rationale;
  RecipeConfig config;
};

// BRIDGE iff S[k_ref] < tau; the boundary S[k_ref] == tau sharpens.
RecipeDecision decide(const SupportEstimate& estimate, const RecipeConfig& config);

enum class Regime { kInDomain, kWithinModality, kCrossModality };

std::string regime_name(Regime r);

// Modality lookup per task_id. Missing entries are an error.
Regime classify_regime(const std::string& train_task, const std::string& eval_task,
                       const std::map<std::string, std::string>& modality_of);

struct DeltaReport {
  std::string train_task;
  std::string eval_task;
  Regime regime = Regime::kInDomain;
  double delta_a = 0.0;
  double delta_s_k = 0.0;
  bool collapse_flag = false;
  RecipeConfig config;
  nlohmann::json before_ref;  // task_id, A, S[k_ref], source digest if known
  nlohmann::json after_ref;
};

DeltaReport compare_runs(const SupportEstimate& before, const SupportEstimate& after,
                         const std::string& train_task, const RecipeConfig& config,
                         const std::map<std::string, std::string>& modality_of);

nlohmann::json recipe_decision_to_json(const RecipeDecision& d);
RecipeDecision recipe_decision_from_json(const nlohmann::json& j);
nlohmann::json delta_report_to_json(const DeltaReport& d);
DeltaReport delta_report_from_json(const nlohmann::json& j);

}  // namespace boundary
