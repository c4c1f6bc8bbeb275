#include "boundary/recipe.hpp"

#include <cstdio>

#include "boundary/common.hpp"

namespace boundary {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

double require_s_at(const SupportEstimate& e, int k_ref) {
  auto it = e.S.find(k_ref);
  if (it == e.S.end()) {
    throw ValidationError("estimate for \"" + e.task_id + "\" has no S@" + std::to_string(k_ref) +
                          "; re-estimate with K including the reference");
  }
  return it->second;
}

double require_a(const SupportEstimate& e) {
  if (!e.A) {
    throw ValidationError("estimate for \"" + e.task_id + "\" has no Acc@1");
  }
  return *e.A;
}

nlohmann::json estimate_ref(const SupportEstimate& e, int k_ref) {
  return nlohmann::json{{"task_id", e.task_id},
                        {"A", *e.A},
                        {"S@" + std::to_string(k_ref), e.S.at(k_ref)},
                        {"n_items", e.n_items},
                        {"run_digest", e.run_digest}};
}

RecipeConfig config_from_json(const nlohmann::json& j) {
  RecipeConfig cfg;
  cfg.tau = j.at("tau").get<double>();
  cfg.k_ref = j.at("k_ref").get<int>();
  cfg.collapse_margin = j.at("collapse_margin").get<double>();
  return cfg;
}

nlohmann::json config_to_json(const RecipeConfig& cfg) {
  return nlohmann::json{
      {"tau", cfg.tau}, {"k_ref", cfg.k_ref}, {"collapse_margin", cfg.collapse_margin}};
}

}  // namespace

void RecipeConfig::validate() const {
  if (tau <= 0.0 || tau > 1.0) {
    throw ValidationError("recipe: tau must be in (0, 1], got " + num(tau));
  }
  if (k_ref < 1) throw ValidationError("recipe: k_ref must be >= 1");
  if (collapse_margin < 0.0) throw ValidationError("recipe: collapse_margin must be >= 0");
}

std::string recipe_verdict_name(RecipeVerdict v) {
  return v == RecipeVerdict::kBridge ? "BRIDGE" : "SHARPEN";
}

RecipeDecision decide(const SupportEstimate& estimate, const RecipeConfig& config) {
  config.validate();
  RecipeDecision d;
  d.task_id = estimate.task_id;
  d.config = config;
  d.s_k = require_s_at(estimate, config.k_ref);
  d.a = require_a(estimate);
  d.g_k = d.s_k - d.a;

  std::string sk_name = "S@" + std::to_string(config.k_ref);
  if (d.s_k < config.tau) {
    d.verdict = RecipeVerdict::kBridge;
    d.rationale = sk_name + " = " + num(d.s_k) + " < tau = " + num(config.tau) +
                  ": the sampling budget cannot reach the target reliability, so add " +
                  "supports (BRIDGE) before tuning selection.";
  } else {
    d.verdict = RecipeVerdict::kSharpen;
    d.rationale = sk_name + " = " + num(d.s_k) + " >= tau = " + num(config.tau) +
                  ": support exists within the budget; tighten selection (SHARPEN). " +
                  "Gap to close: " + num(d.g_k) + ".";
  }
  return d;
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::kInDomain: return "IN_DOMAIN";
    case Regime::kWithinModality: return "WITHIN_MODALITY";
    case Regime::kCrossModality: return "CROSS_MODALITY";
  }
  throw ValidationError("unknown regime");
}

namespace {

Regime regime_from_name(const std::string& name) {
  if (name == "IN_DOMAIN") return Regime::kInDomain;
  if (name == "WITHIN_MODALITY") return Regime::kWithinModality;
  if (name == "CROSS_MODALITY") return Regime::kCrossModality;
  throw ValidationError("unknown regime \"" + name + "\"");
}

}  // namespace

Regime classify_regime(const std::string& train_task, const std::string& eval_task,
                       const std::map<std::string, std::string>& modality_of) {
  if (train_task == eval_task) return Regime::kInDomain;
  auto train_it = modality_of.find(train_task);
  if (train_it == modality_of.end()) {
    throw ValidationError("no modality recorded for train task \"" + train_task + "\"");
  }
  auto eval_it = modality_of.find(eval_task);
  if (eval_it == modality_of.end()) {
    throw ValidationError("no modality recorded for eval task \"" + eval_task + "\"");
  }
  return train_it->second == eval_it->second ? Regime::kWithinModality : Regime::kCrossModality;
}

DeltaReport compare_runs(const SupportEstimate& before, const SupportEstimate& after,
                         const std::string& train_task, const RecipeConfig& config,
                         const std::map<std::string, std::string>& modality_of) {
  config.validate();
  if (before.task_id != after.task_id) {
    throw ValidationError("compare: before is \"" + before.task_id + "\" but after is \"" +
                          after.task_id + "\"; deltas need the same eval task on both sides");
  }
  DeltaReport rep;
  rep.train_task = train_task;
  rep.eval_task = before.task_id;
  rep.regime = classify_regime(train_task, rep.eval_task, modality_of);
  rep.config = config;

  double a_before = require_a(before);
  double a_after = require_a(after);
  double s_before = require_s_at(before, config.k_ref);
  double s_after = require_s_at(after, config.k_ref);
  rep.delta_a = a_after - a_before;
  rep.delta_s_k = s_after - s_before;
  // Boundary is inclusive: a drop of exactly the margin must not flag, even
  // when subtraction rounds it a few ulp past the threshold.
  constexpr double kBoundarySlack = 1e-9;
  rep.collapse_flag = rep.delta_s_k < -(config.collapse_margin + kBoundarySlack);
  rep.before_ref = estimate_ref(before, config.k_ref);
  rep.after_ref = estimate_ref(after, config.k_ref);
  return rep;
}

nlohmann::json recipe_decision_to_json(const RecipeDecision& d) {
  return nlohmann::json{{"task_id", d.task_id},
                        {"verdict", recipe_verdict_name(d.verdict)},
                        {"s_k", d.s_k},
                        {"a", d.a},
                        {"g_k", d.g_k},
                        {"rationale", d.rationale},
                        {"config", config_to_json(d.config)}};
}

RecipeDecision recipe_decision_from_json(const nlohmann::json& j) {
  try {
    RecipeDecision d;
    d.task_id = j.at("task_id").get<std::string>();
    std::string verdict = j.at("verdict").get<std::string>();
    if (verdict == "BRIDGE") {
      d.verdict = RecipeVerdict::kBridge;
    } else if (verdict == "SHARPEN") {
      d.verdict = RecipeVerdict::kSharpen;
    } else {
      throw ValidationError("unknown verdict \"" + verdict + "\"");
    }
    d.s_k = j.at("s_k").get<double>();
    d.a = j.at("a").get<double>();
    d.g_k = j.at("g_k").get<double>();
    d.rationale = j.at("rationale").get<std::string>();
    d.config = config_from_json(j.at("config"));
    return d;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed recipe decision: ") + ex.what());
  }
}

nlohmann::json delta_report_to_json(const DeltaReport& d) {
  return nlohmann::json{{"train_task", d.train_task},
                        {"eval_task", d.eval_task},
                        {"regime", regime_name(d.regime)},
                        {"delta_a", d.delta_a},
                        {"delta_s_k", d.delta_s_k},
                        {"collapse_flag", d.collapse_flag},
                        {"config", config_to_json(d.config)},
                        {"before_ref", d.before_ref},
                        {"after_ref", d.after_ref}};
}

DeltaReport delta_report_from_json(const nlohmann::json& j) {
  try {
    DeltaReport d;
    d.train_task = j.at("train_task").get<std::string>();
    d.eval_task = j.at("eval_task").get<std::string>();
    d.regime = regime_from_name(j.at("regime").get<std::string>());
    d.delta_a = j.at("delta_a").get<double>();
    d.delta_s_k = j.at("delta_s_k").get<double>();
    d.collapse_flag = j.at("collapse_flag").get<bool>();
    d.config = config_from_json(j.at("config"));
    d.before_ref = j.at("before_ref");
    d.after_ref = j.at("after_ref");
    return d;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed delta report: ") + ex.what());
  }
}

}  // namespace boundary
