#include "boundary/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include "boundary/common.hpp"
#include "boundary/jsonl.hpp"

namespace boundary {

double pass_at_k(int n, int c, int k) {
  if (n < 1) throw ValidationError("pass_at_k: n must be >= 1, got " + std::to_string(n));
  if (c < 0 || c > n) {
    throw ValidationError("pass_at_k: c must be in [0, n], got c=" + std::to_string(c) +
                          " n=" + std::to_string(n));
  }
  if (k < 1 || k > n) {
    throw ValidationError("pass_at_k: k must be in [1, n], got k=" + std::to_string(k) +
                          " n=" + std::to_string(n));
  }
  if (c == 0) return 0.0;
  if (n - c < k) return 1.0;  // every k-subset hits a correct sample
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) {
    miss *= 1.0 - static_cast<double>(k) / static_cast<double>(i);
  }
  return 1.0 - miss;
}

std::vector<ItemOutcome> collect_outcomes(const std::vector<SampleRecord>& records) {
  std::map<std::string, ItemOutcome> by_item;
  for (const auto& r : records) {
    auto& o = by_item[r.item_id];
    o.item_id = r.item_id;
    bool correct = r.verdict == Verdict::kCorrect;
    if (r.mode == Mode::kGreedy) {
      o.greedy_correct = correct;
    } else {
      ++o.n;
      if (correct) ++o.c;
    }
  }
  std::vector<ItemOutcome> out;
  out.reserve(by_item.size());
  for (auto& [_, o] : by_item) out.push_back(std::move(o));
  return out;  // map order: sorted by item_id
}

namespace {

struct Percentile {
  double lo = 0.0;
  double hi = 0.0;
};

Percentile percentile_95(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    double pos = q * static_cast<double>(values.size() - 1);
    std::size_t lo_idx = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi_idx = static_cast<std::size_t>(std::ceil(pos));
    double frac = pos - static_cast<double>(lo_idx);
    return values[lo_idx] * (1.0 - frac) + values[hi_idx] * frac;
  };
  return {at(0.025), at(0.975)};
}

struct PointStats {
  std::optional<double> a;
  std::map<int, double> s;
  double s1 = 0.0;  // mean Pass@1, for the fallback A
};

PointStats point_stats(const std::vector<ItemOutcome>& outcomes,
                       const std::vector<std::size_t>& idx, const std::vector<int>& ks) {
  PointStats st;
  double a_sum = 0.0;
  int a_n = 0;
  for (int k : ks) st.s[k] = 0.0;
  for (auto i : idx) {
    const auto& o = outcomes[i];
    if (o.greedy_correct) {
      a_sum += *o.greedy_correct ? 1.0 : 0.0;
      ++a_n;
    }
    for (int k : ks) st.s[k] += pass_at_k(o.n, o.c, k);
    st.s1 += pass_at_k(o.n, o.c, 1);
  }
  for (int k : ks) st.s[k] /= static_cast<double>(idx.size());
  st.s1 /= static_cast<double>(idx.size());
  if (a_n > 0) st.a = a_sum / static_cast<double>(a_n);
  return st;
}

}  // namespace

SupportEstimate estimate_from_outcomes(const std::string& task_id,
                                       std::vector<ItemOutcome> outcomes,
                                       const EstimateOptions& opts, double unparseable_rate,
                                       double error_rate) {
  if (outcomes.empty()) throw ValidationError("estimate: no records to estimate from");
  if (opts.ks.empty()) throw ValidationError("estimate: empty K list");

  std::sort(outcomes.begin(), outcomes.end(),
            [](const ItemOutcome& a, const ItemOutcome& b) { return a.item_id < b.item_id; });

  int min_n = outcomes.front().n;
  int max_n = outcomes.front().n;
  for (const auto& o : outcomes) {
    min_n = std::min(min_n, o.n);
    max_n = std::max(max_n, o.n);
  }
  if (min_n < 1) {
    throw ValidationError("estimate: item \"" +
                          std::min_element(outcomes.begin(), outcomes.end(),
                                           [](const ItemOutcome& a, const ItemOutcome& b) {
                                             return a.n < b.n;
                                           })
                              ->item_id +
                          "\" has no sampled records");
  }
  if (opts.strict_equal_n && min_n != max_n) {
    throw ValidationError("estimate: sample counts differ across items (" +
                          std::to_string(min_n) + " vs " + std::to_string(max_n) +
                          "); rerun or pass strict_equal_n=false");
  }

  std::vector<int> ks = opts.ks;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() < 1) throw ValidationError("estimate: K must be >= 1");
  if (ks.back() > min_n) {
    throw ValidationError("estimate: K=" + std::to_string(ks.back()) +
                          " exceeds the smallest per-item sample count " +
                          std::to_string(min_n));
  }

  SupportEstimate est;
  est.task_id = task_id;
  est.n_items = static_cast<int>(outcomes.size());
  est.k_max = min_n;
  est.unparseable_rate = unparseable_rate;
  est.error_rate = error_rate;
  est.bootstrap_seed = opts.bootstrap_seed;
  est.bootstrap_resamples = opts.bootstrap_resamples;

  std::vector<std::size_t> all(outcomes.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto point = point_stats(outcomes, all, ks);
  est.S = point.s;

  if (point.a) {
    est.A = point.a;
    est.a_definition = "greedy";
  } else if (opts.allow_pass1_fallback) {
    est.A = point.s1;
    est.a_definition = "pass@1-fallback";
  } else {
    est.a_definition = "absent";
  }
  if (est.A) {
    for (int k : ks) est.G[k] = est.S.at(k) - *est.A;
  }

  if (opts.bootstrap_resamples > 0) {
    std::map<std::string, std::vector<double>> samples;
    std::uint64_t state = mix_seed(opts.bootstrap_seed, fnv1a64(task_id));
    auto next = [&state] { return state = splitmix64(state); };
    std::vector<std::size_t> idx(outcomes.size());
    for (int b = 0; b < opts.bootstrap_resamples; ++b) {
      for (auto& i : idx) i = static_cast<std::size_t>(next() % outcomes.size());
      auto st = point_stats(outcomes, idx, ks);
      std::optional<double> a = st.a;
      if (!a && est.a_definition == "pass@1-fallback") a = st.s1;
      if (a) samples["A"].push_back(*a);
      for (int k : ks) {
        samples["S@" + std::to_string(k)].push_back(st.s.at(k));
        if (a) samples["G@" + std::to_string(k)].push_back(st.s.at(k) - *a);
      }
    }
    for (auto& [name, values] : samples) {
      if (values.empty()) continue;
      auto p = percentile_95(values);
      est.ci[name] = {p.lo, p.hi};
    }
  }

  est.items = std::move(outcomes);
  return est;
}

SupportEstimate estimate_support(const std::string& task_id,
                                 const std::vector<SampleRecord>& records,
                                 const EstimateOptions& opts) {
  if (records.empty()) throw ValidationError("estimate: no records");
  double unparseable = 0.0;
  double errors = 0.0;
  for (const auto& r : records) {
    if (r.verdict == Verdict::kUnparseable) unparseable += 1.0;
    if (r.verdict == Verdict::kEndpointError) errors += 1.0;
  }
  auto outcomes = collect_outcomes(records);
  return estimate_from_outcomes(task_id, std::move(outcomes), opts,
                                unparseable / static_cast<double>(records.size()),
                                errors / static_cast<double>(records.size()));
}

std::map<std::string, SupportEstimate> aggregate_by_group(
    const std::vector<SupportEstimate>& estimates,
    const std::map<std::string, std::string>& grouping, const EstimateOptions& opts) {
  std::map<std::string, const SupportEstimate*> by_task;
  for (const auto& e : estimates) by_task[e.task_id] = &e;
  for (const auto& [task, group] : grouping) {
    if (!by_task.count(task)) {
      throw ValidationError("aggregate: grouping names unknown task \"" + task + "\"");
    }
  }

  std::map<std::string, std::vector<const SupportEstimate*>> groups;
  for (const auto& e : estimates) {
    auto it = grouping.find(e.task_id);
    if (it == grouping.end()) {
      throw ValidationError("aggregate: no group assigned to task \"" + e.task_id + "\"");
    }
    groups[it->second].push_back(&e);
  }

  std::map<std::string, SupportEstimate> out;
  for (const auto& [group, members] : groups) {
    bool have_outcomes = true;
    for (const auto* e : members) have_outcomes = have_outcomes && !e->items.empty();

    double unparse = 0.0;
    double err = 0.0;
    int total_items = 0;
    for (const auto* e : members) {
      unparse += e->unparseable_rate * e->n_items;
      err += e->error_rate * e->n_items;
      total_items += e->n_items;
    }
    if (total_items == 0) throw ValidationError("aggregate: group \"" + group + "\" is empty");

    if (have_outcomes) {
      std::vector<ItemOutcome> pooled;
      for (const auto* e : members) {
        for (auto o : e->items) {
          o.item_id = e->task_id + "/" + o.item_id;  // avoid cross-task collisions
          pooled.push_back(std::move(o));
        }
      }
      auto pooled_est = estimate_from_outcomes(group, std::move(pooled), opts,
                                               unparse / total_items, err / total_items);
      pooled_est.modality = group;
      out.emplace(group, std::move(pooled_est));
      continue;
    }

    // weighted means only; without per-item outcomes there is nothing to
    // resample, so no CIs
    SupportEstimate pooled;
    pooled.task_id = group;
    pooled.modality = group;
    pooled.n_items = total_items;
    pooled.k_max = members.front()->k_max;
    pooled.unparseable_rate = unparse / total_items;
    pooled.error_rate = err / total_items;
    pooled.bootstrap_seed = opts.bootstrap_seed;
    double a_sum = 0.0;
    int a_items = 0;
    std::set<std::string> definitions;
    for (const auto* e : members) {
      pooled.k_max = std::min(pooled.k_max, e->k_max);
      definitions.insert(e->a_definition);
      if (e->A) {
        a_sum += *e->A * e->n_items;
        a_items += e->n_items;
      }
      for (const auto& [k, s] : e->S) pooled.S[k] += s * e->n_items;
    }
    for (auto& [k, s] : pooled.S) s /= total_items;
    if (a_items == total_items) {
      pooled.A = a_sum / total_items;
      for (const auto& [k, s] : pooled.S) pooled.G[k] = s - *pooled.A;
    }
    pooled.a_definition = definitions.size() == 1 ? *definitions.begin() : "mixed";
    out.emplace(group, std::move(pooled));
  }
  return out;
}

namespace {

using nlohmann::json;

json ci_json(const std::map<std::string, ConfidenceInterval>& ci) {
  json j = json::object();
  for (const auto& [name, interval] : ci) {
    j[name] = {{"lo", interval.lo}, {"hi", interval.hi}};
  }
  return j;
}

}  // namespace

json support_estimate_to_json(const SupportEstimate& e) {
  json j;
  j["task_id"] = e.task_id;
  j["modality"] = e.modality;
  if (e.A) {
    j["A"] = *e.A;
  } else {
    j["A"] = nullptr;
  }
  json s = json::object();
  for (const auto& [k, v] : e.S) s[std::to_string(k)] = v;
  j["S"] = std::move(s);
  json g = json::object();
  for (const auto& [k, v] : e.G) g[std::to_string(k)] = v;
  j["G"] = std::move(g);
  j["n_items"] = e.n_items;
  j["k_max"] = e.k_max;
  j["ci"] = ci_json(e.ci);
  j["unparseable_rate"] = e.unparseable_rate;
  j["error_rate"] = e.error_rate;
  j["a_definition"] = e.a_definition;
  j["bootstrap_seed"] = e.bootstrap_seed;
  j["bootstrap_resamples"] = e.bootstrap_resamples;
  j["run_digest"] = e.run_digest;
  json items = json::array();
  for (const auto& o : e.items) {
    json oj;
    oj["item_id"] = o.item_id;
    oj["n"] = o.n;
    oj["c"] = o.c;
    if (o.greedy_correct) {
      oj["greedy_correct"] = *o.greedy_correct;
    } else {
      oj["greedy_correct"] = nullptr;
    }
    items.push_back(std::move(oj));
  }
  j["items"] = std::move(items);
  return j;
}

SupportEstimate support_estimate_from_json(const json& j) {
  try {
    SupportEstimate e;
    e.task_id = j.at("task_id").get<std::string>();
    e.modality = j.at("modality").get<std::string>();
    if (!j.at("A").is_null()) e.A = j.at("A").get<double>();
    for (const auto& [k, v] : j.at("S").items()) e.S[std::stoi(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("G").items()) e.G[std::stoi(k)] = v.get<double>();
    e.n_items = j.at("n_items").get<int>();
    e.k_max = j.at("k_max").get<int>();
    for (const auto& [name, interval] : j.at("ci").items()) {
      e.ci[name] = {interval.at("lo").get<double>(), interval.at("hi").get<double>()};
    }
    e.unparseable_rate = j.at("unparseable_rate").get<double>();
    e.error_rate = j.at("error_rate").get<double>();
    e.a_definition = j.at("a_definition").get<std::string>();
    e.bootstrap_seed = j.at("bootstrap_seed").get<std::uint64_t>();
    e.bootstrap_resamples = j.at("bootstrap_resamples").get<int>();
    e.run_digest = j.at("run_digest").get<std::string>();
    for (const auto& oj : j.at("items")) {
      ItemOutcome o;
      o.item_id = oj.at("item_id").get<std::string>();
      o.n = oj.at("n").get<int>();
      o.c = oj.at("c").get<int>();
      if (!oj.at("greedy_correct").is_null()) o.greedy_correct = oj.at("greedy_correct").get<bool>();
      e.items.push_back(std::move(o));
    }
    return e;
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed support estimate: ") + ex.what());
  }
}

SupportEstimate read_support_estimate(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file_bytes(path));
  } catch (const json::parse_error& ex) {
    throw ValidationError(path + ": " + ex.what());
  }
  return support_estimate_from_json(j);
}

void write_support_estimate(const std::string& path, const SupportEstimate& e) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out << support_estimate_to_json(e).dump(2) << "\n";
}

}  // namespace boundary
