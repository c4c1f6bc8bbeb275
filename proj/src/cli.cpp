#include "boundary/cli.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "boundary/common.hpp"
#include "boundary/digest.hpp"
#include "boundary/inference.hpp"
#include "boundary/manifest.hpp"
#include "boundary/mock_server.hpp"
#include "boundary/probe.hpp"
#include "boundary/recipe.hpp"
#include "boundary/report.hpp"
#include "boundary/stats.hpp"
#include "boundary/verification.hpp"

namespace boundary::cli {

namespace {

std::vector<int> parse_ks(const std::string& spec) {
  std::vector<int> ks;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) continue;
    try {
      std::size_t used = 0;
      int k = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw ValidationError("--ks: \"" + part + "\" is not an integer");
    }
  }
  if (ks.empty()) throw ValidationError("--ks: empty K list");
  return ks;
}

std::map<std::string, std::string> parse_pairs(const std::vector<std::string>& entries,
                                               const std::string& flag) {
  std::map<std::string, std::string> out;
  for (const auto& e : entries) {
    auto eq = e.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == e.size()) {
      throw ValidationError(flag + ": expected key=value, got \"" + e + "\"");
    }
    out[e.substr(0, eq)] = e.substr(eq + 1);
  }
  return out;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot write " + path);
  f << content;
}

// CLI11 only reads a config file registered on the root app, so per-subcommand
// key=value files are merged here instead: each key becomes the matching flag,
// appended only when the command line did not already set it.
void merge_config_into_args(const CLI::App& app, std::vector<std::string>& args) {
  if (args.empty() || args[0].empty() || args[0][0] == '-') return;
  const auto* sub = app.get_subcommand_no_throw(args[0]);
  if (sub == nullptr) return;

  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return;

  std::ifstream in(config_path);
  if (!in) throw ValidationError("config: cannot open " + config_path);
  auto has_flag = [&](const std::string& flag) {
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto where = [&] { return config_path + ":" + std::to_string(lineno); };
    std::string s = trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';' || s[0] == '[') continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ValidationError("config: " + where() + ": expected key=value");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (key.empty()) throw ValidationError("config: " + where() + ": empty key");

    std::string flag = "--" + key;
    const auto* opt = sub->get_option_no_throw(flag);
    if (opt == nullptr) {
      throw ValidationError("config: " + where() + ": unknown key \"" + key + "\"");
    }
    if (has_flag(flag)) continue;  // command line wins
    if (opt->get_expected_max() == 0) {
      std::string v = to_lower(value);
      if (v == "true" || v == "1" || v == "yes" || v == "on") {
        args.push_back(flag);
      } else if (v != "false" && v != "0" && v != "no" && v != "off") {
        throw ValidationError("config: " + where() + ": \"" + key + "\" expects a boolean");
      }
    } else {
      args.push_back(flag);
      args.push_back(value);
    }
  }
}

void emit_json(const nlohmann::json& j, const std::string& out_path, std::ostream& out) {
  if (out_path.empty()) {
    out << j.dump(2) << "\n";
  } else {
    write_text(out_path, j.dump(2) + "\n");
  }
}

// Shared endpoint flag block; used by every networked subcommand.
struct EndpointFlags {
  EndpointConfig ep;

  void attach(CLI::App* sub, bool required = true) {
    auto* url = sub->add_option("--base-url", ep.base_url, "endpoint root, scheme://host[:port]");
    auto* model = sub->add_option("--model", ep.model_name, "model name sent per request");
    if (required) {
      url->required();
      model->required();
    }
    std::string key_desc = "bearer token (also read from $BOUNDARY_API_KEY)";
    sub->add_option_function<std::string>(
           "--api-key", [this](const std::string& v) { ep.api_key = v; }, key_desc)
        ->envname("BOUNDARY_API_KEY");
    sub->add_option("--timeout-s", ep.timeout_s, "per-request timeout, seconds");
    sub->add_option("--max-retries", ep.max_retries, "retries after the first attempt");
    sub->add_option("--max-concurrency", ep.max_concurrency, "parallel in-flight requests");
    sub->add_option("--max-tokens", ep.max_tokens, "completion token budget");
    sub->add_option("--retry-base-ms", ep.retry_base_ms, "backoff base, doubled per retry");
  }
};

nlohmann::json probe_result_json(const ProbeResult& r) {
  nlohmann::json j;
  j["train_accuracy"] = r.train_accuracy;
  j["test_accuracy"] = r.test_accuracy;
  j["lambda"] = r.lambda;
  j["iterations"] = r.iterations;
  j["final_gradient_norm"] = r.final_gradient_norm;
  j["seed"] = r.seed;
  j["loss_history"] = r.loss_history;
  j["warnings"] = r.warnings;
  return j;
}

std::string join_argv(const std::vector<std::string>& argv) {
  std::string s = "boundary";
  for (const auto& a : argv) s += " " + a;
  return s;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"support-boundary measurement for multiple-choice visual QA"};
  app.require_subcommand(1);
  int exit_code = kExitOk;

  // ---- convert ----
  struct {
    std::string manifest, out_path;
    std::string question = kDefaultQuestion;
    bool shuffle = false;
    bool check_images = false;
    std::uint64_t seed = 0;
  } cv;
  auto* convert = app.add_subcommand("convert", "dataset manifest to MCQ items");
  convert->add_option("--config", "key=value config file; command line overrides");
  convert->add_option("--manifest", cv.manifest, "dataset manifest (header + JSONL rows)")
      ->required();
  convert->add_option("--out", cv.out_path, "MCQ items JSONL to write")->required();
  convert->add_option("--question", cv.question, "question text for every item");
  convert->add_flag("--shuffle-options", cv.shuffle, "permute option order per item");
  convert->add_option("--seed", cv.seed, "option shuffle seed");
  convert->add_flag("--check-images", cv.check_images, "require every image file to exist");
  convert->callback([&] {
    auto manifest = load_manifest(cv.manifest, {cv.check_images});
    ConvertOptions opts;
    opts.option_shuffle = cv.shuffle;
    opts.seed = cv.seed;
    opts.question = cv.question;
    auto items = convert_to_mcq(manifest, opts);
    write_mcq_items(cv.out_path, items);
    out << "wrote " << items.size() << " items to " << cv.out_path << "\n";
  });

  // ---- tag-modality ----
  struct {
    std::string items, out_path, items_out, vocab;
    bool no_marker = false;
  } tg;
  EndpointFlags tg_ep;
  auto* tag = app.add_subcommand("tag-modality", "ask a judge endpoint for per-item modality");
  tag->add_option("--config", "key=value config file; command line overrides");
  tag->add_option("--items", tg.items, "MCQ items JSONL")->required();
  tag->add_option("--out", tg.out_path, "modality tags JSONL to write")->required();
  tag->add_option("--items-out", tg.items_out, "optionally rewrite items with tags applied");
  tag->add_option("--vocabulary", tg.vocab, "comma-separated modality vocabulary");
  tag->add_flag("--no-marker", tg.no_marker, "omit the in-band item marker");
  tg_ep.attach(tag);
  tag->callback([&] {
    auto items = read_mcq_items(tg.items);
    TagOptions opts;
    if (!tg.vocab.empty()) {
      opts.vocabulary.clear();
      std::stringstream ss(tg.vocab);
      std::string part;
      while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) opts.vocabulary.push_back(part);
      }
    }
    opts.embed_item_marker = !tg.no_marker;
    auto tags = tag_modalities(items, tg_ep.ep, opts);
    write_modality_tags(tg.out_path, tags);
    if (!tg.items_out.empty()) {
      apply_modality_tags(items, tags);
      write_mcq_items(tg.items_out, items);
    }
    out << "tagged " << tags.size() << " items\n";
  });

  // ---- balance ----
  struct {
    std::string items, out_path;
    std::string group_by = "modality";
    int n = 0;
    std::uint64_t seed = 0;
  } bl;
  auto* balance = app.add_subcommand("balance", "select a group-balanced subset");
  balance->add_option("--config", "key=value config file; command line overrides");
  balance->add_option("--items", bl.items, "MCQ items JSONL")->required();
  balance->add_option("--n", bl.n, "total subset size")->required();
  balance->add_option("--group-by", bl.group_by, "modality or label")
      ->check(CLI::IsMember({"modality", "label"}));
  balance->add_option("--seed", bl.seed, "per-group sampling seed");
  balance->add_option("--out", bl.out_path, "subset JSONL to write")->required();
  balance->callback([&] {
    auto items = read_mcq_items(bl.items);
    auto group = bl.group_by == "label" ? GroupBy::kLabel : GroupBy::kModality;
    auto subset = balanced_subset(items, bl.n, bl.seed, group);
    write_mcq_items(bl.out_path, subset);
    out << "selected " << subset.size() << " of " << items.size() << " items\n";
  });

  // ---- eval ----
  struct {
    std::string items, greedy_out, sampled_out, metadata_out;
    int k = 16;
    double temperature = 0.7;
    double top_p = 0.9;
    std::uint64_t seed_base = 0;
    std::uint64_t max_requests = 0;
    bool skip_greedy = false;
    bool no_marker = false;
  } ev;
  EndpointFlags ev_ep;
  auto* eval = app.add_subcommand("eval", "run greedy + sampled passes against an endpoint");
  eval->add_option("--config", "key=value config file; command line overrides");
  eval->add_option("--items", ev.items, "MCQ items JSONL")->required();
  eval->add_option("--greedy-out", ev.greedy_out, "greedy raw responses JSONL (appended)");
  eval->add_option("--sampled-out", ev.sampled_out, "sampled raw responses JSONL (appended)")
      ->required();
  eval->add_option("--k", ev.k, "samples per item");
  eval->add_option("--temperature", ev.temperature, "sampled-mode temperature");
  eval->add_option("--top-p", ev.top_p, "sampled-mode nucleus mass");
  eval->add_option("--seed-base", ev.seed_base, "base for per-request seeds");
  eval->add_option("--max-requests", ev.max_requests, "cap requests this invocation (0 = all)");
  eval->add_flag("--skip-greedy", ev.skip_greedy, "sampled pass only");
  eval->add_flag("--no-marker", ev.no_marker, "omit the in-band item marker");
  eval->add_option("--metadata-out", ev.metadata_out, "write a RunMetadata sidecar");
  ev_ep.attach(eval);
  eval->callback([&] {
    if (!ev.skip_greedy && ev.greedy_out.empty()) {
      throw ValidationError("--greedy-out is required unless --skip-greedy is set");
    }
    auto started = utc_timestamp_now();
    auto items = read_mcq_items(ev.items);
    RunOptions opts;
    opts.prompt.embed_item_marker = !ev.no_marker;
    opts.max_requests = ev.max_requests;

    std::uint64_t failed = 0;
    auto describe = [&](const char* name, const RunSummary& s) {
      out << name << ": attempted=" << s.attempted << " ok=" << s.ok << " failed=" << s.failed
          << " skipped_existing=" << s.skipped_existing << "\n";
      failed += s.failed;
    };
    if (!ev.skip_greedy) {
      describe("greedy", run_plan(items, ev_ep.ep, greedy_plan(ev.seed_base), ev.greedy_out, opts));
    }
    auto plan = sampled_plan(ev.k, ev.temperature, ev.top_p, ev.seed_base);
    describe("sampled", run_plan(items, ev_ep.ep, plan, ev.sampled_out, opts));

    if (!ev.metadata_out.empty()) {
      RunMetadata m;
      m.command_line = join_argv(argv);
      m.tool_version = kToolVersion;
      m.started_at = started;
      m.finished_at = utc_timestamp_now();
      m.endpoint_fingerprint = ev_ep.ep.base_url + " " + ev_ep.ep.model_name;
      m.seeds["seed_base"] = ev.seed_base;
      m.sampling_plan = {{"k", ev.k},
                         {"temperature", ev.temperature},
                         {"top_p", ev.top_p},
                         {"greedy", !ev.skip_greedy}};
      m.config_snapshot = {{"max_tokens", ev_ep.ep.max_tokens},
                           {"max_retries", ev_ep.ep.max_retries},
                           {"embed_item_marker", !ev.no_marker}};
      m.input_digests[ev.items] = sha256_hex_file(ev.items);
      write_text(ev.metadata_out, run_metadata_to_json(m).dump(2) + "\n");
      out << "metadata digest " << run_metadata_digest(m) << "\n";
    }
    if (failed > 0) {
      err << failed << " request(s) failed after retries; rerun to fill the gaps\n";
      exit_code = kExitPartialFailures;
    }
  });

  // ---- verify ----
  struct {
    std::string raw, items, out_path;
    std::string policy = "rule";
    bool no_marker = false;
  } vf;
  EndpointFlags vf_ep;
  auto* verify_cmd = app.add_subcommand("verify", "grade raw responses into sample records");
  verify_cmd->add_option("--config", "key=value config file; command line overrides");
  verify_cmd->add_option("--raw", vf.raw, "raw responses JSONL")->required();
  verify_cmd->add_option("--items", vf.items, "MCQ items JSONL")->required();
  verify_cmd->add_option("--out", vf.out_path, "sample records JSONL to write")->required();
  verify_cmd->add_option("--policy", vf.policy, "rule or rule-then-judge")
      ->check(CLI::IsMember({"rule", "rule-then-judge"}));
  verify_cmd->add_flag("--no-marker", vf.no_marker, "omit the item marker in judge prompts");
  vf_ep.attach(verify_cmd, /*required=*/false);
  verify_cmd->callback([&] {
    auto responses = read_raw_responses(vf.raw);
    std::map<std::string, McqItem> by_id;
    for (auto& item : read_mcq_items(vf.items)) by_id[item.item_id] = std::move(item);
    VerifyOptions opts;
    opts.embed_item_marker = !vf.no_marker;
    if (vf.policy == "rule-then-judge") {
      opts.policy = VerifyPolicy::kRuleThenJudge;
      opts.judge = vf_ep.ep;
    }
    auto records = verify(responses, by_id, opts);
    write_sample_records(vf.out_path, records);
    std::map<std::string, int> counts;
    for (const auto& r : records) ++counts[verdict_name(r.verdict)];
    out << "verified " << records.size() << " responses:";
    for (const auto& [name, n] : counts) out << " " << name << "=" << n;
    out << "\n";
  });

  // ---- stats ----
  struct {
    std::vector<std::string> records;
    std::string task, out_path, run_digest;
    std::string ks = "1,2,4,8,16";
    int bootstrap_resamples = 1000;
    std::uint64_t bootstrap_seed = 0;
    bool lenient = false;
    bool no_fallback = false;
  } st;
  auto* stats = app.add_subcommand("stats", "estimate Acc@1 / Pass@K support from records");
  stats->add_option("--config", "key=value config file; command line overrides");
  stats->add_option("--records", st.records, "sample records JSONL (repeatable)")->required();
  stats->add_option("--task", st.task, "task id for the estimate")->required();
  stats->add_option("--ks", st.ks, "comma-separated K values");
  stats->add_option("--bootstrap-resamples", st.bootstrap_resamples, "0 disables CIs");
  stats->add_option("--bootstrap-seed", st.bootstrap_seed, "bootstrap RNG seed");
  stats->add_flag("--lenient", st.lenient, "allow per-item sample counts to differ");
  stats->add_flag("--no-pass1-fallback", st.no_fallback, "never substitute Pass@1 for Acc@1");
  stats->add_option("--run-digest", st.run_digest, "RunMetadata digest to stamp on the estimate");
  stats->add_option("--out", st.out_path, "estimate JSON to write (default stdout)");
  stats->callback([&] {
    std::vector<SampleRecord> records;
    for (const auto& path : st.records) {
      auto part = read_sample_records(path);
      records.insert(records.end(), part.begin(), part.end());
    }
    EstimateOptions opts;
    opts.ks = parse_ks(st.ks);
    opts.bootstrap_resamples = st.bootstrap_resamples;
    opts.bootstrap_seed = st.bootstrap_seed;
    opts.strict_equal_n = !st.lenient;
    opts.allow_pass1_fallback = !st.no_fallback;
    auto est = estimate_support(st.task, records, opts);
    est.run_digest = st.run_digest;
    if (st.out_path.empty()) {
      out << support_estimate_to_json(est).dump(2) << "\n";
    } else {
      write_support_estimate(st.out_path, est);
      out << "estimated " << est.task_id << " over " << est.n_items << " items\n";
    }
  });

  // ---- probe ----
  struct {
    std::string train, test, out_path;
    ProbeConfig cfg;
  } pr;
  auto* probe = app.add_subcommand("probe", "train a linear probe on feature files");
  probe->add_option("--config", "key=value config file; command line overrides");
  probe->add_option("--train", pr.train, "training feature file")->required();
  probe->add_option("--test", pr.test, "test feature file")->required();
  probe->add_option("--lambda", pr.cfg.lambda, "L2 strength");
  probe->add_option("--max-iters", pr.cfg.max_iters, "gradient step budget");
  probe->add_option("--tol", pr.cfg.tol, "gradient infinity-norm stop");
  probe->add_option("--seed", pr.cfg.seed, "random-init seed");
  probe->add_flag("--random-init", pr.cfg.random_init, "start from small random weights");
  probe->add_option("--out", pr.out_path, "result JSON to write (default stdout)");
  probe->callback([&] {
    auto train = read_feature_file(pr.train);
    auto test = read_feature_file(pr.test);
    auto result = train_probe(train, test, pr.cfg);
    emit_json(probe_result_json(result), pr.out_path, out);
    if (!pr.out_path.empty()) {
      out << "train_accuracy=" << result.train_accuracy
          << " test_accuracy=" << result.test_accuracy << "\n";
    }
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
  });

  // ---- decide ----
  struct {
    std::string estimate, out_path;
    RecipeConfig cfg;
  } dc;
  dc.cfg.tau = 0.0;  // forces an explicit --tau (0.0 never validates)
  auto* decide_cmd = app.add_subcommand("decide", "bridge-vs-sharpen verdict for an estimate");
  decide_cmd->add_option("--config", "key=value config file; command line overrides");
  decide_cmd->add_option("--estimate", dc.estimate, "support estimate JSON")->required();
  decide_cmd->add_option("--tau", dc.cfg.tau, "target reliability in (0, 1]")->required();
  decide_cmd->add_option("--k-ref", dc.cfg.k_ref, "reference K");
  decide_cmd->add_option("--collapse-margin", dc.cfg.collapse_margin, "collapse threshold");
  decide_cmd->add_option("--out", dc.out_path, "decision JSON to write");
  decide_cmd->callback([&] {
    auto est = read_support_estimate(dc.estimate);
    auto d = decide(est, dc.cfg);
    out << d.task_id << ": " << recipe_verdict_name(d.verdict) << "\n" << d.rationale << "\n";
    if (!dc.out_path.empty()) write_text(dc.out_path, recipe_decision_to_json(d).dump(2) + "\n");
  });

  // ---- compare ----
  struct {
    std::string before, after, train_task, out_path;
    std::vector<std::string> modalities;
    RecipeConfig cfg;
  } cp;
  cp.cfg.tau = 0.0;
  auto* compare = app.add_subcommand("compare", "before/after delta report for one eval task");
  compare->add_option("--config", "key=value config file; command line overrides");
  compare->add_option("--before", cp.before, "baseline support estimate JSON")->required();
  compare->add_option("--after", cp.after, "post-intervention estimate JSON")->required();
  compare->add_option("--train-task", cp.train_task, "task the intervention trained on")
      ->required();
  compare->add_option("--eval-modality", cp.modalities,
                      "task=modality pairs for regime classification (repeatable)");
  compare->add_option("--tau", cp.cfg.tau, "target reliability in (0, 1]")->required();
  compare->add_option("--k-ref", cp.cfg.k_ref, "reference K");
  compare->add_option("--collapse-margin", cp.cfg.collapse_margin, "collapse threshold");
  compare->add_option("--out", cp.out_path, "delta report JSON to write");
  compare->callback([&] {
    auto before = read_support_estimate(cp.before);
    auto after = read_support_estimate(cp.after);
    auto modality_of = parse_pairs(cp.modalities, "--eval-modality");
    if (before.modality != "none") modality_of.emplace(before.task_id, before.modality);
    auto rep = compare_runs(before, after, cp.train_task, cp.cfg, modality_of);
    out << rep.train_task << " -> " << rep.eval_task << " [" << regime_name(rep.regime)
        << "]: dA=" << rep.delta_a << " dS@" << cp.cfg.k_ref << "=" << rep.delta_s_k
        << (rep.collapse_flag ? " COLLAPSE" : "") << "\n";
    if (!cp.out_path.empty()) write_text(cp.out_path, delta_report_to_json(rep).dump(2) + "\n");
  });

  // ---- report ----
  struct {
    std::vector<std::string> estimates, decisions, deltas;
    std::string metadata, out_path;
    std::string format = "markdown";
  } rp;
  auto* report = app.add_subcommand("report", "render estimates/decisions/deltas");
  report->add_option("--config", "key=value config file; command line overrides");
  report->add_option("--estimate", rp.estimates, "support estimate JSON (repeatable)");
  report->add_option("--decision", rp.decisions, "decision JSON (repeatable)");
  report->add_option("--delta", rp.deltas, "delta report JSON (repeatable)");
  report->add_option("--metadata", rp.metadata, "RunMetadata JSON sidecar");
  report->add_option("--format", rp.format, "markdown, json, or csv")
      ->check(CLI::IsMember({"markdown", "json", "csv"}));
  report->add_option("--out", rp.out_path, "report file to write (default stdout)");
  report->callback([&] {
    ReportInputs inputs;
    auto digest_input = [&](const std::string& path) {
      inputs.input_digests[path] = sha256_hex_file(path);
    };
    for (const auto& p : rp.estimates) {
      inputs.estimates.push_back(read_support_estimate(p));
      digest_input(p);
    }
    auto parse_file = [](const std::string& path) {
      try {
        return nlohmann::json::parse(read_file_bytes(path));
      } catch (const nlohmann::json::parse_error& ex) {
        throw ValidationError(path + ": " + ex.what());
      }
    };
    for (const auto& p : rp.decisions) {
      inputs.decisions.push_back(recipe_decision_from_json(parse_file(p)));
      digest_input(p);
    }
    for (const auto& p : rp.deltas) {
      inputs.deltas.push_back(delta_report_from_json(parse_file(p)));
      digest_input(p);
    }
    if (!rp.metadata.empty()) {
      inputs.metadata = run_metadata_from_json(parse_file(rp.metadata));
      digest_input(rp.metadata);
    }
    ReportFormat format = rp.format == "json"  ? ReportFormat::kJson
                          : rp.format == "csv" ? ReportFormat::kCsv
                                               : ReportFormat::kMarkdown;
    auto rendered = emit_report(inputs, format);
    if (rp.out_path.empty()) {
      out << rendered;
    } else {
      write_text(rp.out_path, rendered);
      out << "wrote " << rp.out_path << "\n";
    }
  });

  // ---- serve-mock ----
  struct {
    std::string spec;
    int port = 0;
  } sm;
  auto* serve = app.add_subcommand("serve-mock", "run the scripted chat-completions test double");
  serve->add_option("--config", "key=value config file; command line overrides");
  serve->add_option("--spec", sm.spec, "ScriptedModelSpec JSON (default: always-correct)");
  serve->add_option("--port", sm.port, "port to bind (default: any free port)");
  serve->callback([&] {
    ScriptedModelSpec spec;
    if (!sm.spec.empty()) spec = ScriptedModelSpec::from_json_file(sm.spec);
    MockServer server(std::move(spec));
    server.start(sm.port);
    out << "mock endpoint at " << server.base_url() << " (stop with SIGINT)\n";
    out.flush();
    while (true) std::this_thread::sleep_for(std::chrono::hours(1));
  });

  std::vector<std::string> args = argv;
  try {
    merge_config_into_args(app, args);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  std::vector<const char*> c_argv;
  c_argv.reserve(args.size() + 1);
  c_argv.push_back("boundary");
  for (const auto& a : args) c_argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(c_argv.size()), c_argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return exit_code;
}

}  // namespace boundary::cli
