// canqa: ingest CAN logs, build a baseline, generate QA datasets, evaluate.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "canqa/canqa.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> window_len;
  std::optional<std::string> format;
  std::optional<std::string> strategy;
  std::optional<std::size_t> parallelism;
  std::string log_level = "info";
};

canqa::RunConfig resolve(const Overrides& o) {
  canqa::RunConfig cfg = o.config.empty() ? canqa::RunConfig{} : canqa::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.window_len) cfg.window_len = *o.window_len;
  if (o.format) cfg.format = canqa::parse_format_hint(*o.format);
  if (o.strategy) cfg.strategy = canqa::parse_strategy(*o.strategy);
  if (o.parallelism) cfg.parallelism = *o.parallelism;
  if (cfg.parallelism == 0) throw canqa::Error(canqa::ErrorKind::Config, "parallelism must be at least 1");
  return cfg;
}

canqa::log::Level level_from(const std::string& s) {
  if (s == "debug") return canqa::log::Level::Debug;
  if (s == "info") return canqa::log::Level::Info;
  if (s == "warn") return canqa::log::Level::Warn;
  if (s == "error") return canqa::log::Level::Error;
  if (s == "off") return canqa::log::Level::Off;
  throw canqa::Error(canqa::ErrorKind::Config, "unknown log level '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAN bus QA dataset toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "TOML-style run config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--window-len", o.window_len, "frames per window");
  app.add_option("--format", o.format, "input format: auto, car-hacking-csv, car-hacking-txt");
  app.add_option("--strategy", o.strategy, "zero_shot, few_shot, cot, few_shot_cot");
  app.add_option("--parallelism", o.parallelism, "worker threads");
  app.add_option("--log-level", o.log_level, "debug, info, warn, error, off");

  auto* ingest = app.add_subcommand("ingest", "parse logs and write normalized CSV dumps");
  std::vector<std::string> ingest_paths;
  std::string ingest_out = "out/frames";
  ingest->add_option("paths", ingest_paths, "log files (.csv, .txt, optionally .gz)")->required();
  ingest->add_option("--out", ingest_out, "output directory");

  auto* baseline = app.add_subcommand("baseline", "build baseline statistics from attack-free traces");
  std::vector<std::string> normal_paths;
  std::string baseline_out;
  baseline->add_option("--normal", normal_paths, "attack-free traces");
  baseline->add_option("--out", baseline_out, "baseline JSON path");

  auto* generate = app.add_subcommand("generate", "generate the QA dataset");
  std::vector<std::string> attack_paths;
  std::string gen_baseline, gen_out, plan;
  generate->add_option("--attack", attack_paths, "traces to generate questions from");
  generate->add_option("--baseline", gen_baseline, "baseline JSON path");
  generate->add_option("--out", gen_out, "dataset JSONL path");
  generate->add_option("--plan", plan, "round-robin, extended, both-formats");

  auto* evaluate = app.add_subcommand("evaluate", "query an endpoint and score answers");
  std::string eval_dataset, endpoint_url, model, records, summary;
  std::optional<std::size_t> shots;
  evaluate->add_option("--dataset", eval_dataset, "dataset JSONL path");
  evaluate->add_option("--endpoint", endpoint_url, "chat-completions URL or mock://echo|anti|random|fixed/A");
  evaluate->add_option("--model", model, "model name sent to the endpoint");
  evaluate->add_option("--records", records, "incremental record log (resumed if present)");
  evaluate->add_option("--summary", summary, "summary JSON path");
  evaluate->add_option("--shots", shots, "examples per prompt in few-shot modes");

  auto* report = app.add_subcommand("report", "render an evaluation summary");
  std::string report_summary, report_csv;
  report->add_option("--summary", report_summary, "summary JSON path");
  report->add_option("--csv", report_csv, "per-category CSV output path");

  CLI11_PARSE(app, argc, argv);

  try {
    canqa::log::set_level(level_from(o.log_level));
    auto cfg = resolve(o);

    if (*ingest) {
      std::size_t total = 0;
      for (const auto& p : ingest_paths) {
        const auto r = canqa::run_ingest(p, cfg.format, ingest_out);
        std::printf("%s: %zu frames, %zu rejected -> %s\n", p.c_str(), r.frames, r.rejected, r.output.c_str());
        total += r.frames;
      }
      std::printf("total frames: %zu\n", total);
    } else if (*baseline) {
      if (!normal_paths.empty()) cfg.paths.normal = normal_paths;
      if (!baseline_out.empty()) cfg.paths.baseline = baseline_out;
      const auto b = canqa::run_baseline(cfg);
      std::printf("baseline: %zu frames, %zu windows, %zu expected IDs -> %s\n", b.frame_count, b.window_count,
                  b.expected_ids.size(), cfg.paths.baseline.c_str());
      std::printf("measurement digest: %s\n", b.measurement_digest().c_str());
    } else if (*generate) {
      if (!attack_paths.empty()) cfg.paths.attack = attack_paths;
      if (!gen_baseline.empty()) cfg.paths.baseline = gen_baseline;
      if (!gen_out.empty()) cfg.paths.dataset = gen_out;
      if (!plan.empty()) cfg.plan = canqa::parse_plan_policy(plan);
      const auto r = canqa::run_generate(cfg);
      std::printf("items: %zu", r.manifest.total_items);
      for (const auto& [k, v] : r.manifest.per_format) std::printf("  %s=%zu", k.c_str(), v);
      std::printf("\n");
      for (const auto& [k, v] : r.manifest.per_attack) std::printf("  %-7s %zu\n", k.c_str(), v);
      std::size_t skipped = 0;
      for (const auto& [_, n] : r.report.skips_per_template) skipped += n;
      std::printf("skipped MCQs: %zu, fallbacks: %zu (details in %s)\n", skipped, r.report.fallbacks,
                  r.report_path.c_str());
      std::printf("dataset digest: %s\n", r.manifest.dataset_digest.c_str());
    } else if (*evaluate) {
      if (!eval_dataset.empty()) cfg.paths.dataset = eval_dataset;
      if (!endpoint_url.empty()) cfg.endpoint.url = endpoint_url;
      if (!model.empty()) cfg.endpoint.model = model;
      if (!records.empty()) cfg.paths.records = records;
      if (!summary.empty()) cfg.paths.summary = summary;
      if (shots) cfg.shots = *shots;
      const auto r = canqa::run_evaluate(cfg);
      std::printf("evaluated %zu items (few-shot pool %zu)\n", r.eval_items, r.pool_items);
      std::fputs(canqa::summary_table(r.eval.summary).c_str(), stdout);
    } else if (*report) {
      if (!report_summary.empty()) cfg.paths.summary = report_summary;
      if (!report_csv.empty()) cfg.paths.report_csv = report_csv;
      const auto r = canqa::run_report(cfg);
      std::fputs(r.table.c_str(), stdout);
      std::printf("csv -> %s\n", cfg.paths.report_csv.c_str());
    }
  } catch (const canqa::Error& e) {
    std::fprintf(stderr, "canqa: %s\n", e.what());
    const auto k = e.kind();
    return k == canqa::ErrorKind::Config || k == canqa::ErrorKind::Argument ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "canqa: %s\n", e.what());
    return 1;
  }
  return 0;
}
