#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "canqa/baseline.hpp"
#include "canqa/config.hpp"
#include "canqa/dataset.hpp"
#include "canqa/eval.hpp"
#include "canqa/generator.hpp"
#include "canqa/ingest.hpp"
#include "canqa/log.hpp"
#include "canqa/window.hpp"
#include "json.hpp"

namespace canqa {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- ingest

struct IngestResult {
  std::string input;
  std::string output;
  std::size_t frames = 0;
  std::size_t rejected = 0;
  std::string digest;  // of the normalized dump
};

// "trace.csv.gz" -> "trace"
inline std::string trace_stem(const fs::path& p) {
  auto name = p.filename();
  if (name.extension() == ".gz") name = name.stem();
  return name.stem().string();
}

inline IngestResult run_ingest(const std::string& path, FormatHint hint, const fs::path& out_dir) {
  const auto stream = parse_log_file(path, hint);
  std::ostringstream dump;
  write_csv(stream, dump);
  IngestResult r;
  r.input = path;
  r.output = (out_dir / (trace_stem(path) + ".csv")).string();
  r.frames = stream.frames.size();
  r.rejected = stream.rejected_count;
  r.digest = sha256_hex(dump.str());
  write_text_file(r.output, dump.str());
  return r;
}

// ---------------------------------------------------------------- baseline

inline std::vector<FrameStream> load_streams(const std::vector<std::string>& paths, FormatHint hint,
                                             std::optional<AttackLabel> label = std::nullopt) {
  if (paths.empty()) throw Error(ErrorKind::Config, "no input traces configured");
  std::vector<FrameStream> streams;
  for (const auto& p : paths) streams.push_back(parse_log_file(p, hint, label));
  return streams;
}

inline BaselineStats run_baseline(const RunConfig& cfg) {
  const auto streams = load_streams(cfg.paths.normal, cfg.format, AttackLabel::Normal);
  auto baseline = build_baseline(streams, cfg.window_len, cfg.thresholds);
  write_text_file(cfg.paths.baseline, to_json(baseline).dump(2) + "\n");
  return baseline;
}

inline BaselineStats load_baseline(const fs::path& path) {
  const auto text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Integrity, "malformed baseline '" + path.string() + "': " + e.what());
  }
  return baseline_from_json(j);
}

// The baseline must have been measured with the same W and thresholds.
inline void require_compatible(const BaselineStats& b, const RunConfig& cfg) {
  if (b.window_len != cfg.window_len) {
    throw Error(ErrorKind::Compatibility, "baseline was built with W=" + std::to_string(b.window_len) +
                                              " but the run uses W=" + std::to_string(cfg.window_len));
  }
  if (b.measurement_digest() != measurement_digest(cfg.window_len, cfg.thresholds)) {
    throw Error(ErrorKind::Compatibility, "baseline thresholds differ from the run config");
  }
}

// ---------------------------------------------------------------- generate

// Windows from every attack trace. Traces sharing a label continue that
// label's window numbering so window ids stay unique.
inline std::vector<Window> collect_windows(const std::vector<FrameStream>& streams, std::size_t window_len) {
  std::vector<Window> all;
  std::map<AttackLabel, std::size_t> next_index;
  for (const auto& s : streams) {
    auto windows = segment(s, window_len);
    auto& offset = next_index[s.source_label];
    for (auto& w : windows) {
      w.index += offset;
      w.window_id = make_window_id(w.attack_label, w.index);
      all.push_back(std::move(w));
    }
    offset += windows.size();
  }
  return all;
}

struct GenerateResult {
  DatasetManifest manifest;
  GenerationReport report;
  std::string report_path;
};

inline fs::path report_path_for(const fs::path& dataset) {
  auto p = dataset;
  p.replace_extension();
  p += ".report.json";
  return p;
}

inline GenerateResult run_generate(const RunConfig& cfg) {
  const auto baseline = load_baseline(cfg.paths.baseline);
  require_compatible(baseline, cfg);

  const auto streams = load_streams(cfg.paths.attack, cfg.format);
  const auto windows = collect_windows(streams, cfg.window_len);
  GenerationPlan plan;
  plan.policy = cfg.plan;
  auto generated = generate_dataset(windows, baseline, plan, cfg.seed, cfg.parallelism);

  const auto digest = generation_digest(baseline.measurement_digest(), baseline_digest(baseline), cfg.seed, cfg.plan);
  GenerateResult r;
  r.manifest = write_dataset(generated.items, cfg.paths.dataset, cfg.seed, digest);
  r.report = std::move(generated.report);
  r.report_path = report_path_for(cfg.paths.dataset).string();
  auto report_json = to_json(r.report);
  report_json["config_digest"] = digest;
  write_text_file(r.report_path, report_json.dump(2) + "\n");
  return r;
}

// ---------------------------------------------------------------- evaluate

// Loads a dataset and checks it against its manifest.
inline std::pair<std::vector<QaItem>, DatasetManifest> load_verified_dataset(const fs::path& path) {
  const auto manifest = read_manifest(path);
  const auto text = read_text_file(path);
  if (sha256_hex(text) != manifest.dataset_digest) {
    throw Error(ErrorKind::Integrity, "dataset '" + path.string() + "' does not match its manifest digest");
  }
  auto items = read_dataset(path);
  if (items.size() != manifest.total_items) {
    throw Error(ErrorKind::Integrity, "dataset item count disagrees with manifest");
  }
  return {std::move(items), manifest};
}

inline fs::path records_meta_path(const fs::path& records) {
  auto p = records;
  p += ".meta.json";
  return p;
}

struct EvaluateResult {
  EvalResult eval;
  std::size_t eval_items = 0;
  std::size_t pool_items = 0;
};

inline EvaluateResult run_evaluate(const RunConfig& cfg) {
  auto [items, manifest] = load_verified_dataset(cfg.paths.dataset);
  const std::size_t k = uses_shots(cfg.strategy) ? cfg.shots : 0;
  auto split = split_eval_fewshot(items, k, cfg.seed);

  // Endpoint construction validates URL and credential; nothing is sent yet.
  auto endpoint = make_endpoint(cfg.endpoint, AnswerKey::from(split.eval_set), cfg.seed);

  // A record log only resumes the run it was started for.
  const nlohmann::json run_meta = {{"dataset_digest", manifest.dataset_digest},
                                   {"strategy", to_string(cfg.strategy)},
                                   {"shots", k},
                                   {"seed", cfg.seed},
                                   {"endpoint", cfg.endpoint.url},
                                   {"model", cfg.endpoint.model}};
  const auto meta_path = records_meta_path(cfg.paths.records);
  if (fs::exists(cfg.paths.records) && fs::exists(meta_path)) {
    const auto prev = nlohmann::json::parse(read_text_file(meta_path), nullptr, false);
    if (prev != run_meta) {
      throw Error(ErrorKind::Integrity, "record log '" + cfg.paths.records +
                                            "' belongs to a different run; move it or choose another path");
    }
  }
  write_text_file(meta_path, run_meta.dump(2) + "\n");

  EvalOptions opt;
  opt.strategy = cfg.strategy;
  opt.shots = cfg.shots;
  opt.seed = cfg.seed;
  opt.parallelism = cfg.parallelism;
  opt.model = cfg.endpoint.model;
  opt.temperature = cfg.endpoint.temperature;
  opt.max_tokens = cfg.endpoint.max_tokens;
  opt.records_path = cfg.paths.records;

  EvaluateResult r;
  r.eval_items = split.eval_set.size();
  r.pool_items = split.fewshot_pool.size();
  r.eval = run_eval(split.eval_set, split.fewshot_pool, *endpoint, opt);

  auto j = to_json(r.eval.summary);
  j["dataset_digest"] = manifest.dataset_digest;
  j["config_digest"] = manifest.config_digest;
  j["model"] = cfg.endpoint.model;
  write_text_file(cfg.paths.summary, j.dump(2) + "\n");
  return r;
}

// ---------------------------------------------------------------- report

struct ReportResult {
  EvalSummary summary;
  std::string table;
  std::string csv;
};

inline ReportResult run_report(const RunConfig& cfg) {
  const auto text = read_text_file(cfg.paths.summary);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Integrity, "malformed summary '" + cfg.paths.summary + "': " + e.what());
  }
  ReportResult r;
  r.summary = summary_from_json(j);
  r.table = summary_table(r.summary);
  r.csv = summary_csv(r.summary);
  write_text_file(cfg.paths.report_csv, r.csv);
  return r;
}

}  // namespace canqa
