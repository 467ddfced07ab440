// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "canqa/canqa.hpp"
#include "support/boxes.hpp"
#include "support/fixtures.hpp"
#include "support/oracle.hpp"
#include "support/synth.hpp"

using namespace canqa;
using fixtures::TempDir;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  char elapsed[32];
  std::snprintf(elapsed, sizeof elapsed, "%.2fs", seconds_since(t0));
  std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail << " [" << elapsed
            << "]" << std::endl;
  failures += !o.pass;
}

RunConfig sample_config(const TempDir& out) {
  auto cfg = load_config(CANQA_SAMPLE_DIR "/run.toml");
  cfg.paths.baseline = (out / "baseline.json").string();
  cfg.paths.dataset = (out / "dataset.jsonl").string();
  cfg.paths.records = (out / "records.jsonl").string();
  cfg.paths.summary = (out / "summary.json").string();
  cfg.paths.report_csv = (out / "report.csv").string();
  return cfg;
}

// ------------------------------------------------------------------ AC1

Outcome oracle_agreement() {
  constexpr int kWindows = 200;
  const auto t0 = Clock::now();
  Rng rng(7001);
  std::size_t checks = 0, mismatches = 0;
  std::string first_bad;
  for (std::size_t W : {20u, 50u, 100u}) {
    const auto b = build_baseline(synth::baseline_stream(std::max<std::size_t>(3000, 12 * W), 1), W);
    const auto templates = make_templates(b.thresholds);
    const auto known = synth::ids_of(b);
    for (int i = 0; i < kWindows; ++i) {
      const auto w = synth::random_window(rng, W, known, static_cast<std::size_t>(i));
      const auto x = extract_features(w, b);
      for (const auto& t : templates.tf) {
        const auto item = generate_tf(w, x, b, t, 5);
        const bool want = oracle::tf_truth(t.name, w, b, item.meta.masked_index);
        ++checks;
        if (item.answer != (want ? "True" : "False")) {
          ++mismatches;
          if (first_bad.empty()) first_bad = t.name + " W=" + std::to_string(W);
        }
      }
      for (const auto& t : templates.mcq) {
        ++checks;
        if (satisfied_options(t, x) != oracle::mcq_satisfied(t.name, w, b)) {
          ++mismatches;
          if (first_bad.empty()) first_bad = t.name + " W=" + std::to_string(W);
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << checks << " checks over " << kWindows << " windows per template per W, " << mismatches << " mismatches";
  if (!first_bad.empty()) d << " (first: " << first_bad << ")";
  d << ", " << secs << " s (limit 30)";
  return {mismatches == 0 && secs < 30.0, d.str()};
}

// ------------------------------------------------------------------ AC2

Outcome box_replay() {
  const auto b = boxes::baseline();
  int ok = 0;
  std::string wrong;
  for (auto& c : boxes::cases()) {
    const auto x = extract_features(c.window, b);
    std::string got;
    if (c.mcq) {
      const auto r = generate_mcq(c.window, x, b, c.category, 9);
      got = r.emitted() ? r.item->meta.canonical_answer : "skip(" + r.satisfied + ")";
    } else {
      got = generate_tf(c.window, x, b, c.category, 9).answer;
    }
    if (got == c.expected) {
      ++ok;
    } else {
      wrong += " C" + std::to_string(c.category) + "=" + got;
    }
  }
  return {ok == 10, std::to_string(ok) + "/10 boxes reproduced" + wrong};
}

// ------------------------------------------------------------------ AC3

Outcome determinism() {
  std::set<std::string> datasets, manifests, digests;
  for (std::size_t par : {1u, 1u, 2u, 4u}) {
    TempDir dir("acc_det");
    auto cfg = sample_config(dir);
    cfg.parallelism = par;
    run_baseline(cfg);
    const auto r = run_generate(cfg);
    datasets.insert(read_text_file(cfg.paths.dataset));
    manifests.insert(read_text_file(manifest_path_for(cfg.paths.dataset)));
    digests.insert(r.manifest.dataset_digest);
  }
  const bool pass = datasets.size() == 1 && manifests.size() == 1 && digests.size() == 1;
  return {pass, "4 runs (parallelism 1,1,2,4): " + std::to_string(digests.size()) + " distinct digest(s), " +
                    std::to_string(manifests.size()) + " distinct manifest(s), digest " +
                    digests.begin()->substr(0, 16)};
}

// ------------------------------------------------------------------ AC4, AC5

struct SampleRun {
  BaselineStats baseline;
  std::vector<Window> windows;
};

const SampleRun& sample_run() {
  static const SampleRun run = [] {
    TempDir dir("acc_sample");
    const auto cfg = sample_config(dir);
    SampleRun r;
    r.baseline = run_baseline(cfg);
    r.windows = collect_windows(load_streams(cfg.paths.attack, cfg.format), cfg.window_len);
    return r;
  }();
  return run;
}

Outcome mcq_exclusivity() {
  const auto& s = sample_run();
  std::map<std::string, const Window*> by_id;
  for (const auto& w : s.windows) by_id[w.window_id] = &w;

  std::size_t mcq = 0, violations = 0, skips = 0, bad_skips = 0;
  for (auto policy : {PlanPolicy::RoundRobin, PlanPolicy::BothFormats}) {
    GenerationPlan plan;
    plan.policy = policy;
    const auto ds = generate_dataset(s.windows, s.baseline, plan, 42);
    for (const auto& item : ds.items) {
      if (item.format != QaFormat::MCQ) continue;
      ++mcq;
      const auto sat = oracle::mcq_satisfied(item.meta.template_name, *by_id.at(item.meta.window_id), s.baseline);
      if (sat.size() != 1 || sat != item.meta.canonical_answer) ++violations;
    }
    for (const auto& skip : ds.report.skip_samples) {
      ++skips;
      bad_skips += skip.satisfied.size() == 1;
    }
  }
  return {mcq > 0 && violations == 0 && bad_skips == 0,
          std::to_string(mcq) + " MCQ items checked, " + std::to_string(violations) + " violations; " +
              std::to_string(skips) + " sampled skips, " + std::to_string(bad_skips) + " with a single true option"};
}

Outcome balance() {
  const auto& s = sample_run();
  const auto ds = generate_dataset(s.windows, s.baseline, GenerationPlan{}, 42);
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_label;
  std::set<int> categories;
  for (const auto& item : ds.items) {
    auto& [tf, mcq] = per_label[std::string(to_string(item.meta.attack_label))];
    (item.format == QaFormat::TF ? tf : mcq)++;
    categories.insert(item.category);
  }
  std::size_t tf = 0, mcq = 0;
  bool pass = per_label.size() == 4;
  std::ostringstream d;
  for (const auto& [label, counts] : per_label) {
    d << label << ' ' << counts.first << '/' << counts.second << ", ";
    pass &= counts.first == counts.second;
    tf += counts.first;
    mcq += counts.second;
  }
  pass &= tf == mcq && categories.size() == 10 && *categories.begin() == 1 && *categories.rbegin() == 10;
  d << "overall " << tf << '/' << mcq << " (TF/MCQ), " << categories.size() << "/10 categories";
  return {pass, d.str()};
}

// ------------------------------------------------------------------ AC6

Outcome calibration() {
  const auto items = fixtures::dataset(12000, 50, 4, PlanPolicy::BothFormats);
  std::size_t tf = 0;
  for (const auto& i : items) tf += i.format == QaFormat::TF;
  const std::size_t mcq = items.size() - tf;
  const auto key = AnswerKey::from(items);
  EvalOptions opt;
  opt.backoff = std::chrono::milliseconds(1);

  auto within = [](const Slice& s, double p) {
    const double sd = std::sqrt(p * (1 - p) / static_cast<double>(s.total));
    return std::abs(s.accuracy() - p) <= 3 * sd;
  };
  std::ostringstream d;
  d.precision(4);
  bool pass = tf >= 1000 && mcq >= 1000;

  MockEndpoint echo(MockKind::Echo, key);
  const double e = run_eval(items, {}, echo, opt).summary.overall.accuracy();
  MockEndpoint anti(MockKind::Anti, key);
  const double a = run_eval(items, {}, anti, opt).summary.overall.accuracy();
  pass &= e == 1.0 && a == 0.0;

  MockEndpoint random(MockKind::Random, key, 11);
  const auto r = run_eval(items, {}, random, opt).summary;
  pass &= within(r.per_format.at("TF"), 0.5) && within(r.per_format.at("MCQ"), 0.25);
  d << tf << " TF + " << mcq << " MCQ; echo " << e << ", anti " << a << ", random TF "
    << r.per_format.at("TF").accuracy() << " MCQ " << r.per_format.at("MCQ").accuracy() << ", fixed";

  for (const char* letter : {"A", "B", "C", "D"}) {
    MockEndpoint fixed(MockKind::Fixed, key, 0, letter);
    const auto f = run_eval(items, {}, fixed, opt).summary.per_format.at("MCQ");
    pass &= within(f, 0.25);
    d << ' ' << letter << '=' << f.accuracy();
  }
  return {pass, d.str()};
}

// ------------------------------------------------------------------ AC7

Outcome percentiles() {
  Rng rng(77);
  std::size_t checks = 0, bad = 0, singletons = 0, with_dups = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = i % 10 == 0 ? 1 : 1 + rng.below(200);
    const std::uint64_t range = rng.below(2) ? 10 : 1000000;
    std::vector<double> v(n);
    for (auto& x : v) x = static_cast<double>(rng.below(range)) - static_cast<double>(range / 2);
    singletons += n == 1;
    with_dups += std::set<double>(v.begin(), v.end()).size() < n;
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (double p : {0.0, 5.0, 10.0, 50.0, 95.0, 100.0}) {
      // rank = ceil(p/100 * n), smallest rank 1
      std::size_t rank = 1;
      while (static_cast<double>(rank) * 100.0 < p * static_cast<double>(n)) ++rank;
      ++checks;
      bad += percentile(v, p) != sorted[rank - 1];
    }
  }
  return {bad == 0 && singletons > 0 && with_dups > 0,
          std::to_string(checks) + " checks on 1000 lists (" + std::to_string(singletons) + " singletons, " +
              std::to_string(with_dups) + " with duplicates), " + std::to_string(bad) + " mismatches"};
}

// ------------------------------------------------------------------ AC8

Outcome round_trip() {
  std::size_t traces = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(CANQA_SAMPLE_DIR)) {
    const auto ext = entry.path().extension();
    if (ext != ".csv" && ext != ".txt") continue;
    ++traces;
    const auto a = parse_log_file(entry.path().string(), FormatHint::Auto);
    std::ostringstream out;
    write_csv(a, out);
    const auto b = parse_log(out.str(), FormatHint::Auto, a.source_label);
    std::ostringstream again;
    write_csv(b, again);
    identical += a.frames == b.frames && a.epoch_us == b.epoch_us && out.str() == again.str() && !a.frames.empty();
  }
  const auto m = parse_log_file(CANQA_TEST_DATA "/malformed.csv", FormatHint::Auto);
  std::size_t lines = 0;
  {
    std::ifstream in(CANQA_TEST_DATA "/malformed.csv");
    for (std::string l; std::getline(in, l);) lines += !l.empty();
  }
  const bool fixture_ok = m.rejected_count == 7 && m.frames.size() + m.rejected_count + m.header_lines == lines;
  return {traces == 5 && identical == traces && fixture_ok,
          std::to_string(identical) + "/" + std::to_string(traces) + " sample traces round-trip; fixture " +
              std::to_string(m.rejected_count) + " rejected, " + std::to_string(m.frames.size()) + " frames, " +
              std::to_string(m.header_lines) + " header of " + std::to_string(lines) + " lines"};
}

// ------------------------------------------------------------------ AC9

QaItem stub_item(const std::string& window_id, int category, QaFormat format) {
  QaItem item;
  item.qa_id = make_qa_id(window_id, category, format);
  item.category = category;
  item.format = format;
  item.context = "window " + window_id;
  item.question = "q" + std::to_string(category);
  item.answer = format == QaFormat::TF ? "True" : "A";
  if (format == QaFormat::MCQ) item.options = {"A. a", "B. b", "C. c", "D. d"};
  item.meta.window_id = window_id;
  return item;
}

Outcome leakage_guard() {
  Rng rng(909);
  std::size_t datasets = 0, attempts = 0, overlaps = 0, lost = 0, collisions = 0, caught = 0;
  while (datasets < 100 && attempts < 1000) {
    ++attempts;
    std::vector<QaItem> items;
    const auto windows = 2 + rng.below(60);
    for (std::size_t w = 0; w < windows; ++w) {
      const auto id = "Fuzzy:" + std::to_string(w * 7 + rng.below(7));
      for (int c = 1; c <= 10; ++c) {
        if (rng.below(4) == 0) items.push_back(stub_item(id, c, QaFormat::TF));
        if (rng.below(4) == 0) items.push_back(stub_item(id, c, QaFormat::MCQ));
      }
    }
    std::sort(items.begin(), items.end(), [](auto& a, auto& b) { return a.qa_id < b.qa_id; });
    items.erase(std::unique(items.begin(), items.end(), [](auto& a, auto& b) { return a.qa_id == b.qa_id; }),
                items.end());
    const auto k = rng.below(6);
    EvalSplit split;
    try {
      split = split_eval_fewshot(items, k, rng.next());
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Split) throw;
      continue;
    }
    ++datasets;
    std::set<std::string> pool;
    for (const auto& i : split.fewshot_pool) pool.insert(i.meta.window_id);
    for (const auto& i : split.eval_set) overlaps += pool.contains(i.meta.window_id);
    lost += split.fewshot_pool.size() + split.eval_set.size() != items.size();

    if (split.eval_set.empty()) continue;
    const auto& target = split.eval_set[rng.below(split.eval_set.size())];
    auto twin = stub_item(target.meta.window_id, target.category % 10 + 1, target.format);
    twin.qa_id += ":twin";
    ++collisions;
    try {
      build_prompt(target, Strategy::FewShot, {twin});
    } catch (const Error& e) {
      caught += e.kind() == ErrorKind::Leakage;
    }
  }
  return {datasets == 100 && overlaps == 0 && lost == 0 && collisions > 0 && caught == collisions,
          std::to_string(datasets) + " random datasets split, " + std::to_string(overlaps) +
              " cross-partition windows, " + std::to_string(lost) + " item-count mismatches; " +
              std::to_string(caught) + "/" + std::to_string(collisions) + " constructed collisions raised"};
}

// ------------------------------------------------------------------ AC10

Outcome desk_scale() {
  constexpr std::size_t kFrames = 100000;
  TempDir dir("acc_perf");
  const auto attack_path = (dir / "DoS_dataset.csv").string();
  const auto normal_path = (dir / "normal_run_data.txt").string();
  {
    std::ofstream a(attack_path);
    write_csv(sim::simulate(AttackLabel::DoS, kFrames, 5), a);
    std::ofstream n(normal_path);
    sim::write_txt(sim::simulate(AttackLabel::Normal, kFrames, 6), n);
  }
  RunConfig cfg;
  cfg.paths.normal = {normal_path};
  cfg.paths.attack = {attack_path};
  cfg.paths.baseline = (dir / "baseline.json").string();
  cfg.paths.dataset = (dir / "dataset.jsonl").string();

  const auto t0 = Clock::now();
  const auto ingested = run_ingest(attack_path, FormatHint::Auto, dir / "ingest");
  run_baseline(cfg);
  const auto r = run_generate(cfg);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << ingested.frames << " attack frames + " << kFrames << " normal frames -> " << r.manifest.total_items
    << " items in " << secs << " s (limit 60)";
  return {ingested.frames == kFrames && r.manifest.total_items > 0 && secs < 60.0, d.str()};
}

}  // namespace

int main() {
  log::set_level(log::Level::Error);
  report("AC1", "ground-truth oracle agreement", oracle_agreement);
  report("AC2", "category box replay", box_replay);
  report("AC3", "generate determinism", determinism);
  report("AC4", "MCQ exclusivity", mcq_exclusivity);
  report("AC5", "structural balance", balance);
  report("AC6", "grader calibration", calibration);
  report("AC7", "percentile correctness", percentiles);
  report("AC8", "parser round-trip", round_trip);
  report("AC9", "leakage guard", leakage_guard);
  report("AC10", "desk-scale performance", desk_scale);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
