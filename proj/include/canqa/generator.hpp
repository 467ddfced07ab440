#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "canqa/baseline.hpp"
#include "canqa/digest.hpp"
#include "canqa/error.hpp"
#include "canqa/features.hpp"
#include "canqa/templates.hpp"
#include "canqa/window.hpp"
#include "json.hpp"

namespace canqa {

struct Provenance {
  std::string window_id;
  AttackLabel attack_label = AttackLabel::Normal;
  std::size_t window_index = 0;
  std::string template_name;
  std::uint64_t seed = 0;
  std::string features_digest;
  std::string canonical_answer;  // MCQ: label before shuffling
  std::string option_order;      // MCQ: canonical labels in presented order, e.g. "CADB"
  std::optional<std::size_t> masked_index;
  std::string rationale;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct QaItem {
  std::string qa_id;  // "<window_id>:<category>:<format>"
  int category = 0;
  QaFormat format = QaFormat::TF;
  std::string context;
  std::string question;
  std::vector<std::string> options;  // "A. ..." in presented order; empty for TF
  std::string answer;                // "True"/"False" or "A".."D"
  Provenance meta;

  friend bool operator==(const QaItem&, const QaItem&) = default;
};

inline std::string make_qa_id(const std::string& window_id, int category, QaFormat format) {
  return window_id + ":" + std::to_string(category) + ":" + std::string(to_string(format));
}

// Index of the frame whose flag is hidden; depends only on (seed, window_id).
inline std::size_t masked_frame_index(std::uint64_t seed, const std::string& window_id,
                                      std::size_t window_len) {
  return static_cast<std::size_t>(Rng(derive_seed(seed, "mask:" + window_id)).below(window_len));
}

inline QaItem generate_tf(const Window& window, const WindowFeatures& features,
                          const BaselineStats& baseline, const TfTemplate& tmpl, std::uint64_t seed) {
  std::optional<std::size_t> mask;
  if (tmpl.masks_flag) mask = masked_frame_index(seed, window.window_id, window.frames.size());
  const TemplateInput in{window, features, baseline, mask};
  QaItem item;
  item.qa_id = make_qa_id(window.window_id, tmpl.category, QaFormat::TF);
  item.category = tmpl.category;
  item.format = QaFormat::TF;
  item.context = render_context(window, mask).text;
  item.question = tmpl.question;
  item.answer = tmpl.truth(in) ? "True" : "False";
  item.meta = {window.window_id, window.attack_label, window.index, tmpl.name, seed,
               features_digest(features), "", "", mask, tmpl.rationale(in)};
  return item;
}

inline QaItem generate_tf(const Window& window, const WindowFeatures& features,
                          const BaselineStats& baseline, int category, std::uint64_t seed) {
  if (category < 1 || category > 10) {
    throw Error(ErrorKind::Argument, "category " + std::to_string(category) + " outside 1..10");
  }
  return generate_tf(window, features, baseline, make_templates(baseline.thresholds).tf_for(category),
                     seed);
}

struct McqOutcome {
  std::optional<QaItem> item;
  std::string satisfied;  // canonical labels whose condition held

  bool emitted() const { return item.has_value(); }
};

// The canonical labels whose conditions hold for these features.
inline std::string satisfied_options(const McqTemplate& tmpl, const WindowFeatures& features) {
  std::string out;
  for (const auto& opt : tmpl.options)
    if (opt.condition(features)) out.push_back(opt.label);
  return out;
}

// Emits an item only when exactly one option condition holds.
inline McqOutcome generate_mcq(const Window& window, const WindowFeatures& features,
                               const BaselineStats& baseline, const McqTemplate& tmpl,
                               std::uint64_t seed) {
  McqOutcome out;
  out.satisfied = satisfied_options(tmpl, features);
  if (out.satisfied.size() != 1) return out;

  QaItem item;
  item.qa_id = make_qa_id(window.window_id, tmpl.category, QaFormat::MCQ);
  item.category = tmpl.category;
  item.format = QaFormat::MCQ;
  item.context = render_context(window).text;
  item.question = tmpl.question;

  std::vector<std::size_t> order = {0, 1, 2, 3};
  Rng(derive_seed(seed, "options:" + item.qa_id)).shuffle(order);
  std::string presented;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& opt = tmpl.options[order[pos]];
    const char shown = static_cast<char>('A' + pos);
    item.options.push_back(std::string(1, shown) + ". " + opt.text);
    presented.push_back(opt.label);
    if (opt.label == out.satisfied[0]) item.answer = std::string(1, shown);
  }
  const TemplateInput in{window, features, baseline, std::nullopt};
  item.meta = {window.window_id, window.attack_label, window.index, tmpl.name, seed,
               features_digest(features), out.satisfied, presented, std::nullopt, tmpl.rationale(in)};
  out.item = std::move(item);
  return out;
}

inline McqOutcome generate_mcq(const Window& window, const WindowFeatures& features,
                               const BaselineStats& baseline, int category, std::uint64_t seed) {
  if (category < 1 || category > 10) {
    throw Error(ErrorKind::Argument, "category " + std::to_string(category) + " outside 1..10");
  }
  return generate_mcq(window, features, baseline, make_templates(baseline.thresholds).mcq_for(category),
                      seed);
}

// ---------------------------------------------------------------------------
// Dataset generation

enum class PlanPolicy {
  RoundRobin,   // one TF + one MCQ per window, primary templates
  Extended,     // as RoundRobin, cycling through every template
  BothFormats,  // TF + MCQ for each category that has both
};

inline std::string_view to_string(PlanPolicy p) {
  switch (p) {
    case PlanPolicy::RoundRobin: return "round-robin";
    case PlanPolicy::Extended: return "extended";
    case PlanPolicy::BothFormats: return "both-formats";
  }
  return "round-robin";
}

inline PlanPolicy parse_plan_policy(std::string_view s) {
  if (s == "round-robin") return PlanPolicy::RoundRobin;
  if (s == "extended") return PlanPolicy::Extended;
  if (s == "both-formats") return PlanPolicy::BothFormats;
  throw Error(ErrorKind::Config, "unknown plan policy '" + std::string(s) + "'");
}

struct GenerationPlan {
  PlanPolicy policy = PlanPolicy::RoundRobin;
  std::vector<int> tf_categories = {1, 3, 5, 7, 9};
  std::vector<int> mcq_categories = {2, 4, 6, 8, 10};
};

struct SkipRecord {
  std::string window_id;
  std::string template_name;
  std::string satisfied;
};

struct GenerationReport {
  std::size_t windows = 0;
  std::map<std::string, std::map<std::string, std::size_t>> per_category;  // "1".."10" -> format -> n
  std::map<std::string, std::map<std::string, std::size_t>> per_attack;    // label -> format -> n
  std::map<std::string, std::size_t> per_template;
  std::map<std::string, std::size_t> skips_per_template;
  std::size_t fallbacks = 0;         // MCQ served by a later category in the cycle
  std::size_t dropped_tf = 0;        // TF withheld because its paired MCQ was skipped
  std::vector<SkipRecord> skip_samples;  // first kMaxSkipSamples

  static constexpr std::size_t kMaxSkipSamples = 200;
};

inline nlohmann::json to_json(const GenerationReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : r.skip_samples) {
    samples.push_back({{"window_id", s.window_id}, {"template", s.template_name},
                       {"satisfied", s.satisfied}});
  }
  return {{"windows", r.windows},
          {"per_category", r.per_category},
          {"per_attack", r.per_attack},
          {"per_template", r.per_template},
          {"skips_per_template", r.skips_per_template},
          {"fallbacks", r.fallbacks},
          {"dropped_tf", r.dropped_tf},
          {"skip_samples", std::move(samples)}};
}

struct GeneratedDataset {
  std::vector<QaItem> items;
  GenerationReport report;
};

namespace gen_detail {

struct WindowOutput {
  std::vector<QaItem> items;
  std::vector<SkipRecord> skips;
  std::size_t fallbacks = 0;
  std::size_t dropped_tf = 0;
};

inline WindowOutput generate_for_window(const Window& w, const BaselineStats& baseline,
                                        const TemplateSet& templates, const GenerationPlan& plan,
                                        std::uint64_t seed) {
  WindowOutput out;
  const auto features = extract_features(w, baseline);

  auto try_mcq = [&](const McqTemplate& t) -> std::optional<QaItem> {
    auto r = generate_mcq(w, features, baseline, t, seed);
    if (!r.emitted()) out.skips.push_back({w.window_id, t.name, r.satisfied});
    return std::move(r.item);
  };

  if (plan.policy == PlanPolicy::BothFormats) {
    for (int category = 1; category <= 10; ++category) {
      const TfTemplate* tf = nullptr;
      const McqTemplate* mcq = nullptr;
      for (const auto& t : templates.tf)
        if (t.category == category && !tf) tf = &t;
      for (const auto& t : templates.mcq)
        if (t.category == category && !mcq) mcq = &t;
      if (!tf || !mcq) continue;
      auto m = try_mcq(*mcq);
      if (!m) {
        ++out.dropped_tf;
        continue;
      }
      out.items.push_back(generate_tf(w, features, baseline, *tf, seed));
      out.items.push_back(std::move(*m));
    }
    return out;
  }

  std::vector<const TfTemplate*> tf_cycle;
  std::vector<const McqTemplate*> mcq_cycle;
  if (plan.policy == PlanPolicy::Extended) {
    for (const auto& t : templates.tf) tf_cycle.push_back(&t);
    for (const auto& t : templates.mcq) mcq_cycle.push_back(&t);
  } else {
    for (int c : plan.tf_categories) tf_cycle.push_back(&templates.tf_for(c));
    for (int c : plan.mcq_categories) mcq_cycle.push_back(&templates.mcq_for(c));
  }
  if (tf_cycle.empty() || mcq_cycle.empty()) {
    throw Error(ErrorKind::Config, "generation plan has no TF or no MCQ categories");
  }

  std::optional<QaItem> mcq;
  const std::size_t start = w.index % mcq_cycle.size();
  for (std::size_t step = 0; step < mcq_cycle.size() && !mcq; ++step) {
    mcq = try_mcq(*mcq_cycle[(start + step) % mcq_cycle.size()]);
    if (mcq && step > 0) ++out.fallbacks;
  }
  if (!mcq) {
    ++out.dropped_tf;
    return out;
  }
  out.items.push_back(generate_tf(w, features, baseline, *tf_cycle[w.index % tf_cycle.size()], seed));
  out.items.push_back(std::move(*mcq));
  return out;
}

inline auto order_key(const QaItem& item) {
  return std::make_tuple(static_cast<int>(item.meta.attack_label), item.meta.window_index,
                         item.category, static_cast<int>(item.format));
}

}  // namespace gen_detail

// Output order is (attack label, window index, category, format) whatever the
// thread count.
inline GeneratedDataset generate_dataset(const std::vector<Window>& windows,
                                         const BaselineStats& baseline,
                                         const GenerationPlan& plan, std::uint64_t seed,
                                         std::size_t parallelism = 1) {
  if (windows.empty()) throw Error(ErrorKind::EmptyDataset, "no windows to generate from");
  const auto templates = make_templates(baseline.thresholds);
  std::vector<gen_detail::WindowOutput> outputs(windows.size());
  std::vector<std::exception_ptr> errors(windows.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < windows.size(); i = next++) {
      try {
        outputs[i] = gen_detail::generate_for_window(windows[i], baseline, templates, plan, seed);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(parallelism, windows.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  GeneratedDataset ds;
  ds.report.windows = windows.size();
  for (auto& o : outputs) {
    ds.report.fallbacks += o.fallbacks;
    ds.report.dropped_tf += o.dropped_tf;
    for (auto& s : o.skips) {
      ++ds.report.skips_per_template[s.template_name];
      if (ds.report.skip_samples.size() < GenerationReport::kMaxSkipSamples) {
        ds.report.skip_samples.push_back(std::move(s));
      }
    }
    for (auto& item : o.items) ds.items.push_back(std::move(item));
  }
  std::stable_sort(ds.items.begin(), ds.items.end(), [](const QaItem& a, const QaItem& b) {
    return gen_detail::order_key(a) < gen_detail::order_key(b);
  });
  for (const auto& item : ds.items) {
    const std::string fmt(to_string(item.format));
    ++ds.report.per_category[std::to_string(item.category)][fmt];
    ++ds.report.per_attack[std::string(to_string(item.meta.attack_label))][fmt];
    ++ds.report.per_template[item.meta.template_name];
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const QaItem& item) {
  using nlohmann::json;
  const auto& m = item.meta;
  json meta = {{"window_id", m.window_id},
               {"attack_label", std::string(to_string(m.attack_label))},
               {"window_index", m.window_index},
               {"template", m.template_name},
               {"seed", m.seed},
               {"features_digest", m.features_digest},
               {"rationale", m.rationale}};
  if (item.format == QaFormat::MCQ) {
    meta["canonical_answer"] = m.canonical_answer;
    meta["option_order"] = m.option_order;
  }
  meta["masked_index"] = m.masked_index ? json(*m.masked_index) : json(nullptr);
  return {{"qa_id", item.qa_id},
          {"category", item.category},
          {"format", std::string(to_string(item.format))},
          {"context", item.context},
          {"question", item.question},
          {"options", item.format == QaFormat::MCQ ? json(item.options) : json(nullptr)},
          {"answer", item.answer},
          {"meta", std::move(meta)}};
}

inline QaItem qa_item_from_json(const nlohmann::json& j) {
  try {
    QaItem item;
    item.qa_id = j.at("qa_id").get<std::string>();
    item.category = j.at("category").get<int>();
    item.format = parse_qa_format(j.at("format").get<std::string>());
    item.context = j.at("context").get<std::string>();
    item.question = j.at("question").get<std::string>();
    if (!j.at("options").is_null()) item.options = j.at("options").get<std::vector<std::string>>();
    item.answer = j.at("answer").get<std::string>();
    const auto& m = j.at("meta");
    item.meta.window_id = m.at("window_id").get<std::string>();
    auto label = label_from_string(m.at("attack_label").get<std::string>());
    if (!label) throw Error(ErrorKind::Integrity, "unknown attack label in " + item.qa_id);
    item.meta.attack_label = *label;
    item.meta.window_index = m.at("window_index").get<std::size_t>();
    item.meta.template_name = m.at("template").get<std::string>();
    item.meta.seed = m.at("seed").get<std::uint64_t>();
    item.meta.features_digest = m.at("features_digest").get<std::string>();
    item.meta.rationale = m.value("rationale", std::string());
    item.meta.canonical_answer = m.value("canonical_answer", std::string());
    item.meta.option_order = m.value("option_order", std::string());
    if (m.contains("masked_index") && !m.at("masked_index").is_null()) {
      item.meta.masked_index = m.at("masked_index").get<std::size_t>();
    }
    return item;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Integrity, std::string("malformed dataset record: ") + e.what());
  }
}

}  // namespace canqa
