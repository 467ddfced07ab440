#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canqa/baseline.hpp"
#include "canqa/error.hpp"
#include "canqa/features.hpp"
#include "canqa/thresholds.hpp"
#include "canqa/window.hpp"

namespace canqa {

enum class QaFormat { TF, MCQ };

inline std::string_view to_string(QaFormat f) { return f == QaFormat::TF ? "TF" : "MCQ"; }

inline QaFormat parse_qa_format(std::string_view s) {
  if (s == "TF") return QaFormat::TF;
  if (s == "MCQ") return QaFormat::MCQ;
  throw Error(ErrorKind::Integrity, "unknown question format '" + std::string(s) + "'");
}

struct TemplateInput {
  const Window& window;
  const WindowFeatures& features;
  const BaselineStats& baseline;
  std::optional<std::size_t> masked_index;
};

struct TfTemplate {
  std::string name;
  int category = 0;
  std::string question;
  bool masks_flag = false;
  std::function<bool(const TemplateInput&)> truth;
  std::function<std::string(const TemplateInput&)> rationale;
};

// One answer option in canonical (pre-shuffle) position.
struct OptionRule {
  char label = 'A';
  std::string text;
  std::function<bool(const WindowFeatures&)> condition;
  int priority = 0;
};

struct McqTemplate {
  std::string name;
  int category = 0;
  std::string question;
  std::array<OptionRule, 4> options;
  std::function<std::string(const TemplateInput&)> rationale;
};

namespace tmpl_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string pct(double fraction) { return num(fraction * 100.0) + "%"; }

inline std::string ordinal(double v) {
  const auto n = static_cast<long long>(v);
  if (static_cast<double>(n) != v) return num(v) + "th";
  const char* suffix = "th";
  if (n % 100 < 11 || n % 100 > 13) {
    if (n % 10 == 1) suffix = "st";
    else if (n % 10 == 2) suffix = "nd";
    else if (n % 10 == 3) suffix = "rd";
  }
  return std::to_string(n) + suffix;
}

inline std::string seconds(Micros us) { return num(micros_to_seconds(us)); }

inline std::string yes_no(bool b) { return b ? "yes" : "no"; }

inline bool any_gap_under(const WindowFeatures& x, Micros limit) {
  return std::any_of(x.gaps_us.begin(), x.gaps_us.end(), [&](Micros g) { return g < limit; });
}

}  // namespace tmpl_detail

struct TemplateSet {
  std::vector<TfTemplate> tf;
  std::vector<McqTemplate> mcq;

  const TfTemplate& tf_named(std::string_view name) const {
    for (const auto& t : tf)
      if (t.name == name) return t;
    throw Error(ErrorKind::Argument, "unknown TF template '" + std::string(name) + "'");
  }
  const McqTemplate& mcq_named(std::string_view name) const {
    for (const auto& t : mcq)
      if (t.name == name) return t;
    throw Error(ErrorKind::Argument, "unknown MCQ template '" + std::string(name) + "'");
  }
  // The first registered template of a category is its primary one.
  const TfTemplate& tf_for(int category) const {
    for (const auto& t : tf)
      if (t.category == category) return t;
    throw Error(ErrorKind::Argument, "no TF template for category " + std::to_string(category));
  }
  const McqTemplate& mcq_for(int category) const {
    for (const auto& t : mcq)
      if (t.category == category) return t;
    throw Error(ErrorKind::Argument, "no MCQ template for category " + std::to_string(category));
  }
};

inline TemplateSet make_templates(const Thresholds& t) {
  using namespace tmpl_detail;
  TemplateSet set;

  // ---- True/False -------------------------------------------------------

  set.tf.push_back(
      {"c1_hidden_flag", 1,
       "Given a window where one randomly chosen frame's Flag is hidden, is the hidden frame "
       "labeled as an attack with a non-zero Flag?",
       true,
       [](const TemplateInput& in) {
         return in.window.frames.at(in.masked_index.value()).flag == Flag::Attack;
       },
       [](const TemplateInput& in) {
         const auto k = in.masked_index.value();
         const auto& f = in.window.frames.at(k);
         std::string scratch;
         return "Frame " + std::to_string(k + 1) + " (ID " + display_id(f, scratch) +
                ") has its flag hidden; the log marks it " + std::string(1, flag_letter(f.flag)) +
                ", so it is " + (f.flag == Flag::Attack ? "" : "not ") + "an attack frame.";
       }});

  set.tf.push_back(
      {"c3_frame_rate", 3,
       "Is the window's frame rate (frames per second) above the " + ordinal(t.frame_rate_pct) +
           " percentile of the dataset baseline?",
       false,
       [](const TemplateInput& in) { return in.features.frame_rate > in.baseline.frame_rate_p95; },
       [t](const TemplateInput& in) {
         const auto& x = in.features;
         return "The window holds " + std::to_string(x.frame_count) + " frames over " +
                num(in.window.duration()) + " s, a rate of " +
                (x.rate_overflow() ? std::string("unbounded") : num(x.frame_rate)) +
                " frames/s against a baseline " + ordinal(t.frame_rate_pct) + " percentile of " +
                num(in.baseline.frame_rate_p95) + " frames/s.";
       }});

  set.tf.push_back(
      {"c5_payload_variance", 5,
       "For any ID, is payload variability (variance across payload bytes) below the " +
           ordinal(t.payload_var_pct) + " percentile of the dataset baseline?",
       false,
       [](const TemplateInput& in) {
         for (const auto& [id, v] : in.features.per_id_payload_variance)
           if (v < in.baseline.payload_var_p10) return true;
         return false;
       },
       [t](const TemplateInput& in) {
         double lowest = 0.0;
         std::uint32_t lowest_id = 0;
         bool first = true;
         for (const auto& [id, v] : in.features.per_id_payload_variance) {
           if (first || v < lowest) {
             lowest = v;
             lowest_id = id;
             first = false;
           }
         }
         return "The lowest per-ID payload variance is " + num(lowest) + " (ID " +
                format_id(lowest_id) + ") against a baseline " + ordinal(t.payload_var_pct) +
                " percentile of " + num(in.baseline.payload_var_p10) + ".";
       }});

  set.tf.push_back(
      {"c7_critical_ids", 7,
       "Does any critical-control ID, defined as one of the " + std::to_string(t.critical_top_n) +
           " most frequent baseline IDs, appear more than " + std::to_string(t.critical_count) +
           " times or have any frame labeled as an attack with a non-zero Flag?",
       false,
       [t](const TemplateInput& in) {
         for (const auto& [id, c] : in.features.critical_id_counts)
           if (c > t.critical_count) return true;
         return in.features.critical_id_attack_flag;
       },
       [](const TemplateInput& in) {
         std::string counts;
         for (const auto& [id, c] : in.features.critical_id_counts) {
           if (!counts.empty()) counts += ", ";
           counts += format_id(id) + " x" + std::to_string(c);
         }
         return "Critical IDs in this window: " + (counts.empty() ? std::string("none") : counts) +
                ". Attack-flagged critical frames: " +
                yes_no(in.features.critical_id_attack_flag) + ".";
       }});

  set.tf.push_back(
      {"c9_timestamp_buckets", 9,
       "Do many frames share the same rounded timestamp when times are rounded to " +
           seconds(t.bucket_us) + " seconds, with at least " + pct(t.bucket_share) +
           " of frames in one bucket?",
       false,
       [t](const TemplateInput& in) { return in.features.max_bucket_share >= t.bucket_share; },
       [t](const TemplateInput& in) {
         return "The fullest " + seconds(t.bucket_us) + " s bucket holds " +
                pct(in.features.max_bucket_share) + " of the window's frames.";
       }});

  set.tf.push_back(
      {"c2_distinct_ids", 2, "The number of distinct CAN IDs exceeds " + std::to_string(t.distinct_ids) + ".",
       false,
       [t](const TemplateInput& in) { return in.features.distinct_id_count > t.distinct_ids; },
       [](const TemplateInput& in) {
         return "The window contains " + std::to_string(in.features.distinct_id_count) +
                " distinct CAN IDs.";
       }});

  set.tf.push_back(
      {"c5_constant_payload", 5,
       "Some CAN ID transmits an identical payload across the entire window.", false,
       [](const TemplateInput& in) { return in.features.constant_payload_id_count > 0; },
       [](const TemplateInput& in) {
         return std::to_string(in.features.constant_payload_id_count) +
                " IDs repeat with one unchanging payload across the window.";
       }});

  // ---- Multiple choice ----------------------------------------------------

  const auto sas = t.single_appearance_share;
  const auto dom = t.dominant_share;
  set.mcq.push_back(
      {"c2_single_appearance",
       2,
       "What best explains the presence of many single-appearance CAN IDs in this window?",
       {{{'A',
          "Possible fuzzing or probing behavior (the single-appearance share exceeds " + pct(sas) +
              " and unexpected ID count is greater than 0).",
          [=](const WindowFeatures& x) {
            return x.single_appearance_share > sas && x.unexpected_id_count > 0;
          },
          0},
         {'B', "Normal background variation (the single-appearance share is at most " + pct(sas) + ").",
          [=](const WindowFeatures& x) { return x.single_appearance_share <= sas; }, 1},
         {'C',
          "Logging truncation or window boundary effects (the single-appearance share exceeds " +
              pct(sas) + " and unexpected ID count is 0 and the max ID share is below " + pct(dom) +
              ").",
          [=](const WindowFeatures& x) {
            return x.single_appearance_share > sas && x.unexpected_id_count == 0 &&
                   x.max_id_share < dom;
          },
          2},
         {'D',
          "A single dominant ID masking others (the single-appearance share exceeds " + pct(sas) +
              " and the max ID share is at least " + pct(dom) + ").",
          [=](const WindowFeatures& x) {
            return x.single_appearance_share > sas && x.max_id_share >= dom;
          },
          3}}},
       [](const TemplateInput& in) {
         const auto& x = in.features;
         return "Single-appearance share is " + pct(x.single_appearance_share) +
                ", unexpected IDs number " + std::to_string(x.unexpected_id_count) +
                ", and the max ID share is " + pct(x.max_id_share) + ".";
       }});

  const auto over = t.gap_over_us;
  const auto under = t.gap_under_us;
  // Option A excludes the mixed case: C implies the printed A predicate, so
  // without the exclusion C could never be the single satisfied option.
  set.mcq.push_back(
      {"c4_timing",
       4,
       "Which timing pattern is most consistent with this window?",
       {{{'A', "Suppression-like behavior (at least one gap exceeds " + seconds(over) + " seconds).",
          [=](const WindowFeatures& x) { return x.has_gap_over && !any_gap_under(x, under); }, 0},
         {'B', "Flooding-like behavior (all gaps are below " + seconds(under) + " seconds).",
          [=](const WindowFeatures& x) { return x.all_gaps_under; }, 1},
         {'C',
          "Mixed or ambiguous timing signals (at least one gap exceeds " + seconds(over) +
              " seconds and at least one gap is below " + seconds(under) + " seconds).",
          [=](const WindowFeatures& x) { return x.has_gap_over && any_gap_under(x, under); }, 2},
         {'D',
          "Normal periodic traffic (no gap exceeds " + seconds(over) +
              " seconds and not all gaps are below " + seconds(under) + " seconds).",
          [=](const WindowFeatures& x) { return !x.has_gap_over && !x.all_gaps_under; }, 3}}},
       [](const TemplateInput& in) {
         const auto& g = in.features.gaps_us;
         const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
         return "Inter-arrival gaps range from " + seconds(*lo) + " s to " + seconds(*hi) + " s.";
       }});

  const auto hd = t.high_dlc_share;
  set.mcq.push_back(
      {"c6_protocol",
       6,
       "What is the most plausible protocol-level explanation for this window, where high DLC "
       "means DLC " +
           std::to_string(t.high_dlc) + " or higher and the share exceeds " + pct(hd) + "?",
       {{{'A',
          "CAN arbitration effects (the high-DLC share exceeds " + pct(hd) +
              " and no non-zero Flag is present and at least one payload byte is outside its "
              "baseline range).",
          [=](const WindowFeatures& x) {
            return x.high_dlc_share > hd && !x.any_attack_flag && x.payload_out_of_range;
          },
          0},
         {'B', "Normal change in driving conditions (the high-DLC share does not exceed " + pct(hd) + ").",
          [=](const WindowFeatures& x) { return x.high_dlc_share <= hd; }, 1},
         {'C',
          "Abnormal frame composition consistent with injected or altered traffic (the high-DLC "
          "share exceeds " +
              pct(hd) + " and any non-zero Flag is present).",
          [=](const WindowFeatures& x) { return x.high_dlc_share > hd && x.any_attack_flag; }, 2},
         {'D',
          "Payload value scaling differences (the high-DLC share exceeds " + pct(hd) +
              " and no payload byte is outside its baseline range).",
          [=](const WindowFeatures& x) { return x.high_dlc_share > hd && !x.payload_out_of_range; },
          3}}},
       [](const TemplateInput& in) {
         const auto& x = in.features;
         return "High-DLC share is " + pct(x.high_dlc_share) + "; attack flag present: " +
                yes_no(x.any_attack_flag) + "; payload byte outside its baseline range: " +
                yes_no(x.payload_out_of_range) + ".";
       }});

  set.mcq.push_back(
      {"c8_transitions",
       8,
       "What does the presence of rare payload transitions most strongly indicate, where rare "
       "means baseline occurrence frequency below the " +
           ordinal(t.transition_pct) + " percentile?",
       {{{'A',
          "Definitive proof of attack (a rare transition occurs and any non-zero Flag is present).",
          [](const WindowFeatures& x) { return x.rare_transition_count > 0 && x.any_attack_flag; }, 0},
         {'B', "Baseline modeling artifact unless repeated (a rare transition occurs only once).",
          [](const WindowFeatures& x) { return x.rare_transition_count == 1; }, 1},
         {'C',
          "Implausible state transitions requiring investigation (a rare transition occurs more "
          "than once).",
          [](const WindowFeatures& x) { return x.rare_transition_count > 1; }, 2},
         {'D', "Normal but infrequent behavior (no rare transition occurs).",
          [](const WindowFeatures& x) { return x.rare_transition_count == 0; }, 3}}},
       [](const TemplateInput& in) {
         return "Rare payload transitions in the window: " +
                std::to_string(in.features.rare_transition_count) +
                "; attack flag present: " + yes_no(in.features.any_attack_flag) + ".";
       }});

  const auto signals = t.min_signals;
  set.mcq.push_back(
      {"c10_signals",
       10,
       "How should multiple independent anomaly signals in this window be interpreted, where "
       "signals include non-zero Flag presence, missing expected ID, rare-ID share above " +
           pct(t.rare_id_share) + ", high DLC share above " + pct(hd) + ", or a gap above " +
           seconds(over) + " seconds?",
       {{{'A', "As weak but notable concern (exactly one signal is present).",
          [](const WindowFeatures& x) { return x.signal_count == 1; }, 0},
         {'B',
          "As coordinated anomalous behavior (at least " + std::to_string(signals) +
              " signals are present and no non-zero Flag is present).",
          [=](const WindowFeatures& x) { return x.signal_count >= signals && !x.any_attack_flag; }, 1},
         {'C',
          "As definitive proof of attack (at least " + std::to_string(signals) +
              " signals are present and a non-zero Flag is present).",
          [=](const WindowFeatures& x) { return x.signal_count >= signals && x.any_attack_flag; }, 2},
         {'D', "As unrelated coincidences (zero signals are present).",
          [](const WindowFeatures& x) { return x.signal_count == 0; }, 3}}},
       [t](const TemplateInput& in) {
         const auto& x = in.features;
         std::vector<std::string> present;
         if (x.any_attack_flag) present.emplace_back("non-zero Flag");
         if (x.missing_expected_id) present.emplace_back("missing expected ID");
         if (x.rare_id_share > t.rare_id_share) present.emplace_back("rare-ID share");
         if (x.high_dlc_share > t.high_dlc_share) present.emplace_back("high DLC share");
         if (x.has_gap_over) present.emplace_back("long gap");
         std::string list;
         for (const auto& p : present) list += (list.empty() ? "" : ", ") + p;
         return "Signals present: " + (list.empty() ? std::string("none") : list) + " (" +
                std::to_string(x.signal_count) + " total).";
       }});

  const auto even = t.even_share;
  set.mcq.push_back(
      {"c3_distribution",
       3,
       "Which traffic pattern best describes how frames are distributed across CAN IDs?",
       {{{'A',
          "Highly variable with no clear pattern (the single-appearance share exceeds " + pct(sas) +
              " and the max ID share is at most " + pct(dom) + ").",
          [=](const WindowFeatures& x) {
            return x.single_appearance_share > sas && x.max_id_share <= dom;
          },
          0},
         {'B', "Strongly dominated by a single ID (the max ID share exceeds " + pct(dom) + ").",
          [=](const WindowFeatures& x) { return x.max_id_share > dom; }, 1},
         {'C', "Evenly distributed across many IDs (the max ID share is at most " + pct(even) + ").",
          [=](const WindowFeatures& x) { return x.max_id_share <= even; }, 2},
         {'D',
          "Moderately skewed toward a few IDs (the max ID share is above " + pct(even) +
              " and at most " + pct(dom) + ").",
          [=](const WindowFeatures& x) { return x.max_id_share > even && x.max_id_share <= dom; },
          3}}},
       [](const TemplateInput& in) {
         return "The max ID share is " + pct(in.features.max_id_share) +
                " and the single-appearance share is " +
                pct(in.features.single_appearance_share) + ".";
       }});

  return set;
}

}  // namespace canqa
