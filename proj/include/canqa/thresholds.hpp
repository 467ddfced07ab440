#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "canqa/digest.hpp"
#include "canqa/frame.hpp"
#include "json.hpp"

namespace canqa {

// Every numeric cut-off used by the question categories. All of them can be
// overridden from the run config.
struct Thresholds {
  double single_appearance_share = 0.30;  // identity structure, distribution
  double dominant_share = 0.50;           // max ID share: dominance
  double even_share = 0.20;               // max ID share: even spread
  std::size_t distinct_ids = 30;          // distinct-ID statement
  Micros gap_over_us = 1000;              // 0.001 s
  Micros gap_under_us = 500;              // 0.0005 s
  double frame_rate_pct = 95.0;
  double payload_var_pct = 10.0;
  double transition_pct = 5.0;
  std::size_t critical_top_n = 3;
  std::size_t critical_count = 15;  // strictly more than this
  Micros bucket_us = 10000;         // 0.01 s
  double bucket_share = 0.05;
  unsigned high_dlc = 8;
  double high_dlc_share = 0.50;
  double rare_id_share = 0.30;
  std::size_t min_signals = 2;
  double expected_presence = 0.99;  // per-window expected ID
  double rare_id_baseline_share = 0.01;

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

inline double micros_to_seconds(Micros us) { return static_cast<double>(us) * 1e-6; }
inline Micros seconds_to_micros(double s) { return std::llround(s * 1e6); }

inline nlohmann::json to_json(const Thresholds& t) {
  return {
      {"single_appearance_share", t.single_appearance_share},
      {"dominant_share", t.dominant_share},
      {"even_share", t.even_share},
      {"distinct_ids", t.distinct_ids},
      {"gap_over_s", micros_to_seconds(t.gap_over_us)},
      {"gap_under_s", micros_to_seconds(t.gap_under_us)},
      {"frame_rate_pct", t.frame_rate_pct},
      {"payload_var_pct", t.payload_var_pct},
      {"transition_pct", t.transition_pct},
      {"critical_top_n", t.critical_top_n},
      {"critical_count", t.critical_count},
      {"bucket_s", micros_to_seconds(t.bucket_us)},
      {"bucket_share", t.bucket_share},
      {"high_dlc", t.high_dlc},
      {"high_dlc_share", t.high_dlc_share},
      {"rare_id_share", t.rare_id_share},
      {"min_signals", t.min_signals},
      {"expected_presence", t.expected_presence},
      {"rare_id_baseline_share", t.rare_id_baseline_share},
  };
}

inline Thresholds thresholds_from_json(const nlohmann::json& j) {
  Thresholds t;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  auto get_us = [&j](const char* key, Micros& field) {
    if (j.contains(key)) field = seconds_to_micros(j.at(key).get<double>());
  };
  get("single_appearance_share", t.single_appearance_share);
  get("dominant_share", t.dominant_share);
  get("even_share", t.even_share);
  get("distinct_ids", t.distinct_ids);
  get_us("gap_over_s", t.gap_over_us);
  get_us("gap_under_s", t.gap_under_us);
  get("frame_rate_pct", t.frame_rate_pct);
  get("payload_var_pct", t.payload_var_pct);
  get("transition_pct", t.transition_pct);
  get("critical_top_n", t.critical_top_n);
  get("critical_count", t.critical_count);
  get_us("bucket_s", t.bucket_us);
  get("bucket_share", t.bucket_share);
  get("high_dlc", t.high_dlc);
  get("high_dlc_share", t.high_dlc_share);
  get("rare_id_share", t.rare_id_share);
  get("min_signals", t.min_signals);
  get("expected_presence", t.expected_presence);
  get("rare_id_baseline_share", t.rare_id_baseline_share);
  return t;
}

// Identity of the measurement setup shared by baseline and dataset.
inline std::string measurement_digest(std::size_t window_len, const Thresholds& t) {
  const nlohmann::json j = {{"window_len", window_len}, {"thresholds", to_json(t)}};
  return sha256_hex(j.dump());
}

}  // namespace canqa
