#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "canqa/baseline.hpp"
#include "canqa/digest.hpp"
#include "canqa/error.hpp"
#include "canqa/frame.hpp"
#include "canqa/stats.hpp"
#include "canqa/window.hpp"
#include "json.hpp"

namespace canqa {

// Half-up rounding of a timestamp to the bucket width, as an integer key
// (centiseconds for the default 0.01 s bucket).
inline std::int64_t rounded_bucket(Micros ts_us, Micros bucket_us = 10000) {
  return (ts_us + bucket_us / 2) / bucket_us;
}

inline std::int64_t rounded_bucket(double ts_seconds) {
  return rounded_bucket(static_cast<Micros>(std::llround(ts_seconds * 1e6)));
}

// Every measurement the question templates read, for one window against one
// baseline.
struct WindowFeatures {
  std::size_t frame_count = 0;

  // identity and distribution
  std::size_t distinct_id_count = 0;
  std::map<std::uint32_t, std::size_t> per_id_count;
  double max_id_share = 0.0;
  double single_appearance_share = 0.0;
  std::size_t unexpected_id_count = 0;
  bool missing_expected_id = false;
  double rare_id_share = 0.0;

  // timing
  double frame_rate = 0.0;  // +inf when the window span is zero
  std::vector<Micros> gaps_us;
  bool has_gap_over = false;
  bool all_gaps_under = false;

  // frame format and flags
  double high_dlc_share = 0.0;
  bool any_attack_flag = false;

  // payload
  std::map<std::uint32_t, double> per_id_payload_variance;
  bool payload_out_of_range = false;
  std::size_t rare_transition_count = 0;
  std::size_t constant_payload_id_count = 0;  // IDs seen >= 2 times, one payload

  // safety-critical IDs
  std::map<std::uint32_t, std::size_t> critical_id_counts;
  bool critical_id_attack_flag = false;

  // logging artifacts
  std::map<std::int64_t, std::size_t> timestamp_buckets;
  double max_bucket_share = 0.0;
  std::size_t duplicate_frame_count = 0;

  std::size_t signal_count = 0;

  bool rate_overflow() const { return std::isinf(frame_rate); }
};

inline WindowFeatures extract_features(const Window& window, const BaselineStats& baseline) {
  const auto& frames = window.frames;
  if (frames.size() != baseline.window_len) {
    throw Error(ErrorKind::Compatibility,
                "window " + window.window_id + " has " + std::to_string(frames.size()) +
                    " frames but the baseline was built for windows of " +
                    std::to_string(baseline.window_len));
  }
  const auto& t = baseline.thresholds;
  const double n = static_cast<double>(frames.size());

  WindowFeatures x;
  x.frame_count = frames.size();

  std::map<std::uint32_t, PayloadMoments> moments;
  std::map<std::uint32_t, std::set<std::uint64_t>> payloads;
  std::map<std::uint32_t, std::uint64_t> last_word;
  std::set<std::tuple<Micros, std::uint32_t, std::uint8_t, std::uint64_t>> seen;
  std::size_t high_dlc = 0;
  std::size_t rare_id_frames = 0;

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    ++x.per_id_count[f.id];
    moments[f.id].add(f);
    const auto word = f.payload_word();
    payloads[f.id].insert(word);

    if (f.dlc >= t.high_dlc) ++high_dlc;
    if (f.flag == Flag::Attack) x.any_attack_flag = true;
    if (baseline.is_rare(f.id)) ++rare_id_frames;

    for (std::size_t b = 0; b < f.dlc && !x.payload_out_of_range; ++b) {
      auto range = baseline.byte_range(f.id, b);
      if (!range || !range->contains(f.data[b])) x.payload_out_of_range = true;
    }

    if (auto it = last_word.find(f.id); it != last_word.end()) {
      if (baseline.transition_frequency({f.id, it->second, word}) < baseline.transition_freq_p5) {
        ++x.rare_transition_count;
      }
      it->second = word;
    } else {
      last_word.emplace(f.id, word);
    }

    ++x.timestamp_buckets[rounded_bucket(f.ts_us, t.bucket_us)];
    if (!seen.emplace(f.ts_us, f.id, f.dlc, word).second) ++x.duplicate_frame_count;

    if (i > 0) x.gaps_us.push_back(f.ts_us - frames[i - 1].ts_us);
  }

  x.distinct_id_count = x.per_id_count.size();
  std::size_t max_count = 0;
  std::size_t singles = 0;
  for (const auto& [id, c] : x.per_id_count) {
    max_count = std::max(max_count, c);
    if (c == 1) ++singles;
    if (!baseline.expected_ids.contains(id)) ++x.unexpected_id_count;
  }
  x.max_id_share = static_cast<double>(max_count) / n;
  x.single_appearance_share =
      x.distinct_id_count ? static_cast<double>(singles) / static_cast<double>(x.distinct_id_count) : 0.0;
  for (auto id : baseline.per_window_expected_ids) {
    if (!x.per_id_count.contains(id)) {
      x.missing_expected_id = true;
      break;
    }
  }
  x.rare_id_share = static_cast<double>(rare_id_frames) / n;

  x.frame_rate = frame_rate(window);
  x.has_gap_over = std::any_of(x.gaps_us.begin(), x.gaps_us.end(),
                               [&](Micros g) { return g > t.gap_over_us; });
  x.all_gaps_under = std::all_of(x.gaps_us.begin(), x.gaps_us.end(),
                                 [&](Micros g) { return g < t.gap_under_us; });

  x.high_dlc_share = static_cast<double>(high_dlc) / n;
  for (const auto& [id, m] : moments) x.per_id_payload_variance[id] = m.variance();
  for (const auto& [id, words] : payloads) {
    if (words.size() == 1 && x.per_id_count[id] >= 2) ++x.constant_payload_id_count;
  }

  for (auto id : baseline.top3_critical_ids) {
    auto it = x.per_id_count.find(id);
    x.critical_id_counts[id] = it == x.per_id_count.end() ? 0 : it->second;
  }
  for (const auto& f : frames) {
    if (f.flag == Flag::Attack && x.critical_id_counts.contains(f.id)) {
      x.critical_id_attack_flag = true;
      break;
    }
  }

  std::size_t max_bucket = 0;
  for (const auto& [k, c] : x.timestamp_buckets) max_bucket = std::max(max_bucket, c);
  x.max_bucket_share = static_cast<double>(max_bucket) / n;

  x.signal_count = static_cast<std::size_t>(x.any_attack_flag) +
                   static_cast<std::size_t>(x.missing_expected_id) +
                   static_cast<std::size_t>(x.rare_id_share > t.rare_id_share) +
                   static_cast<std::size_t>(x.high_dlc_share > t.high_dlc_share) +
                   static_cast<std::size_t>(x.has_gap_over);
  return x;
}

inline nlohmann::json to_json(const WindowFeatures& x) {
  using nlohmann::json;
  auto id_map = [](const auto& m) {
    json out = json::object();
    for (const auto& [id, v] : m) out[format_id(id)] = v;
    return out;
  };
  json gaps = json::array();
  for (auto g : x.gaps_us) gaps.push_back(micros_to_seconds(g));
  json buckets = json::object();
  for (const auto& [k, c] : x.timestamp_buckets) buckets[std::to_string(k)] = c;
  return {
      {"frame_count", x.frame_count},
      {"distinct_id_count", x.distinct_id_count},
      {"per_id_count", id_map(x.per_id_count)},
      {"max_id_share", x.max_id_share},
      {"single_appearance_share", x.single_appearance_share},
      {"unexpected_id_count", x.unexpected_id_count},
      {"missing_expected_id", x.missing_expected_id},
      {"rare_id_share", x.rare_id_share},
      {"frame_rate", x.rate_overflow() ? json(nullptr) : json(x.frame_rate)},
      {"frame_rate_overflow", x.rate_overflow()},
      {"gaps", std::move(gaps)},
      {"has_gap_over", x.has_gap_over},
      {"all_gaps_under", x.all_gaps_under},
      {"high_dlc_share", x.high_dlc_share},
      {"any_attack_flag", x.any_attack_flag},
      {"per_id_payload_variance", id_map(x.per_id_payload_variance)},
      {"payload_out_of_range", x.payload_out_of_range},
      {"rare_transition_count", x.rare_transition_count},
      {"constant_payload_id_count", x.constant_payload_id_count},
      {"critical_id_counts", id_map(x.critical_id_counts)},
      {"critical_id_attack_flag", x.critical_id_attack_flag},
      {"timestamp_buckets", std::move(buckets)},
      {"max_bucket_share", x.max_bucket_share},
      {"duplicate_frame_count", x.duplicate_frame_count},
      {"signal_count", x.signal_count},
  };
}

inline std::string features_digest(const WindowFeatures& x) { return sha256_hex(to_json(x).dump()); }

}  // namespace canqa
