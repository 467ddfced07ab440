#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "canqa/digest.hpp"
#include "canqa/error.hpp"
#include "canqa/frame.hpp"
#include "canqa/stats.hpp"
#include "canqa/thresholds.hpp"
#include "canqa/window.hpp"
#include "json.hpp"

namespace canqa {

inline constexpr std::size_t kMinBaselineWindows = 10;

struct TransitionKey {
  std::uint32_t id = 0;
  std::uint64_t from = 0;  // payload_word() before
  std::uint64_t to = 0;    // payload_word() after

  friend auto operator<=>(const TransitionKey&, const TransitionKey&) = default;
};

struct ByteRange {
  std::uint8_t min = 0xff;
  std::uint8_t max = 0x00;

  bool contains(std::uint8_t v) const { return v >= min && v <= max; }
  friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

struct TransitionTable {
  std::map<TransitionKey, double> freq;
  double p5 = 0.0;  // percentile over observed frequencies (rank set by thresholds)
};

// Reference statistics learned from attack-free traffic.
struct BaselineStats {
  // config
  std::size_t window_len = kDefaultWindowLen;
  Thresholds thresholds;
  std::string source_digest;
  std::size_t frame_count = 0;
  std::size_t window_count = 0;

  std::set<std::uint32_t> expected_ids;
  std::set<std::uint32_t> per_window_expected_ids;
  std::vector<std::uint32_t> top3_critical_ids;  // by count desc, id asc
  std::map<std::uint32_t, double> id_share;
  double frame_rate_p95 = 0.0;
  double payload_var_p10 = 0.0;
  std::map<std::pair<std::uint32_t, std::uint8_t>, ByteRange> payload_byte_range;
  std::map<TransitionKey, double> transition_freq;
  double transition_freq_p5 = 0.0;
  double rare_id_threshold = 0.01;

  bool is_rare(std::uint32_t id) const {
    auto it = id_share.find(id);
    return it == id_share.end() || it->second < rare_id_threshold;
  }

  // Unseen transitions have frequency 0.
  double transition_frequency(const TransitionKey& key) const {
    auto it = transition_freq.find(key);
    return it == transition_freq.end() ? 0.0 : it->second;
  }

  // Bytes of an (id, index) never observed within DLC have no range.
  std::optional<ByteRange> byte_range(std::uint32_t id, std::size_t index) const {
    auto it = payload_byte_range.find({id, static_cast<std::uint8_t>(index)});
    if (it == payload_byte_range.end()) return std::nullopt;
    return it->second;
  }

  std::string measurement_digest() const { return canqa::measurement_digest(window_len, thresholds); }
};

// Per identifier, counts consecutive (full 8-byte) payload pairs; each
// frequency is relative to that identifier's transition total. Streams are
// walked independently so no transition spans two traces.
inline TransitionTable transition_table(std::span<const FrameStream> streams,
                                        double percentile_rank = 5.0) {
  std::map<TransitionKey, std::uint64_t> counts;
  std::map<std::uint32_t, std::uint64_t> totals;
  for (const auto& stream : streams) {
    std::map<std::uint32_t, std::uint64_t> last;
    for (const auto& f : stream.frames) {
      const auto word = f.payload_word();
      auto it = last.find(f.id);
      if (it != last.end()) {
        ++counts[{f.id, it->second, word}];
        ++totals[f.id];
        it->second = word;
      } else {
        last.emplace(f.id, word);
      }
    }
  }
  TransitionTable table;
  std::vector<double> observed;
  observed.reserve(counts.size());
  for (const auto& [key, c] : counts) {
    const double freq = static_cast<double>(c) / static_cast<double>(totals.at(key.id));
    table.freq.emplace(key, freq);
    observed.push_back(freq);
  }
  if (!observed.empty()) table.p5 = percentile(observed, percentile_rank);
  return table;
}

inline TransitionTable transition_table(const FrameStream& stream, double percentile_rank = 5.0) {
  return transition_table(std::span<const FrameStream>(&stream, 1), percentile_rank);
}

inline std::string stream_digest(std::span<const FrameStream> streams) {
  Sha256 h;
  std::string scratch;
  for (const auto& s : streams) {
    h.update(to_string(s.source_label)).update("\n");
    for (const auto& f : s.frames) {
      std::string line = format_timestamp(f.ts_us) + "," + display_id(f, scratch) + "," +
                         std::to_string(f.dlc);
      for (auto b : f.data) line += "," + hex_byte(b);
      line += ",";
      line += flag_letter(f.flag);
      line += "\n";
      h.update(line);
    }
  }
  return h.hex();
}

inline BaselineStats build_baseline(std::span<const FrameStream> streams, std::size_t window_len,
                                    const Thresholds& thresholds = {}) {
  std::size_t frame_count = 0;
  for (const auto& s : streams) {
    for (const auto& f : s.frames) {
      if (f.flag == Flag::Attack) {
        throw Error(ErrorKind::Contamination,
                    "baseline input contains attack-flagged frames (first at t=" +
                        format_timestamp(f.ts_us) + ")");
      }
    }
    frame_count += s.frames.size();
  }
  if (window_len < kMinWindowLen) {
    throw Error(ErrorKind::Config, "window length below minimum");
  }

  std::vector<Window> windows;
  for (const auto& s : streams) {
    if (s.frames.empty()) continue;
    auto part = segment(s, window_len);
    windows.insert(windows.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  if (windows.size() < kMinBaselineWindows) {
    throw Error(ErrorKind::InsufficientBaseline,
                std::to_string(frame_count) + " frames give " + std::to_string(windows.size()) +
                    " windows of " + std::to_string(window_len) + "; at least " +
                    std::to_string(kMinBaselineWindows) + " are required");
  }

  BaselineStats b;
  b.window_len = window_len;
  b.thresholds = thresholds;
  b.source_digest = stream_digest(streams);
  b.frame_count = frame_count;
  b.window_count = windows.size();
  b.rare_id_threshold = thresholds.rare_id_baseline_share;

  // Frame-level statistics over every baseline frame.
  std::map<std::uint32_t, std::uint64_t> id_counts;
  for (const auto& s : streams) {
    for (const auto& f : s.frames) {
      ++id_counts[f.id];
      for (std::size_t i = 0; i < f.dlc; ++i) {
        auto& r = b.payload_byte_range[{f.id, static_cast<std::uint8_t>(i)}];
        r.min = std::min(r.min, f.data[i]);
        r.max = std::max(r.max, f.data[i]);
      }
    }
  }
  for (const auto& [id, c] : id_counts) {
    b.expected_ids.insert(id);
    b.id_share[id] = static_cast<double>(c) / static_cast<double>(frame_count);
  }
  std::vector<std::pair<std::uint32_t, std::uint64_t>> ranked(id_counts.begin(), id_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (std::size_t i = 0; i < std::min(thresholds.critical_top_n, ranked.size()); ++i) {
    b.top3_critical_ids.push_back(ranked[i].first);
  }

  // Window-level statistics.
  std::map<std::uint32_t, std::size_t> presence;
  std::vector<double> rates;
  std::vector<double> variances;
  rates.reserve(windows.size());
  for (const auto& w : windows) {
    rates.push_back(frame_rate(w));
    std::map<std::uint32_t, PayloadMoments> per_id;
    for (const auto& f : w.frames) per_id[f.id].add(f);
    for (const auto& [id, m] : per_id) {
      ++presence[id];
      variances.push_back(m.variance());
    }
  }
  for (const auto& [id, n] : presence) {
    if (static_cast<double>(n) >=
        thresholds.expected_presence * static_cast<double>(windows.size()) - 1e-9) {
      b.per_window_expected_ids.insert(id);
    }
  }
  b.frame_rate_p95 = percentile(rates, thresholds.frame_rate_pct);
  if (!std::isfinite(b.frame_rate_p95)) {
    throw Error(ErrorKind::InsufficientBaseline,
                "baseline frame-rate percentile is unbounded (windows with collapsed timestamps)");
  }
  b.payload_var_p10 = percentile(variances, thresholds.payload_var_pct);

  auto table = transition_table(streams, thresholds.transition_pct);
  b.transition_freq = std::move(table.freq);
  b.transition_freq_p5 = table.p5;
  return b;
}

inline BaselineStats build_baseline(const FrameStream& stream, std::size_t window_len,
                                    const Thresholds& thresholds = {}) {
  return build_baseline(std::span<const FrameStream>(&stream, 1), window_len, thresholds);
}

// Keeps only Normal-flagged frames; used when the baseline is drawn from the
// attack-free portions of attack traces.
inline FrameStream normal_subset(const FrameStream& stream) {
  FrameStream out;
  out.source_label = stream.source_label;
  out.epoch_us = stream.epoch_us;
  for (const auto& f : stream.frames) {
    if (f.flag == Flag::Normal) out.frames.push_back(f);
  }
  return out;
}

namespace baseline_detail {

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::uint32_t id_from_hex(const std::string& s) {
  auto v = parse_hex_u32(s);
  if (!v) throw Error(ErrorKind::Integrity, "bad identifier '" + s + "' in baseline");
  return *v;
}

inline std::uint64_t u64_from_hex(const std::string& s) {
  if (s.size() != 16) throw Error(ErrorKind::Integrity, "bad payload word '" + s + "'");
  auto hi = parse_hex_u32(s.substr(0, 8));
  auto lo = parse_hex_u32(s.substr(8));
  if (!hi || !lo) throw Error(ErrorKind::Integrity, "bad payload word '" + s + "'");
  return (static_cast<std::uint64_t>(*hi) << 32) | *lo;
}

}  // namespace baseline_detail

inline nlohmann::json to_json(const BaselineStats& b) {
  using namespace baseline_detail;
  using nlohmann::json;
  json ids = json::array();
  for (auto id : b.expected_ids) ids.push_back(format_id(id));
  json per_window = json::array();
  for (auto id : b.per_window_expected_ids) per_window.push_back(format_id(id));
  json top = json::array();
  for (auto id : b.top3_critical_ids) top.push_back(format_id(id));
  json shares = json::object();
  for (const auto& [id, s] : b.id_share) shares[format_id(id)] = s;
  json ranges = json::object();
  for (const auto& [key, r] : b.payload_byte_range) {
    auto& row = ranges[format_id(key.first)];
    if (row.is_null()) row = json::array({nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr, nullptr});
    row[key.second] = json::array({r.min, r.max});
  }
  json transitions = json::array();
  for (const auto& [k, f] : b.transition_freq) {
    transitions.push_back(json::array({format_id(k.id), hex64(k.from), hex64(k.to), f}));
  }
  return {
      {"config",
       {{"window_len", b.window_len},
        {"thresholds", to_json(b.thresholds)},
        {"source_digest", b.source_digest},
        {"measurement_digest", b.measurement_digest()},
        {"frame_count", b.frame_count},
        {"window_count", b.window_count}}},
      {"expected_ids", std::move(ids)},
      {"per_window_expected_ids", std::move(per_window)},
      {"top3_critical_ids", std::move(top)},
      {"id_share", std::move(shares)},
      {"frame_rate_p95", b.frame_rate_p95},
      {"payload_var_p10", b.payload_var_p10},
      {"payload_byte_range", std::move(ranges)},
      {"transition_freq", std::move(transitions)},
      {"transition_freq_p5", b.transition_freq_p5},
      {"rare_id_threshold", b.rare_id_threshold},
  };
}

inline BaselineStats baseline_from_json(const nlohmann::json& j) {
  using namespace baseline_detail;
  BaselineStats b;
  try {
    const auto& cfg = j.at("config");
    b.window_len = cfg.at("window_len").get<std::size_t>();
    b.thresholds = thresholds_from_json(cfg.at("thresholds"));
    b.source_digest = cfg.at("source_digest").get<std::string>();
    b.frame_count = cfg.at("frame_count").get<std::size_t>();
    b.window_count = cfg.at("window_count").get<std::size_t>();
    for (const auto& id : j.at("expected_ids")) b.expected_ids.insert(id_from_hex(id.get<std::string>()));
    for (const auto& id : j.at("per_window_expected_ids"))
      b.per_window_expected_ids.insert(id_from_hex(id.get<std::string>()));
    for (const auto& id : j.at("top3_critical_ids"))
      b.top3_critical_ids.push_back(id_from_hex(id.get<std::string>()));
    for (const auto& [k, v] : j.at("id_share").items()) b.id_share[id_from_hex(k)] = v.get<double>();
    b.frame_rate_p95 = j.at("frame_rate_p95").get<double>();
    b.payload_var_p10 = j.at("payload_var_p10").get<double>();
    for (const auto& [k, row] : j.at("payload_byte_range").items()) {
      const auto id = id_from_hex(k);
      for (std::size_t i = 0; i < row.size() && i < 8; ++i) {
        if (row[i].is_null()) continue;
        b.payload_byte_range[{id, static_cast<std::uint8_t>(i)}] =
            ByteRange{row[i][0].get<std::uint8_t>(), row[i][1].get<std::uint8_t>()};
      }
    }
    for (const auto& t : j.at("transition_freq")) {
      b.transition_freq[{id_from_hex(t[0].get<std::string>()), u64_from_hex(t[1].get<std::string>()),
                         u64_from_hex(t[2].get<std::string>())}] = t[3].get<double>();
    }
    b.transition_freq_p5 = j.at("transition_freq_p5").get<double>();
    b.rare_id_threshold = j.at("rare_id_threshold").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Integrity, std::string("malformed baseline document: ") + e.what());
  }
  if (j.at("config").value("measurement_digest", std::string()) != b.measurement_digest()) {
    throw Error(ErrorKind::Integrity, "baseline measurement digest does not match its config");
  }
  return b;
}

// Content digest of the serialized baseline; datasets record it.
inline std::string baseline_digest(const BaselineStats& b) { return sha256_hex(to_json(b).dump()); }

}  // namespace canqa
