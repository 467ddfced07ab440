#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canqa/error.hpp"

namespace canqa {

// Timestamps are held as integer microseconds so gap thresholds and
// centisecond bucketing compare exactly.
using Micros = std::int64_t;

inline constexpr std::uint32_t kMaxCanId = (1u << 29) - 1;
inline constexpr std::uint8_t kMaxDlc = 8;

enum class Flag : std::uint8_t { Normal, Attack };

inline char flag_letter(Flag f) { return f == Flag::Attack ? 'T' : 'R'; }

inline std::optional<Flag> flag_from_letter(char c) {
  switch (c) {
    case 'R': return Flag::Normal;
    case 'T': return Flag::Attack;
    default: return std::nullopt;
  }
}

enum class AttackLabel : std::uint8_t { DoS, Fuzzy, Gear, RPM, Normal };

inline constexpr std::array<AttackLabel, 5> kAllLabels = {
    AttackLabel::DoS, AttackLabel::Fuzzy, AttackLabel::Gear, AttackLabel::RPM,
    AttackLabel::Normal};

inline std::string_view to_string(AttackLabel label) {
  switch (label) {
    case AttackLabel::DoS: return "DoS";
    case AttackLabel::Fuzzy: return "Fuzzy";
    case AttackLabel::Gear: return "Gear";
    case AttackLabel::RPM: return "RPM";
    case AttackLabel::Normal: return "Normal";
  }
  return "Normal";
}

namespace detail {
inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}
}  // namespace detail

inline std::optional<AttackLabel> label_from_string(std::string_view s) {
  const std::string l = detail::lower(s);
  for (AttackLabel label : kAllLabels) {
    if (detail::lower(to_string(label)) == l) return label;
  }
  return std::nullopt;
}

// Guesses the attack tag from a Car Hacking style file name
// ("DoS_dataset.csv", "gear_dataset.csv", "normal_run_data.txt", ...).
inline std::optional<AttackLabel> label_from_path(std::string_view path) {
  const auto slash = path.find_last_of("/\\");
  const std::string name =
      detail::lower(slash == std::string_view::npos ? path : path.substr(slash + 1));
  if (name.find("dos") != std::string::npos) return AttackLabel::DoS;
  if (name.find("fuzzy") != std::string::npos) return AttackLabel::Fuzzy;
  if (name.find("gear") != std::string::npos) return AttackLabel::Gear;
  if (name.find("rpm") != std::string::npos) return AttackLabel::RPM;
  if (name.find("normal") != std::string::npos) return AttackLabel::Normal;
  return std::nullopt;
}

struct CanFrame {
  Micros ts_us = 0;
  std::uint32_t id = 0;
  std::string id_text;  // identifier as spelled in the source log
  std::uint8_t dlc = 0;
  std::array<std::uint8_t, 8> data{};  // bytes at index >= dlc are padding
  Flag flag = Flag::Normal;

  double timestamp() const { return static_cast<double>(ts_us) * 1e-6; }
  bool is_padding(std::size_t index) const { return index >= dlc; }

  // Whole payload packed big-endian; used as the transition key.
  std::uint64_t payload_word() const {
    std::uint64_t w = 0;
    for (auto b : data) w = (w << 8) | b;
    return w;
  }

  friend bool operator==(const CanFrame&, const CanFrame&) = default;
};

inline std::string format_id(std::uint32_t id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, id > 0x7ff ? "%08x" : "%04x", id);
  return buf;
}

inline const std::string& display_id(const CanFrame& f, std::string& scratch) {
  if (!f.id_text.empty()) return f.id_text;
  scratch = format_id(f.id);
  return scratch;
}

inline std::string format_timestamp(Micros us) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%lld.%06lld", static_cast<long long>(us / 1000000),
                static_cast<long long>(us % 1000000));
  return buf;
}

inline std::string hex_byte(std::uint8_t b) {
  static constexpr char kHex[] = "0123456789abcdef";
  return {kHex[b >> 4], kHex[b & 0xf]};
}

// Parses a non-negative decimal seconds value into microseconds. Digits past
// the sixth decimal are rounded half-up.
inline std::optional<Micros> parse_timestamp(std::string_view s) {
  if (s.empty()) return std::nullopt;
  Micros whole = 0;
  std::size_t i = 0;
  bool any = false;
  for (; i < s.size() && s[i] != '.'; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
    if (whole > 9'000'000'000'000LL) return std::nullopt;
    whole = whole * 10 + (s[i] - '0');
    any = true;
  }
  Micros frac = 0;
  int digits = 0;
  bool round_up = false;
  if (i < s.size()) {
    ++i;  // '.'
    for (; i < s.size(); ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) return std::nullopt;
      any = true;
      if (digits < 6) {
        frac = frac * 10 + (s[i] - '0');
        ++digits;
      } else if (digits == 6) {
        round_up = s[i] >= '5';
        ++digits;
      }
    }
  }
  if (!any) return std::nullopt;
  for (int d = std::min(digits, 6); d < 6; ++d) frac *= 10;
  return whole * 1'000'000 + frac + (round_up ? 1 : 0);
}

inline std::optional<std::uint32_t> parse_hex_u32(std::string_view s) {
  if (s.empty() || s.size() > 8) return std::nullopt;
  std::uint32_t v = 0;
  for (char c : s) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint32_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint32_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint32_t>(c - 'A' + 10);
    else return std::nullopt;
  }
  return v;
}

// Returns the first violated invariant, or nullopt for a valid frame.
inline std::optional<std::string> check_frame(const CanFrame& f) {
  if (f.ts_us < 0) return "negative timestamp";
  if (f.id > kMaxCanId) return "identifier exceeds 29 bits";
  if (f.dlc > kMaxDlc) return "DLC above 8";
  for (std::size_t i = f.dlc; i < f.data.size(); ++i) {
    if (f.data[i] != 0) return "non-zero padding byte";
  }
  return std::nullopt;
}

struct Rejection {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

struct FrameStream {
  std::vector<CanFrame> frames;
  AttackLabel source_label = AttackLabel::Normal;
  std::size_t rejected_count = 0;
  std::size_t header_lines = 0;
  Micros epoch_us = 0;  // absolute time that was rebased to t=0
  std::vector<Rejection> rejections;  // first kMaxRecordedRejections only

  static constexpr std::size_t kMaxRecordedRejections = 1000;
};

}  // namespace canqa
