#pragma once

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "canqa/error.hpp"
#include "canqa/frame.hpp"
#include "canqa/log.hpp"
#include "json.hpp"

namespace canqa {

// car-hacking-txt is the "Timestamp: ... ID: ... DLC: ..." layout of the
// dataset's attack-free capture; it is only picked when named or detected.
enum class FormatHint { Auto, CarHackingCsv, CarHackingTxt };

inline std::string_view to_string(FormatHint hint) {
  switch (hint) {
    case FormatHint::Auto: return "auto";
    case FormatHint::CarHackingCsv: return "car-hacking-csv";
    case FormatHint::CarHackingTxt: return "car-hacking-txt";
  }
  return "auto";
}

inline FormatHint parse_format_hint(std::string_view s) {
  if (s == "auto") return FormatHint::Auto;
  if (s == "car-hacking-csv") return FormatHint::CarHackingCsv;
  if (s == "car-hacking-txt") return FormatHint::CarHackingTxt;
  throw Error(ErrorKind::Argument, "unknown format hint '" + std::string(s) + "'");
}

namespace ingest_detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline bool parse_byte(std::string_view tok, std::uint8_t& out) {
  if (tok.empty() || tok.size() > 2) return false;
  auto v = parse_hex_u32(tok);
  if (!v) return false;
  out = static_cast<std::uint8_t>(*v);
  return true;
}

inline bool parse_id(std::string_view tok, CanFrame& f, std::string& reason) {
  auto id = parse_hex_u32(tok);
  if (!id) {
    reason = "identifier is not hex";
    return false;
  }
  if (*id > kMaxCanId) {
    reason = "identifier exceeds 29 bits";
    return false;
  }
  f.id = *id;
  f.id_text = std::string(tok);
  return true;
}

inline bool parse_dlc(std::string_view tok, CanFrame& f, std::string& reason) {
  if (tok.size() != 1 || tok[0] < '0' || tok[0] > '9') {
    reason = "DLC is not a digit";
    return false;
  }
  const int dlc = tok[0] - '0';
  if (dlc > kMaxDlc) {
    reason = "DLC above 8";
    return false;
  }
  f.dlc = static_cast<std::uint8_t>(dlc);
  return true;
}

// timestamp,id,dlc,b0..b{dlc-1},flag
inline bool parse_csv_line(std::string_view line, CanFrame& f, std::string& reason) {
  const auto cols = split(line, ',');
  if (cols.size() < 4) {
    reason = "too few columns";
    return false;
  }
  f = CanFrame{};
  auto ts = parse_timestamp(cols[0]);
  if (!ts) {
    reason = "bad timestamp";
    return false;
  }
  f.ts_us = *ts;
  if (!parse_id(cols[1], f, reason)) return false;
  if (!parse_dlc(cols[2], f, reason)) return false;
  if (cols.size() != 4u + f.dlc) {
    reason = "expected " + std::to_string(f.dlc) + " data columns, found " +
             std::to_string(cols.size() - 4);
    return false;
  }
  for (std::size_t i = 0; i < f.dlc; ++i) {
    if (!parse_byte(cols[3 + i], f.data[i])) {
      reason = "data byte " + std::to_string(i) + " is not hex";
      return false;
    }
  }
  const auto flag_tok = cols.back();
  auto flag = flag_tok.size() == 1 ? flag_from_letter(flag_tok[0]) : std::nullopt;
  if (!flag) {
    reason = "flag is not R or T";
    return false;
  }
  f.flag = *flag;
  return true;
}

// Timestamp: <ts>  ID: <hex>  <bits>  DLC: <n>  b0 .. b{n-1}
inline bool parse_txt_line(std::string_view line, CanFrame& f, std::string& reason) {
  const auto toks = split_ws(line);
  if (toks.size() < 7 || toks[0] != "Timestamp:" || toks[2] != "ID:" || toks[5] != "DLC:") {
    reason = "not a Timestamp:/ID:/DLC: record";
    return false;
  }
  f = CanFrame{};
  auto ts = parse_timestamp(toks[1]);
  if (!ts) {
    reason = "bad timestamp";
    return false;
  }
  f.ts_us = *ts;
  if (!parse_id(toks[3], f, reason)) return false;
  if (!parse_dlc(toks[6], f, reason)) return false;
  if (toks.size() != 7u + f.dlc) {
    reason = "expected " + std::to_string(f.dlc) + " data bytes, found " +
             std::to_string(toks.size() - 7);
    return false;
  }
  for (std::size_t i = 0; i < f.dlc; ++i) {
    if (!parse_byte(toks[7 + i], f.data[i])) {
      reason = "data byte " + std::to_string(i) + " is not hex";
      return false;
    }
  }
  f.flag = Flag::Normal;
  return true;
}

inline bool looks_like_header(std::string_view line) {
  const auto first = split(line, ',').front();
  if (first.empty() || !std::isalpha(static_cast<unsigned char>(first.front()))) return false;
  return detail::lower(first).find("timestamp") != std::string::npos &&
         line.find(',') != std::string_view::npos;
}

using LineReader = std::function<bool(std::string&)>;

inline bool has_suffix(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace ingest_detail

// Stable chronological sort. Consecutive duplicates are kept.
inline FrameStream normalize_stream(FrameStream stream) {
  std::stable_sort(stream.frames.begin(), stream.frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.ts_us < b.ts_us; });
  return stream;
}

inline FrameStream parse_lines(const ingest_detail::LineReader& next_line, FormatHint hint,
                               AttackLabel label) {
  using namespace ingest_detail;
  FrameStream stream;
  stream.source_label = label;
  FormatHint format = hint;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_content = false;
  CanFrame frame;
  std::string reason;
  while (next_line(raw)) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    if (!seen_content) {
      seen_content = true;
      if (format != FormatHint::CarHackingTxt && looks_like_header(line)) {
        ++stream.header_lines;
        continue;
      }
    }
    if (format == FormatHint::Auto) {
      if (parse_csv_line(line, frame, reason)) {
        format = FormatHint::CarHackingCsv;
      } else if (parse_txt_line(line, frame, reason)) {
        format = FormatHint::CarHackingTxt;
      } else {
        throw Error(ErrorKind::FormatDetection,
                    "cannot detect log format at line " + std::to_string(line_no) + ": '" +
                        std::string(line.substr(0, 120)) + "'");
      }
    }
    const bool ok = format == FormatHint::CarHackingCsv ? parse_csv_line(line, frame, reason)
                                                        : parse_txt_line(line, frame, reason);
    if (ok) {
      stream.frames.push_back(std::move(frame));
      continue;
    }
    ++stream.rejected_count;
    if (stream.rejections.size() < FrameStream::kMaxRecordedRejections) {
      stream.rejections.push_back({line_no, reason});
    }
    if (stream.rejected_count <= 20) {
      log::warn("line " + std::to_string(line_no) + " rejected: " + reason);
    }
  }
  if (stream.rejected_count > 20) {
    log::warn(std::to_string(stream.rejected_count) + " malformed lines rejected in total");
  }
  if (stream.frames.empty()) {
    throw Error(ErrorKind::EmptyStream, "no parseable frames");
  }
  stream = normalize_stream(std::move(stream));
  stream.epoch_us = stream.frames.front().ts_us;
  for (auto& f : stream.frames) f.ts_us -= stream.epoch_us;
  return stream;
}

inline FrameStream parse_log(std::istream& in, FormatHint hint, AttackLabel label) {
  return parse_lines([&in](std::string& line) { return static_cast<bool>(std::getline(in, line)); },
                     hint, label);
}

inline FrameStream parse_log(std::string_view text, FormatHint hint, AttackLabel label) {
  std::size_t pos = 0;
  return parse_lines(
      [&](std::string& line) {
        if (pos >= text.size()) return false;
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        line.assign(text.substr(pos, end - pos));
        pos = end + 1;
        return true;
      },
      hint, label);
}

// Opens plain or ".gz" logs. The label defaults to one guessed from the file
// name, falling back to Normal.
inline FrameStream parse_log_file(const std::string& path, FormatHint hint,
                                  std::optional<AttackLabel> label = std::nullopt) {
  const AttackLabel tag = label.value_or(label_from_path(path).value_or(AttackLabel::Normal));
  if (ingest_detail::has_suffix(path, ".gz")) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
    std::unique_ptr<gzFile_s, decltype(&gzclose)> guard(gz, &gzclose);
    std::vector<char> buf(1 << 16);
    bool read_error = false;
    auto reader = [&](std::string& line) {
      line.clear();
      while (true) {
        if (!gzgets(gz, buf.data(), static_cast<int>(buf.size()))) {
          int err = 0;
          gzerror(gz, &err);
          if (err != Z_OK && err != Z_STREAM_END) read_error = true;
          return !line.empty();
        }
        line.append(buf.data());
        if (!line.empty() && line.back() == '\n') {
          line.pop_back();
          return true;
        }
      }
    };
    auto stream = parse_lines(reader, hint, tag);
    if (read_error) throw Error(ErrorKind::Io, "corrupt gzip stream in '" + path + "'");
    return stream;
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path + "'");
  auto stream = parse_log(in, hint, tag);
  if (in.bad()) throw Error(ErrorKind::Io, "read failure on '" + path + "'");
  return stream;
}

// Writes the stream back in the CSV layout, restoring absolute timestamps.
inline void write_csv(const FrameStream& stream, std::ostream& out) {
  std::string scratch;
  for (const auto& f : stream.frames) {
    out << format_timestamp(f.ts_us + stream.epoch_us) << ',' << display_id(f, scratch) << ','
        << static_cast<int>(f.dlc);
    for (std::size_t i = 0; i < f.dlc; ++i) out << ',' << hex_byte(f.data[i]);
    out << ',' << flag_letter(f.flag) << '\n';
  }
}

inline nlohmann::json frame_to_json(const CanFrame& f) {
  std::string scratch;
  nlohmann::json data = nlohmann::json::array();
  for (auto b : f.data) data.push_back(hex_byte(b));
  return {{"ts", f.timestamp()},
          {"id_hex", display_id(f, scratch)},
          {"dlc", f.dlc},
          {"data", std::move(data)},
          {"flag", std::string(1, flag_letter(f.flag))}};
}

inline CanFrame frame_from_json(const nlohmann::json& j) {
  CanFrame f;
  f.ts_us = std::llround(j.at("ts").get<double>() * 1e6);
  const auto id_text = j.at("id_hex").get<std::string>();
  auto id = parse_hex_u32(id_text);
  if (!id) throw Error(ErrorKind::Integrity, "bad id_hex '" + id_text + "'");
  f.id = *id;
  f.id_text = id_text;
  f.dlc = j.at("dlc").get<std::uint8_t>();
  const auto& data = j.at("data");
  if (data.size() != 8) throw Error(ErrorKind::Integrity, "frame data must have 8 bytes");
  for (std::size_t i = 0; i < 8; ++i) {
    auto v = parse_hex_u32(data[i].get<std::string>());
    if (!v || *v > 0xff) throw Error(ErrorKind::Integrity, "bad data byte");
    f.data[i] = static_cast<std::uint8_t>(*v);
  }
  auto flag = flag_from_letter(j.at("flag").get<std::string>().at(0));
  if (!flag) throw Error(ErrorKind::Integrity, "bad flag");
  f.flag = *flag;
  if (auto bad = check_frame(f)) throw Error(ErrorKind::Integrity, *bad);
  return f;
}

inline void write_frames_jsonl(const FrameStream& stream, std::ostream& out) {
  for (const auto& f : stream.frames) out << frame_to_json(f).dump() << '\n';
}

}  // namespace canqa
