#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "canqa/error.hpp"
#include "canqa/frame.hpp"
#include "canqa/ingest.hpp"
#include "canqa/log.hpp"
#include "json.hpp"

namespace canqa {

inline constexpr std::size_t kMinWindowLen = 20;
inline constexpr std::size_t kDefaultWindowLen = 100;

struct Window {
  std::string window_id;  // "<label>:<index>"
  AttackLabel attack_label = AttackLabel::Normal;
  std::size_t index = 0;
  std::size_t first_frame = 0;  // offset into the parent stream
  std::vector<CanFrame> frames;

  Micros duration_us() const {
    return frames.empty() ? 0 : frames.back().ts_us - frames.front().ts_us;
  }
  double duration() const { return static_cast<double>(duration_us()) * 1e-6; }
};

// Frames per second over the window's span. A zero span (collapsed
// timestamps) yields +infinity, which compares above any finite percentile.
inline double frame_rate(const Window& w) {
  const Micros d = w.duration_us();
  if (d == 0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(w.frames.size()) * 1e6 / static_cast<double>(d);
}

inline std::string make_window_id(AttackLabel label, std::size_t index) {
  return std::string(to_string(label)) + ":" + std::to_string(index);
}

// Non-overlapping windows of exactly `window_len` frames; the trailing
// partial window is dropped.
inline std::vector<Window> segment(const FrameStream& stream, std::size_t window_len) {
  if (window_len < kMinWindowLen) {
    throw Error(ErrorKind::Config, "window length " + std::to_string(window_len) +
                                       " is below the minimum of " +
                                       std::to_string(kMinWindowLen));
  }
  if (stream.frames.empty()) throw Error(ErrorKind::Argument, "cannot segment an empty stream");
  const std::size_t count = stream.frames.size() / window_len;
  if (count == 0) {
    log::warn("stream of " + std::to_string(stream.frames.size()) +
              " frames is shorter than one window of " + std::to_string(window_len));
  }
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Window win;
    win.window_id = make_window_id(stream.source_label, w);
    win.attack_label = stream.source_label;
    win.index = w;
    win.first_frame = w * window_len;
    auto first = stream.frames.begin() + static_cast<std::ptrdiff_t>(w * window_len);
    win.frames.assign(first, first + static_cast<std::ptrdiff_t>(window_len));
    windows.push_back(std::move(win));
  }
  return windows;
}

struct RenderedContext {
  std::string text;
  std::optional<std::size_t> masked_index;
};

// One line per frame:
//   t=<ts> ID=<hex> DLC=<d> DATA=<b0 .. b7> FLAG=<R|T|?>
inline std::string render_line(const CanFrame& f, bool mask_flag) {
  std::string scratch;
  std::string line;
  line.reserve(80);
  line += "t=";
  line += format_timestamp(f.ts_us);
  line += " ID=";
  line += display_id(f, scratch);
  line += " DLC=";
  line += std::to_string(f.dlc);
  line += " DATA=";
  for (std::size_t i = 0; i < f.data.size(); ++i) {
    if (i) line += ' ';
    line += hex_byte(f.data[i]);
  }
  line += " FLAG=";
  line += mask_flag ? '?' : flag_letter(f.flag);
  return line;
}

inline RenderedContext render_context(const Window& window,
                                      std::optional<std::size_t> masked_index = std::nullopt) {
  if (masked_index && *masked_index >= window.frames.size()) {
    throw Error(ErrorKind::Argument, "mask index " + std::to_string(*masked_index) +
                                         " outside window of " +
                                         std::to_string(window.frames.size()));
  }
  RenderedContext ctx;
  ctx.masked_index = masked_index;
  ctx.text.reserve(window.frames.size() * 80);
  for (std::size_t i = 0; i < window.frames.size(); ++i) {
    if (i) ctx.text += '\n';
    ctx.text += render_line(window.frames[i], masked_index && *masked_index == i);
  }
  return ctx;
}

inline nlohmann::json window_to_json(const Window& window) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& f : window.frames) frames.push_back(frame_to_json(f));
  return {{"window_id", window.window_id},
          {"attack_label", std::string(to_string(window.attack_label))},
          {"frames", std::move(frames)},
          {"context", render_context(window).text}};
}

}  // namespace canqa
