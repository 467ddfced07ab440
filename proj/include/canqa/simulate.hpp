#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "canqa/digest.hpp"
#include "canqa/frame.hpp"
#include "canqa/ingest.hpp"

// Synthetic in-vehicle traffic shaped like the public Car-Hacking captures:
// periodic ECUs with counters and slowly drifting signals, plus injected
// DoS, fuzzing, and gear/RPM spoofing bursts.
namespace canqa::sim {

enum class ByteKind : std::uint8_t { Const, Counter, Drift, Noise };

struct Ecu {
  std::uint32_t id;
  Micros period_us;
  std::uint8_t dlc;
  std::array<ByteKind, 8> kinds;
  std::array<std::uint8_t, 8> init;
};

inline std::vector<Ecu> default_ecus() {
  using K = ByteKind;
  const std::array<K, 8> engine{K::Drift, K::Drift, K::Const, K::Drift, K::Const, K::Const, K::Counter, K::Noise};
  const std::array<K, 8> body{K::Const, K::Drift, K::Const, K::Const, K::Counter, K::Const, K::Const, K::Const};
  const std::array<K, 8> flat{K::Const, K::Const, K::Const, K::Const, K::Const, K::Const, K::Const, K::Const};
  const std::array<K, 8> chassis{K::Drift, K::Const, K::Drift, K::Const, K::Drift, K::Const, K::Counter, K::Const};
  return {
      {0x0316, 10000, 8, engine, {0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6f}},
      {0x018f, 10000, 8, engine, {0xfe, 0x5b, 0x00, 0x00, 0x00, 0x3c, 0x00, 0x00}},
      {0x0260, 10000, 8, chassis, {0x19, 0x21, 0x22, 0x30, 0x08, 0x8e, 0x6d, 0x3a}},
      {0x02a0, 10000, 8, chassis, {0x64, 0x00, 0x9a, 0x1d, 0x97, 0x02, 0xbd, 0x00}},
      {0x0329, 10000, 8, engine, {0x40, 0xbb, 0x7f, 0x14, 0x11, 0x20, 0x00, 0x14}},
      {0x0545, 10000, 8, body, {0xd8, 0x00, 0x00, 0x8a, 0x00, 0x00, 0x00, 0x00}},
      {0x0002, 10000, 8, chassis, {0x00, 0x00, 0x00, 0x00, 0x00, 0x03, 0x03, 0xa0}},
      {0x0153, 10000, 8, chassis, {0x00, 0x21, 0x10, 0xff, 0x00, 0xff, 0x00, 0x00}},
      {0x02c0, 10000, 8, flat, {0x14, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {0x0130, 10000, 8, chassis, {0x08, 0x80, 0x00, 0xff, 0x42, 0x80, 0x0a, 0x9b}},
      {0x0131, 20000, 8, chassis, {0x17, 0x80, 0x00, 0x00, 0x65, 0x7f, 0x0b, 0x9f}},
      {0x0140, 20000, 8, chassis, {0x00, 0x00, 0x00, 0x00, 0x0c, 0x00, 0x2a, 0x1a}},
      {0x0350, 20000, 8, body, {0x05, 0x28, 0x84, 0x66, 0x6d, 0x00, 0x00, 0xa2}},
      {0x043f, 20000, 8, body, {0x00, 0x40, 0x60, 0xff, 0x5a, 0x6c, 0x08, 0x00}},
      {0x0370, 20000, 8, flat, {0x00, 0x20, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {0x0440, 20000, 8, body, {0xff, 0x00, 0x00, 0x00, 0xff, 0x00, 0x00, 0x00}},
      {0x04b1, 50000, 8, flat, {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {0x04f0, 50000, 8, body, {0x00, 0x00, 0x00, 0x80, 0x00, 0x26, 0x00, 0x00}},
      {0x05f0, 50000, 2, body, {0x01, 0x00, 0, 0, 0, 0, 0, 0}},
      {0x0690, 50000, 8, body, {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {0x05a0, 100000, 8, flat, {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {0x05a2, 100000, 8, flat, {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
      {0x0080, 100000, 8, body, {0x00, 0x17, 0xe6, 0x0a, 0x00, 0x00, 0x00, 0x00}},
      {0x0081, 100000, 8, body, {0x00, 0x80, 0x10, 0x06, 0x00, 0x00, 0x00, 0x00}},
      {0x0165, 100000, 4, body, {0x00, 0x00, 0x00, 0x00, 0, 0, 0, 0}},
      {0x0018, 1000000, 8, flat, {0x10, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
  };
}

struct Injection {
  Micros period_us = 0;   // 0 = no attack
  Micros on_us = 0;       // burst length
  Micros off_us = 0;      // clean stretch between bursts
};

inline Injection injection_for(AttackLabel label) {
  switch (label) {
    case AttackLabel::DoS: return {300, 250000, 400000};
    case AttackLabel::Fuzzy: return {500, 250000, 400000};
    case AttackLabel::Gear:
    case AttackLabel::RPM: return {1000, 300000, 400000};
    case AttackLabel::Normal: break;
  }
  return {};
}

inline constexpr Micros kDefaultEpoch = 1478198376000000;

// Exactly `frames` frames, sorted by time, with absolute timestamps from `epoch_us`.
inline FrameStream simulate(AttackLabel label, std::size_t frames, std::uint64_t seed,
                            Micros epoch_us = kDefaultEpoch) {
  Rng rng(derive_seed(seed, std::string("sim:") + std::string(to_string(label))));
  auto ecus = default_ecus();
  std::vector<std::array<std::uint8_t, 8>> state;
  for (const auto& e : ecus) state.push_back(e.init);

  // (time, source); source == ecus.size() is the injector
  using Event = std::pair<Micros, std::size_t>;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue;
  for (std::size_t i = 0; i < ecus.size(); ++i) {
    queue.emplace(static_cast<Micros>(rng.below(static_cast<std::uint64_t>(ecus[i].period_us))), i);
  }
  const auto inj = injection_for(label);
  if (inj.period_us > 0) queue.emplace(inj.off_us / 2, ecus.size());

  FrameStream out;
  out.source_label = label;
  out.epoch_us = 0;
  out.frames.reserve(frames);
  while (out.frames.size() < frames) {
    auto [t, src] = queue.top();
    queue.pop();
    CanFrame f;
    f.ts_us = epoch_us + t;
    if (src < ecus.size()) {
      const auto& e = ecus[src];
      auto& s = state[src];
      for (std::size_t b = 0; b < e.dlc; ++b) {
        switch (e.kinds[b]) {
          case ByteKind::Const: break;
          case ByteKind::Counter: s[b] = static_cast<std::uint8_t>((s[b] + 1) & 0x0f); break;
          case ByteKind::Drift: {
            const int step = static_cast<int>(rng.below(3)) - 1;
            s[b] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(s[b]) + step,
                                                        std::max(0, e.init[b] - 8), std::min(255, e.init[b] + 8)));
            break;
          }
          case ByteKind::Noise: s[b] = static_cast<std::uint8_t>(rng.below(16)); break;
        }
      }
      f.id = e.id;
      f.dlc = e.dlc;
      std::copy(s.begin(), s.begin() + e.dlc, f.data.begin());
      f.flag = Flag::Normal;
      const auto jitter = static_cast<Micros>(rng.below(201)) - 100;
      queue.emplace(t + e.period_us + jitter, src);
    } else {
      f.flag = Flag::Attack;
      f.dlc = 8;
      switch (label) {
        case AttackLabel::DoS: f.id = 0x0000; break;
        case AttackLabel::Fuzzy:
          f.id = static_cast<std::uint32_t>(rng.below(0x800));
          for (auto& b : f.data) b = static_cast<std::uint8_t>(rng.below(256));
          break;
        case AttackLabel::Gear:
          f.id = 0x043f;
          f.data = {0x01, 0x45, 0x60, 0xff, 0x65, 0x00, 0x00, 0x00};
          break;
        case AttackLabel::RPM:
          f.id = 0x0316;
          f.data = {0x05, 0x21, 0x68, 0x09, 0x21, 0x21, 0x00, 0x6f};
          f.data[2] = 0xff;
          f.data[3] = 0xff;
          break;
        case AttackLabel::Normal: break;
      }
      const Micros phase = (t - inj.off_us / 2) % (inj.on_us + inj.off_us);
      const Micros next = phase + inj.period_us < inj.on_us ? t + inj.period_us
                                                            : t - phase + inj.on_us + inj.off_us;
      queue.emplace(next, src);
    }
    f.id_text = format_id(f.id);
    out.frames.push_back(std::move(f));
  }
  return out;
}

// Car-hacking text layout, as used by the attack-free capture.
inline void write_txt(const FrameStream& stream, std::ostream& out) {
  std::string scratch;
  for (const auto& f : stream.frames) {
    out << "Timestamp: " << format_timestamp(f.ts_us + stream.epoch_us) << "        ID: " << display_id(f, scratch)
        << "    000    DLC: " << static_cast<int>(f.dlc);
    for (std::size_t i = 0; i < f.dlc; ++i) out << "    " << hex_byte(f.data[i]);
    out << '\n';
  }
}

}  // namespace canqa::sim
