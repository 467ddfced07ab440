#pragma once

// Randomized windows for property and oracle tests. Each regime pushes a
// different group of features across its thresholds.

#include <cstdint>
#include <vector>

#include "canqa/baseline.hpp"
#include "canqa/digest.hpp"
#include "canqa/simulate.hpp"
#include "canqa/window.hpp"

namespace synth {

using namespace canqa;

inline FrameStream baseline_stream(std::size_t frames = 3000, std::uint64_t seed = 1) {
  auto s = sim::simulate(AttackLabel::Normal, frames, seed, 0);
  s.source_label = AttackLabel::Normal;
  return s;
}

inline CanFrame frame(Micros ts, std::uint32_t id, std::uint8_t dlc, std::array<std::uint8_t, 8> data = {},
                      Flag flag = Flag::Normal) {
  CanFrame f;
  f.ts_us = ts;
  f.id = id;
  f.dlc = dlc;
  f.data = data;
  for (std::size_t i = dlc; i < 8; ++i) f.data[i] = 0;
  f.flag = flag;
  f.id_text = format_id(id);
  return f;
}

inline Window make_window(std::vector<CanFrame> frames, AttackLabel label = AttackLabel::DoS, std::size_t index = 0) {
  Window w;
  w.attack_label = label;
  w.index = index;
  w.window_id = make_window_id(label, index);
  w.frames = std::move(frames);
  return w;
}

enum class Regime { SimNormal, SimAttack, Random, Flood, Sparse, Collapsed, Count };

// A W-frame window drawn from one of several regimes, chosen by `rng`.
inline Window random_window(Rng& rng, std::size_t W, const std::vector<std::uint32_t>& known_ids,
                            std::size_t index) {
  const auto regime = static_cast<Regime>(rng.below(static_cast<std::uint64_t>(Regime::Count)));
  std::vector<CanFrame> frames;
  const Micros start = static_cast<Micros>(rng.below(5'000'000));

  auto pick_id = [&](double unknown_p) -> std::uint32_t {
    if (rng.unit() < unknown_p) return static_cast<std::uint32_t>(rng.below(0x800));
    return known_ids[rng.below(known_ids.size())];
  };
  auto payload = [&](std::uint8_t dlc) {
    std::array<std::uint8_t, 8> d{};
    const auto style = rng.below(3);
    for (std::size_t i = 0; i < dlc; ++i)
      d[i] = style == 0 ? 0 : static_cast<std::uint8_t>(style == 1 ? rng.below(4) : rng.below(256));
    return d;
  };

  switch (regime) {
    case Regime::SimNormal:
    case Regime::SimAttack: {
      static const AttackLabel labels[] = {AttackLabel::DoS, AttackLabel::Fuzzy, AttackLabel::Gear, AttackLabel::RPM};
      const auto label = regime == Regime::SimNormal ? AttackLabel::Normal : labels[rng.below(4)];
      const auto s = sim::simulate(label, W * 12, rng.next(), 0);
      const auto off = rng.below(s.frames.size() - W);
      frames.assign(s.frames.begin() + static_cast<std::ptrdiff_t>(off),
                    s.frames.begin() + static_cast<std::ptrdiff_t>(off + W));
      break;
    }
    case Regime::Random:
    case Regime::Sparse: {
      const double unknown = rng.unit() * 0.6;
      const double attack_p = std::array<double, 3>{0.0, 0.05, 0.6}[rng.below(3)];
      static const Micros steps[] = {0, 100, 499, 500, 501, 999, 1000, 1001, 2500, 9999, 10000};
      Micros ts = start;
      for (std::size_t i = 0; i < W; ++i) {
        if (i > 0) ts += regime == Regime::Sparse ? static_cast<Micros>(rng.below(6000)) : steps[rng.below(11)];
        const auto dlc = static_cast<std::uint8_t>(rng.unit() < 0.7 ? 8 : rng.below(9));
        frames.push_back(frame(ts, pick_id(unknown), dlc, payload(dlc),
                               rng.unit() < attack_p ? Flag::Attack : Flag::Normal));
      }
      break;
    }
    case Regime::Flood: {
      const auto id = rng.below(2) ? pick_id(0.0) : 0u;
      const Micros step = static_cast<Micros>(rng.below(400));
      const double other = rng.unit() * 0.6;
      for (std::size_t i = 0; i < W; ++i) {
        const bool inject = rng.unit() >= other;
        const auto dlc = static_cast<std::uint8_t>(inject ? 8 : rng.below(9));
        frames.push_back(frame(start + static_cast<Micros>(i) * step, inject ? id : pick_id(0.2), dlc,
                               inject ? std::array<std::uint8_t, 8>{} : payload(dlc),
                               inject && rng.below(2) ? Flag::Attack : Flag::Normal));
      }
      break;
    }
    case Regime::Collapsed: {
      // logging artifacts: long runs of equal timestamps and exact duplicates
      Micros ts = start;
      for (std::size_t i = 0; i < W; ++i) {
        if (rng.below(5) == 0) ts += static_cast<Micros>(rng.below(3)) * 5000;
        if (i > 0 && rng.below(4) == 0) {
          frames.push_back(frames.back());
          frames.back().ts_us = ts;
          continue;
        }
        const auto dlc = static_cast<std::uint8_t>(rng.below(9));
        frames.push_back(frame(ts, pick_id(0.1), dlc, payload(dlc)));
      }
      break;
    }
    case Regime::Count: break;
  }
  return make_window(std::move(frames), AttackLabel::Fuzzy, index);
}

inline std::vector<std::uint32_t> ids_of(const BaselineStats& b) {
  return {b.expected_ids.begin(), b.expected_ids.end()};
}

}  // namespace synth
