#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "canqa/error.hpp"
#include "canqa/frame.hpp"

namespace canqa {

// Zero-based index of the nearest-rank percentile in a sorted list of n
// values: ceil(p/100 * n) - 1, clamped to [0, n).
inline std::size_t nearest_rank_index(std::size_t n, double p) {
  const double rank = std::ceil(p * static_cast<double>(n) / 100.0);
  if (rank <= 1.0) return 0;
  const auto idx = static_cast<std::size_t>(rank) - 1;
  return std::min(idx, n - 1);
}

// Nearest-rank percentile; p in [0, 100].
template <class T>
T percentile(std::span<const T> values, double p) {
  if (values.empty()) throw Error(ErrorKind::Argument, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorKind::Argument, "percentile rank outside [0, 100]");
  std::vector<T> work(values.begin(), values.end());
  const auto k = nearest_rank_index(work.size(), p);
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(k), work.end());
  return work[k];
}

template <class T>
T percentile(const std::vector<T>& values, double p) {
  return percentile(std::span<const T>(values), p);
}

// Running sums for the population variance of payload bytes. Integer
// accumulation keeps the only rounding in the final division.
struct PayloadMoments {
  std::uint64_t n = 0;
  std::uint64_t sum = 0;
  std::uint64_t sum_sq = 0;

  void add(const CanFrame& f) {
    for (auto b : f.data) {
      sum += b;
      sum_sq += static_cast<std::uint64_t>(b) * b;
      ++n;
    }
  }

  double variance() const {
    if (n == 0) return 0.0;
    // n * sum_sq >= sum^2 (Cauchy-Schwarz); the product needs 128 bits.
    const unsigned __int128 num = static_cast<unsigned __int128>(n) * sum_sq -
                                  static_cast<unsigned __int128>(sum) * sum;
    return static_cast<double>(num) / (static_cast<double>(n) * static_cast<double>(n));
  }
};

// Population variance over all 8*n payload byte values, padding included.
template <class Frames>
double payload_variance(const Frames& frames) {
  PayloadMoments m;
  for (const CanFrame& f : frames) m.add(f);
  return m.variance();
}

}  // namespace canqa
