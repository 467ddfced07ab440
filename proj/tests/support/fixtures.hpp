#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "canqa/generator.hpp"
#include "support/synth.hpp"

namespace fixtures {

using namespace canqa;

// Simulated attack windows turned into QA items against a simulated baseline.
inline std::vector<QaItem> dataset(std::size_t frames_per_label, std::size_t W, std::uint64_t seed,
                                   PlanPolicy policy = PlanPolicy::RoundRobin) {
  const auto baseline = build_baseline(synth::baseline_stream(std::max<std::size_t>(3000, 12 * W), 1), W);
  std::vector<Window> windows;
  for (auto label : {AttackLabel::DoS, AttackLabel::Fuzzy, AttackLabel::Gear, AttackLabel::RPM}) {
    auto part = segment(sim::simulate(label, frames_per_label, seed, 0), W);
    windows.insert(windows.end(), part.begin(), part.end());
  }
  GenerationPlan plan;
  plan.policy = policy;
  return generate_dataset(windows, baseline, plan, seed).items;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("canqa_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace fixtures
