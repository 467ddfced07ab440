// Regenerates the bundled sample traces under data/sample/.
//   make_sample [out_dir] [seed]

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "canqa/simulate.hpp"

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data/sample";
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 7;
  std::filesystem::create_directories(dir);

  struct Item {
    canqa::AttackLabel label;
    const char* name;
    std::size_t frames;
  };
  const Item items[] = {
      {canqa::AttackLabel::Normal, "normal_run_data.txt", 5000},
      {canqa::AttackLabel::DoS, "DoS_dataset.csv", 4000},
      {canqa::AttackLabel::Fuzzy, "Fuzzy_dataset.csv", 4000},
      {canqa::AttackLabel::Gear, "gear_dataset.csv", 4000},
      {canqa::AttackLabel::RPM, "RPM_dataset.csv", 4000},
  };
  canqa::Micros epoch = canqa::sim::kDefaultEpoch;
  for (const auto& it : items) {
    const auto stream = canqa::sim::simulate(it.label, it.frames, seed, epoch);
    std::ofstream out(dir / it.name);
    if (it.label == canqa::AttackLabel::Normal) {
      canqa::sim::write_txt(stream, out);
    } else {
      canqa::write_csv(stream, out);
    }
    if (!out) {
      std::fprintf(stderr, "cannot write %s\n", (dir / it.name).c_str());
      return 1;
    }
    std::printf("%s: %zu frames\n", (dir / it.name).c_str(), stream.frames.size());
    epoch += 3600LL * 1000000;  // captures an hour apart
  }
  return 0;
}
