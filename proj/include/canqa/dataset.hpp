#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "canqa/digest.hpp"
#include "canqa/error.hpp"
#include "canqa/generator.hpp"
#include "json.hpp"

namespace canqa {

struct DatasetManifest {
  std::size_t total_items = 0;
  std::map<std::string, std::size_t> per_format;
  std::map<std::string, std::size_t> per_attack;
  std::map<std::string, std::size_t> per_category;
  std::uint64_t seed = 0;
  std::string config_digest;
  std::string dataset_digest;  // sha256 of the JSONL bytes

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

inline nlohmann::json to_json(const DatasetManifest& m) {
  return {{"total_items", m.total_items},   {"per_format", m.per_format},
          {"per_attack", m.per_attack},     {"per_category", m.per_category},
          {"seed", m.seed},                 {"config_digest", m.config_digest},
          {"dataset_digest", m.dataset_digest}};
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    j.at("total_items").get_to(m.total_items);
    j.at("per_format").get_to(m.per_format);
    j.at("per_attack").get_to(m.per_attack);
    j.at("per_category").get_to(m.per_category);
    j.at("seed").get_to(m.seed);
    j.at("config_digest").get_to(m.config_digest);
    j.at("dataset_digest").get_to(m.dataset_digest);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Integrity, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

// "<dir>/data.jsonl" -> "<dir>/data.manifest.json"
inline std::filesystem::path manifest_path_for(const std::filesystem::path& dataset) {
  auto p = dataset;
  p.replace_extension();
  p += ".manifest.json";
  return p;
}

inline DatasetManifest summarize(const std::vector<QaItem>& items, std::uint64_t seed,
                                  std::string config_digest) {
  DatasetManifest m;
  m.total_items = items.size();
  m.seed = seed;
  m.config_digest = std::move(config_digest);
  for (const auto& item : items) {
    ++m.per_format[std::string(to_string(item.format))];
    ++m.per_attack[std::string(to_string(item.meta.attack_label))];
    ++m.per_category[std::to_string(item.category)];
  }
  return m;
}

inline std::string dataset_jsonl(const std::vector<QaItem>& items) {
  std::string out;
  for (const auto& item : items) {
    out += to_json(item).dump();
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, "write failed on '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes the JSONL dataset and its manifest next to it.
inline DatasetManifest write_dataset(const std::vector<QaItem>& items,
                                     const std::filesystem::path& path, std::uint64_t seed,
                                     const std::string& config_digest) {
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "refusing to write an empty dataset");
  std::set<std::string> ids;
  for (const auto& item : items) {
    if (!ids.insert(item.qa_id).second) {
      throw Error(ErrorKind::Integrity, "duplicate qa_id '" + item.qa_id + "'");
    }
  }
  const std::string text = dataset_jsonl(items);
  auto manifest = summarize(items, seed, config_digest);
  manifest.dataset_digest = sha256_hex(text);
  write_text_file(path, text);
  write_text_file(manifest_path_for(path), to_json(manifest).dump(2) + "\n");
  return manifest;
}

inline std::vector<QaItem> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::vector<QaItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Integrity,
                  path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    items.push_back(qa_item_from_json(j));
  }
  return items;
}

inline DatasetManifest read_manifest(const std::filesystem::path& dataset_path) {
  const auto text = read_text_file(manifest_path_for(dataset_path));
  try {
    return manifest_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Integrity, std::string("malformed manifest: ") + e.what());
  }
}

struct EvalSplit {
  std::vector<QaItem> eval_set;
  std::vector<QaItem> fewshot_pool;
};

// Partitions by window, never by item, so no window's context appears on
// both sides. Windows are drawn in seeded order into the few-shot pool until
// it holds at least k items of each format.
inline EvalSplit split_eval_fewshot(const std::vector<QaItem>& items, std::size_t k,
                                    std::uint64_t seed) {
  EvalSplit split;
  if (k == 0) {
    split.eval_set = items;
    return split;
  }
  std::map<std::string, std::vector<std::size_t>> by_window;
  for (std::size_t i = 0; i < items.size(); ++i) by_window[items[i].meta.window_id].push_back(i);
  std::vector<std::string> windows;
  windows.reserve(by_window.size());
  for (const auto& [w, _] : by_window) windows.push_back(w);
  Rng(derive_seed(seed, "fewshot-split")).shuffle(windows);

  std::set<std::string> pool_windows;
  std::size_t tf = 0;
  std::size_t mcq = 0;
  for (const auto& w : windows) {
    if (tf >= k && mcq >= k) break;
    pool_windows.insert(w);
    for (auto i : by_window[w]) (items[i].format == QaFormat::TF ? tf : mcq)++;
  }
  if (tf < k || mcq < k || pool_windows.size() == windows.size()) {
    throw Error(ErrorKind::Split, "not enough distinct windows for a " + std::to_string(k) +
                                      "-shot pool with a non-empty evaluation set");
  }
  for (const auto& item : items) {
    (pool_windows.contains(item.meta.window_id) ? split.fewshot_pool : split.eval_set).push_back(item);
  }
  return split;
}

}  // namespace canqa
