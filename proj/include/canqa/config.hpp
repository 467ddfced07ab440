#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "canqa/dataset.hpp"
#include "canqa/endpoint.hpp"
#include "canqa/error.hpp"
#include "canqa/generator.hpp"
#include "canqa/ingest.hpp"
#include "canqa/prompt.hpp"
#include "canqa/thresholds.hpp"
#include "canqa/window.hpp"
#include "json.hpp"

namespace canqa {

// A small TOML subset: [section] headers, key = value, # comments, with
// values being quoted strings, numbers, booleans or one-line arrays of those.
// Returns {"section": {"key": value}}; top-level keys live under "".
namespace toml_lite {

struct Cursor {
  std::string_view s;
  std::size_t i = 0;
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::Config, "line " + std::to_string(line) + ": " + what);
  }
  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool done() {
    skip_ws();
    return i >= s.size() || s[i] == '#';
  }
};

inline nlohmann::json parse_value(Cursor& c);

inline nlohmann::json parse_string(Cursor& c) {
  ++c.i;  // opening quote
  std::string out;
  while (c.i < c.s.size() && c.s[c.i] != '"') {
    char ch = c.s[c.i++];
    if (ch == '\\') {
      if (c.i >= c.s.size()) c.fail("unterminated escape");
      const char e = c.s[c.i++];
      switch (e) {
        case 'n': ch = '\n'; break;
        case 't': ch = '\t'; break;
        case '"': ch = '"'; break;
        case '\\': ch = '\\'; break;
        default: c.fail(std::string("unknown escape \\") + e);
      }
    }
    out.push_back(ch);
  }
  if (c.i >= c.s.size()) c.fail("unterminated string");
  ++c.i;
  return out;
}

inline nlohmann::json parse_scalar(Cursor& c) {
  const auto start = c.i;
  while (c.i < c.s.size() && c.s[c.i] != ',' && c.s[c.i] != ']' && c.s[c.i] != '#' &&
         !std::isspace(static_cast<unsigned char>(c.s[c.i])))
    ++c.i;
  std::string tok(c.s.substr(start, c.i - start));
  if (tok == "true") return true;
  if (tok == "false") return false;
  std::erase(tok, '_');
  if (tok.empty()) c.fail("missing value");
  try {
    std::size_t used = 0;
    if (tok.find_first_of(".eE") == std::string::npos) {
      const long long v = std::stoll(tok, &used);
      if (used == tok.size()) return v;
    } else {
      const double v = std::stod(tok, &used);
      if (used == tok.size()) return v;
    }
  } catch (const std::exception&) {
  }
  c.fail("cannot read value '" + tok + "'");
}

inline nlohmann::json parse_array(Cursor& c) {
  ++c.i;
  auto arr = nlohmann::json::array();
  for (;;) {
    c.skip_ws();
    if (c.i >= c.s.size()) c.fail("unterminated array");
    if (c.s[c.i] == ']') {
      ++c.i;
      return arr;
    }
    arr.push_back(parse_value(c));
    c.skip_ws();
    if (c.i < c.s.size() && c.s[c.i] == ',') ++c.i;
  }
}

inline nlohmann::json parse_value(Cursor& c) {
  c.skip_ws();
  if (c.i >= c.s.size()) c.fail("missing value");
  if (c.s[c.i] == '"') return parse_string(c);
  if (c.s[c.i] == '[') return parse_array(c);
  return parse_scalar(c);
}

inline nlohmann::json parse(std::string_view text) {
  nlohmann::json doc = nlohmann::json::object();
  doc[""] = nlohmann::json::object();
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    auto line = ingest_detail::trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    Cursor c{line, 0, line_no};
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) c.fail("unterminated section header");
      section = std::string(ingest_detail::trim(line.substr(1, close - 1)));
      c.i = close + 1;
      if (!c.done()) c.fail("trailing text after section header");
      if (doc.contains(section)) c.fail("section [" + section + "] repeated");
      doc[section] = nlohmann::json::object();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) c.fail("expected key = value");
    const std::string key(ingest_detail::trim(line.substr(0, eq)));
    if (key.empty()) c.fail("empty key");
    c.i = eq + 1;
    auto value = parse_value(c);
    if (!c.done()) c.fail("trailing text after value");
    if (doc[section].contains(key)) c.fail("key '" + key + "' repeated");
    doc[section][key] = std::move(value);
  }
  return doc;
}

}  // namespace toml_lite

struct RunPaths {
  std::vector<std::string> normal;  // attack-free traces for the baseline
  std::vector<std::string> attack;  // traces to generate questions from
  std::string baseline = "out/baseline.json";
  std::string dataset = "out/dataset.jsonl";
  std::string records = "out/records.jsonl";
  std::string summary = "out/summary.json";
  std::string report_csv = "out/report.csv";
};

struct RunConfig {
  std::size_t window_len = kDefaultWindowLen;
  std::uint64_t seed = 42;
  std::size_t parallelism = 1;
  FormatHint format = FormatHint::Auto;
  Thresholds thresholds;
  PlanPolicy plan = PlanPolicy::RoundRobin;
  Strategy strategy = Strategy::ZeroShot;
  std::size_t shots = kDefaultShots;
  EndpointConfig endpoint;
  RunPaths paths;
};

namespace config_detail {

inline void check_keys(const nlohmann::json& section, const std::string& name,
                       const std::set<std::string>& allowed) {
  for (const auto& [k, _] : section.items()) {
    if (!allowed.contains(k)) {
      throw Error(ErrorKind::Config, "unknown key '" + k + "'" + (name.empty() ? "" : " in [" + name + "]"));
    }
  }
}

template <class T>
void get(const nlohmann::json& section, const char* key, T& out) {
  if (!section.contains(key)) return;
  try {
    section.at(key).get_to(out);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::Config, std::string("bad value for '") + key + "'");
  }
}

}  // namespace config_detail

inline RunConfig config_from_toml(std::string_view text, const std::filesystem::path& base_dir = {}) {
  using config_detail::get;
  const auto doc = toml_lite::parse(text);
  config_detail::check_keys(doc, "", {"", "thresholds", "generate", "eval", "endpoint", "paths"});

  RunConfig cfg;
  const auto& top = doc.at("");
  config_detail::check_keys(top, "", {"window_len", "seed", "parallelism", "format"});
  get(top, "window_len", cfg.window_len);
  get(top, "seed", cfg.seed);
  get(top, "parallelism", cfg.parallelism);
  if (top.contains("format")) {
    try {
      cfg.format = parse_format_hint(top.at("format").get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, e.what());
    }
  }

  if (doc.contains("thresholds")) {
    std::set<std::string> names;
    const auto defaults = to_json(Thresholds{});
    for (const auto& [k, _] : defaults.items()) names.insert(k);
    config_detail::check_keys(doc.at("thresholds"), "thresholds", names);
    try {
      cfg.thresholds = thresholds_from_json(doc.at("thresholds"));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::Config, std::string("bad threshold value: ") + e.what());
    }
  }
  if (doc.contains("generate")) {
    const auto& g = doc.at("generate");
    config_detail::check_keys(g, "generate", {"plan"});
    if (g.contains("plan")) cfg.plan = parse_plan_policy(g.at("plan").get<std::string>());
  }
  if (doc.contains("eval")) {
    const auto& e = doc.at("eval");
    config_detail::check_keys(e, "eval", {"strategy", "shots"});
    if (e.contains("strategy")) cfg.strategy = parse_strategy(e.at("strategy").get<std::string>());
    get(e, "shots", cfg.shots);
  }
  if (doc.contains("endpoint")) {
    const auto& e = doc.at("endpoint");
    config_detail::check_keys(e, "endpoint",
                              {"url", "model", "api_key_env", "temperature", "max_tokens", "timeout_s"});
    get(e, "url", cfg.endpoint.url);
    get(e, "model", cfg.endpoint.model);
    get(e, "api_key_env", cfg.endpoint.api_key_env);
    get(e, "temperature", cfg.endpoint.temperature);
    get(e, "max_tokens", cfg.endpoint.max_tokens);
    get(e, "timeout_s", cfg.endpoint.timeout_s);
  }
  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    config_detail::check_keys(p, "paths",
                              {"normal", "attack", "baseline", "dataset", "records", "summary", "report_csv"});
    get(p, "normal", cfg.paths.normal);
    get(p, "attack", cfg.paths.attack);
    get(p, "baseline", cfg.paths.baseline);
    get(p, "dataset", cfg.paths.dataset);
    get(p, "records", cfg.paths.records);
    get(p, "summary", cfg.paths.summary);
    get(p, "report_csv", cfg.paths.report_csv);
    // relative paths resolve against the config file's directory
    if (!base_dir.empty()) {
      auto fix = [&](std::string& s) {
        if (!s.empty() && std::filesystem::path(s).is_relative()) s = (base_dir / s).lexically_normal().string();
      };
      for (auto& s : cfg.paths.normal) fix(s);
      for (auto& s : cfg.paths.attack) fix(s);
      fix(cfg.paths.baseline);
      fix(cfg.paths.dataset);
      fix(cfg.paths.records);
      fix(cfg.paths.summary);
      fix(cfg.paths.report_csv);
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  return config_from_toml(read_text_file(path), path.parent_path());
}

// What determines a dataset's content: measurement setup, baseline, seed, plan.
inline std::string generation_digest(const std::string& measurement, const std::string& baseline,
                                     std::uint64_t seed, PlanPolicy plan) {
  const nlohmann::json j = {{"measurement_digest", measurement},
                            {"baseline_digest", baseline},
                            {"seed", seed},
                            {"plan", to_string(plan)}};
  return sha256_hex(j.dump());
}

}  // namespace canqa
