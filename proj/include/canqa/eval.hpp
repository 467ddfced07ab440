#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "canqa/endpoint.hpp"
#include "canqa/error.hpp"
#include "canqa/generator.hpp"
#include "canqa/log.hpp"
#include "canqa/prompt.hpp"
#include "json.hpp"

namespace canqa {

struct EvalRecord {
  std::string qa_id;
  std::string raw_output;
  std::optional<std::string> parsed_answer;  // nullopt = Unparseable
  bool correct = false;
  double latency_s = 0.0;
  // denormalized so summaries can be rebuilt from the record log alone
  int category = 0;
  QaFormat format = QaFormat::TF;
  AttackLabel attack_label = AttackLabel::Normal;

  bool unparseable() const { return !parsed_answer.has_value(); }
};

inline nlohmann::json to_json(const EvalRecord& r) {
  return {{"qa_id", r.qa_id},
          {"raw_output", r.raw_output},
          {"parsed_answer", r.parsed_answer ? nlohmann::json(*r.parsed_answer) : nlohmann::json(nullptr)},
          {"correct", r.correct},
          {"latency_s", r.latency_s},
          {"category", r.category},
          {"format", to_string(r.format)},
          {"attack_label", to_string(r.attack_label)}};
}

inline EvalRecord eval_record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  j.at("qa_id").get_to(r.qa_id);
  j.at("raw_output").get_to(r.raw_output);
  if (!j.at("parsed_answer").is_null()) r.parsed_answer = j.at("parsed_answer").get<std::string>();
  j.at("correct").get_to(r.correct);
  j.at("latency_s").get_to(r.latency_s);
  j.at("category").get_to(r.category);
  r.format = parse_qa_format(j.at("format").get<std::string>());
  r.attack_label = label_from_string(j.at("attack_label").get<std::string>()).value_or(AttackLabel::Normal);
  return r;
}

inline EvalRecord score(const QaItem& item, std::string raw, ScanOrder order, double latency_s = 0.0) {
  EvalRecord r;
  r.qa_id = item.qa_id;
  r.parsed_answer = parse_answer(raw, item.format, order);
  r.raw_output = std::move(raw);
  r.correct = r.parsed_answer && *r.parsed_answer == item.answer;
  r.latency_s = latency_s;
  r.category = item.category;
  r.format = item.format;
  r.attack_label = item.meta.attack_label;
  return r;
}

struct Slice {
  std::size_t total = 0;
  std::size_t correct = 0;
  std::size_t unparseable = 0;

  double accuracy() const { return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0; }
  void add(const EvalRecord& r) {
    ++total;
    correct += r.correct;
    unparseable += r.unparseable();
  }
  friend bool operator==(const Slice&, const Slice&) = default;
};

struct EvalSummary {
  Slice overall;
  std::map<std::string, Slice> per_category;
  std::map<std::string, Slice> per_attack;
  std::map<std::string, Slice> per_format;
  std::map<std::string, Slice> per_category_format;  // "3/TF"
  std::string strategy;

  double unparseable_rate() const {
    return overall.total ? static_cast<double>(overall.unparseable) / static_cast<double>(overall.total) : 0.0;
  }
  friend bool operator==(const EvalSummary&, const EvalSummary&) = default;
};

inline EvalSummary summarize_records(const std::vector<EvalRecord>& records, std::string strategy = {}) {
  EvalSummary s;
  s.strategy = std::move(strategy);
  for (const auto& r : records) {
    const auto cat = std::to_string(r.category);
    const auto fmt = std::string(to_string(r.format));
    s.overall.add(r);
    s.per_category[cat].add(r);
    s.per_attack[std::string(to_string(r.attack_label))].add(r);
    s.per_format[fmt].add(r);
    s.per_category_format[cat + "/" + fmt].add(r);
  }
  return s;
}

inline nlohmann::json to_json(const Slice& s) {
  return {{"total", s.total}, {"correct", s.correct}, {"unparseable", s.unparseable}, {"accuracy", s.accuracy()}};
}

inline Slice slice_from_json(const nlohmann::json& j) {
  Slice s;
  j.at("total").get_to(s.total);
  j.at("correct").get_to(s.correct);
  j.at("unparseable").get_to(s.unparseable);
  return s;
}

inline nlohmann::json to_json(const EvalSummary& s) {
  auto slices = [](const std::map<std::string, Slice>& m) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : m) out[k] = to_json(v);
    return out;
  };
  return {{"strategy", s.strategy},
          {"overall", to_json(s.overall)},
          {"unparseable_rate", s.unparseable_rate()},
          {"per_format", slices(s.per_format)},
          {"per_category", slices(s.per_category)},
          {"per_attack", slices(s.per_attack)},
          {"per_category_format", slices(s.per_category_format)}};
}

inline EvalSummary summary_from_json(const nlohmann::json& j) {
  auto slices = [](const nlohmann::json& m) {
    std::map<std::string, Slice> out;
    for (const auto& [k, v] : m.items()) out[k] = slice_from_json(v);
    return out;
  };
  EvalSummary s;
  try {
    s.strategy = j.value("strategy", "");
    s.overall = slice_from_json(j.at("overall"));
    s.per_format = slices(j.at("per_format"));
    s.per_category = slices(j.at("per_category"));
    s.per_attack = slices(j.at("per_attack"));
    s.per_category_format = slices(j.at("per_category_format"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Integrity, std::string("malformed summary: ") + e.what());
  }
  return s;
}

// Plot-ready per-category table: one row per category with TF and MCQ accuracy.
inline std::string summary_csv(const EvalSummary& s) {
  std::ostringstream out;
  out << "category,tf_total,tf_accuracy,mcq_total,mcq_accuracy,total,accuracy\n";
  std::set<int> cats;
  for (const auto& [k, _] : s.per_category) cats.insert(std::stoi(k));
  auto get = [&](const std::string& key) {
    auto it = s.per_category_format.find(key);
    return it == s.per_category_format.end() ? Slice{} : it->second;
  };
  char buf[64];
  auto acc = [&](const Slice& sl) -> std::string {
    if (!sl.total) return "";
    std::snprintf(buf, sizeof buf, "%.4f", sl.accuracy());
    return buf;
  };
  for (int c : cats) {
    const auto cs = std::to_string(c);
    const auto tf = get(cs + "/TF");
    const auto mcq = get(cs + "/MCQ");
    const auto all = s.per_category.at(cs);
    out << c << ',' << tf.total << ',' << acc(tf) << ',' << mcq.total << ',' << acc(mcq) << ','
        << all.total << ',' << acc(all) << '\n';
  }
  auto fmt = [&](const char* f) {
    auto it = s.per_format.find(f);
    return it == s.per_format.end() ? Slice{} : it->second;
  };
  const auto tf = fmt("TF"), mcq = fmt("MCQ");
  out << "all," << tf.total << ',' << acc(tf) << ',' << mcq.total << ',' << acc(mcq) << ','
      << s.overall.total << ',' << acc(s.overall) << '\n';
  return out.str();
}

inline std::string summary_table(const EvalSummary& s) {
  std::ostringstream out;
  char line[160];
  auto row = [&](const std::string& name, const Slice& sl) {
    std::snprintf(line, sizeof line, "  %-14s %6zu %6zu  %6.1f%%\n", name.c_str(), sl.total, sl.correct,
                  100.0 * sl.accuracy());
    out << line;
  };
  if (!s.strategy.empty()) out << "strategy: " << s.strategy << "\n";
  std::snprintf(line, sizeof line, "  %-14s %6s %6s  %7s\n", "slice", "total", "right", "acc");
  out << line;
  row("overall", s.overall);
  for (const auto& [k, v] : s.per_format) row(k, v);
  out << "by category\n";
  for (const auto& [k, v] : s.per_category_format) row("C" + k, v);
  out << "by attack\n";
  for (const auto& [k, v] : s.per_attack) row(k, v);
  std::snprintf(line, sizeof line, "unparseable: %.2f%%\n", 100.0 * s.unparseable_rate());
  out << line;
  return out.str();
}

struct EvalOptions {
  Strategy strategy = Strategy::ZeroShot;
  std::size_t shots = kDefaultShots;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  int max_retries = 3;
  std::chrono::milliseconds backoff{250};
  std::string model = "default";
  double temperature = 0.0;
  int max_tokens = 256;
  std::optional<std::filesystem::path> records_path;  // incremental log; resumed when present
};

struct EvalResult {
  std::vector<EvalRecord> records;
  EvalSummary summary;
};

// Reads a record log. A torn final line from an interrupted run is dropped.
inline std::map<std::string, EvalRecord> load_records(const std::filesystem::path& path) {
  std::map<std::string, EvalRecord> out;
  std::ifstream in(path);
  if (!in) return out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto r = eval_record_from_json(nlohmann::json::parse(line));
      out[r.qa_id] = std::move(r);
    } catch (const std::exception&) {
      log::warn(path.string() + ":" + std::to_string(n) + ": unreadable record skipped");
    }
  }
  return out;
}

// Cuts an unterminated last line so appended records start on a fresh line.
inline void drop_torn_tail(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec || size == 0) return;
  std::ifstream in(path, std::ios::binary);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.empty() || text.back() == '\n') return;
  const auto keep = text.rfind('\n');
  std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
  log::warn(path.string() + ": dropped an unterminated last record");
}

inline ChatRequest make_request(const PromptBundle& p, const QaItem& item, const EvalOptions& opt) {
  ChatRequest r;
  r.model = opt.model;
  r.temperature = opt.temperature;
  r.max_tokens = opt.max_tokens;
  r.qa_id = item.qa_id;
  r.messages = {{"system", p.system_text}, {"user", p.user_text}};
  return r;
}

inline std::string complete_with_retry(ChatEndpoint& endpoint, const ChatRequest& req, const EvalOptions& opt) {
  for (int attempt = 0;; ++attempt) {
    try {
      return endpoint.complete(req);
    } catch (const EndpointError& e) {
      if (!e.transient() || attempt >= opt.max_retries) throw;
      const auto wait = opt.backoff * (1 << attempt);
      log::warn(req.qa_id + ": " + e.what() + ", retrying in " + std::to_string(wait.count()) + " ms");
      std::this_thread::sleep_for(wait);
    }
  }
}

// Evaluates every item once. Records already present in the log are reused,
// new ones are appended as they complete. The first unrecoverable failure
// stops new requests; records finished so far stay in the log.
inline EvalResult run_eval(const std::vector<QaItem>& items, const std::vector<QaItem>& fewshot_pool,
                           ChatEndpoint& endpoint, const EvalOptions& opt) {
  if (opt.parallelism == 0) throw Error(ErrorKind::Argument, "parallelism must be at least 1");
  const auto order = uses_cot(opt.strategy) ? ScanOrder::Last : ScanOrder::First;

  std::map<std::string, EvalRecord> done;
  if (opt.records_path) done = load_records(*opt.records_path);

  std::vector<const QaItem*> todo;
  for (const auto& item : items)
    if (!done.contains(item.qa_id)) todo.push_back(&item);
  if (!done.empty()) log::info("resuming: " + std::to_string(items.size() - todo.size()) + " records reused");

  // Prompts are built up front so leakage or pool errors surface before any request.
  std::vector<PromptBundle> prompts;
  prompts.reserve(todo.size());
  for (const auto* item : todo) {
    std::vector<QaItem> shots;
    if (uses_shots(opt.strategy)) shots = select_shots(fewshot_pool, *item, opt.shots, opt.seed);
    prompts.push_back(build_prompt(*item, opt.strategy, shots));
  }

  std::ofstream log_out;
  if (opt.records_path) {
    if (opt.records_path->has_parent_path()) std::filesystem::create_directories(opt.records_path->parent_path());
    drop_torn_tail(*opt.records_path);
    log_out.open(*opt.records_path, std::ios::app);
    if (!log_out) throw Error(ErrorKind::Io, "cannot append to '" + opt.records_path->string() + "'");
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr failure;

  auto worker = [&] {
    while (!abort.load()) {
      const auto i = next.fetch_add(1);
      if (i >= todo.size()) return;
      const auto& item = *todo[i];
      try {
        const auto t0 = std::chrono::steady_clock::now();
        auto raw = complete_with_retry(endpoint, make_request(prompts[i], item, opt), opt);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
        auto rec = score(item, std::move(raw), order, dt.count());
        std::lock_guard lock(mu);
        if (log_out.is_open()) {
          log_out << to_json(rec).dump() << '\n';
          log_out.flush();
        }
        done[rec.qa_id] = std::move(rec);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    const auto n = std::min(opt.parallelism, std::max<std::size_t>(todo.size(), 1));
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) {
    log::error("evaluation aborted after " + std::to_string(done.size()) + " of " +
               std::to_string(items.size()) + " records");
    std::rethrow_exception(failure);
  }

  EvalResult result;
  result.records.reserve(items.size());
  for (const auto& item : items) result.records.push_back(done.at(item.qa_id));
  result.summary = summarize_records(result.records, std::string(to_string(opt.strategy)));
  return result;
}

}  // namespace canqa
