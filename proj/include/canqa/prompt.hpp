#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "canqa/digest.hpp"
#include "canqa/error.hpp"
#include "canqa/generator.hpp"

namespace canqa {

enum class Strategy { ZeroShot, FewShot, Cot, FewShotCot };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::ZeroShot: return "zero_shot";
    case Strategy::FewShot: return "few_shot";
    case Strategy::Cot: return "cot";
    case Strategy::FewShotCot: return "few_shot_cot";
  }
  return "zero_shot";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "zero_shot" || s == "zero-shot") return Strategy::ZeroShot;
  if (s == "few_shot" || s == "few-shot") return Strategy::FewShot;
  if (s == "cot") return Strategy::Cot;
  if (s == "few_shot_cot" || s == "few-shot-cot") return Strategy::FewShotCot;
  throw Error(ErrorKind::Config, "unknown strategy '" + std::string(s) + "'");
}

inline bool uses_shots(Strategy s) { return s == Strategy::FewShot || s == Strategy::FewShotCot; }
inline bool uses_cot(Strategy s) { return s == Strategy::Cot || s == Strategy::FewShotCot; }

inline constexpr std::size_t kDefaultShots = 5;

namespace prompt_text {

inline constexpr std::string_view kSystemTf =
    "You are a CAN bus intrusion-detection analyst. Study timestamp ordering, ID frequency, "
    "payload stability, byte ranges, and gaps between frames. Use those characteristics together "
    "with the statement to determine whether it is true or false. Respond with True or False only.";

inline constexpr std::string_view kSystemMcq =
    "You are a CAN bus intrusion-detection analyst. Study timestamp ordering, ID frequency, "
    "payload stability, byte ranges, and gaps between frames. Use those characteristics together "
    "with the question to select the single best option. Respond with A, B, C, or D only.";

inline constexpr std::string_view kPreambleTf =
    "Below is a CAN bus time window. Review the sequence carefully, note anomalies or missing "
    "identifiers, and reason about the statement.";

inline constexpr std::string_view kPreambleMcq =
    "Below is a CAN bus time window. Review the sequence carefully, note anomalies or missing "
    "identifiers, and reason about the question.";

inline constexpr std::string_view kAnswerTf = "Answer: True or False";
inline constexpr std::string_view kAnswerMcq = "Answer: A, B, C, or D";

inline constexpr std::string_view kCot =
    "Explain your reasoning step by step before giving the final answer.";

}  // namespace prompt_text

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  Strategy strategy = Strategy::ZeroShot;
  std::vector<QaItem> shots;
};

namespace prompt_detail {

// CAN window, question and (for MCQ) options.
inline std::string item_body(const QaItem& item) {
  std::string body = "CAN window:\n" + item.context + "\n\n";
  if (item.format == QaFormat::TF) {
    body += "Statement:\n" + item.question;
  } else {
    body += "Question:\n" + item.question + "\n\nOptions:";
    for (const auto& opt : item.options) body += "\n" + opt;
  }
  return body;
}

}  // namespace prompt_detail

// Shots must share the item's format and come from other windows.
inline PromptBundle build_prompt(const QaItem& item, Strategy strategy,
                                 const std::vector<QaItem>& shots = {}) {
  using namespace prompt_text;
  if (!uses_shots(strategy) && !shots.empty()) {
    throw Error(ErrorKind::Argument, std::string(to_string(strategy)) + " takes no examples");
  }
  if (uses_shots(strategy) && shots.empty()) {
    throw Error(ErrorKind::Argument, std::string(to_string(strategy)) + " needs examples");
  }
  for (const auto& shot : shots) {
    if (shot.meta.window_id == item.meta.window_id) {
      throw Error(ErrorKind::Leakage, "example " + shot.qa_id + " shares window " +
                                          item.meta.window_id + " with " + item.qa_id);
    }
    if (shot.format != item.format) {
      throw Error(ErrorKind::Argument, "example " + shot.qa_id + " has a different format");
    }
  }

  const bool tf = item.format == QaFormat::TF;
  PromptBundle p;
  p.strategy = strategy;
  p.shots = shots;
  p.system_text = std::string(tf ? kSystemTf : kSystemMcq);

  std::string user;
  if (!shots.empty()) {
    user += "Solved examples (" + std::to_string(shots.size()) + "):\n\n";
    for (std::size_t i = 0; i < shots.size(); ++i) {
      user += "Example " + std::to_string(i + 1) + ":\n" + prompt_detail::item_body(shots[i]) + "\n";
      if (strategy == Strategy::FewShotCot) user += "Reasoning: " + shots[i].meta.rationale + "\n";
      user += "Answer: " + shots[i].answer + "\n\n";
    }
    user += "Now the target window.\n\n";
  }
  user += std::string(tf ? kPreambleTf : kPreambleMcq) + "\n\n";
  user += prompt_detail::item_body(item) + "\n\n";
  user += std::string(tf ? kAnswerTf : kAnswerMcq);
  if (uses_cot(strategy)) user += "\n\n" + std::string(kCot);
  p.user_text = std::move(user);
  return p;
}

// Draws k same-format examples for an item, deterministically per (seed, qa_id).
inline std::vector<QaItem> select_shots(const std::vector<QaItem>& pool, const QaItem& item,
                                        std::size_t k, std::uint64_t seed) {
  std::vector<const QaItem*> candidates;
  for (const auto& p : pool) {
    if (p.format == item.format && p.meta.window_id != item.meta.window_id) candidates.push_back(&p);
  }
  if (candidates.size() < k) {
    throw Error(ErrorKind::Split, "few-shot pool has " + std::to_string(candidates.size()) + " " +
                                      std::string(to_string(item.format)) + " items, need " +
                                      std::to_string(k));
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const QaItem* a, const QaItem* b) { return a->qa_id < b->qa_id; });
  Rng rng(derive_seed(seed, "shots:" + item.qa_id));
  std::vector<QaItem> shots;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
    std::swap(candidates[i], candidates[j]);
    shots.push_back(*candidates[i]);
  }
  return shots;
}

// ---------------------------------------------------------------------------
// Answer extraction

enum class ScanOrder { First, Last };

struct Candidate {
  std::size_t pos;
  std::string value;
};

namespace parse_detail {

inline std::string strip_markup(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw)
    if (c != '*' && c != '`' && c != '_') s.push_back(c);
  return s;
}

inline std::string_view trim_answer(std::string_view s) {
  auto junk = [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '.' || c == '!' || c == ',' ||
           c == ';' || c == ':' || c == '"' || c == '\'' || c == '(' || c == ')' || c == '[' ||
           c == ']';
  };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return s;
}

inline const Candidate* pick(const std::vector<Candidate>& c, ScanOrder order) {
  if (c.empty()) return nullptr;
  return order == ScanOrder::First ? &c.front() : &c.back();
}

inline std::optional<std::string> parse_tf(const std::string& text, ScanOrder order) {
  std::vector<Candidate> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    const auto word = detail::lower(std::string_view(text).substr(i, j - i));
    if (word == "true") found.push_back({i, "True"});
    if (word == "false") found.push_back({i, "False"});
    i = j;
  }
  if (auto c = pick(found, order)) return c->value;
  return std::nullopt;
}

inline std::optional<std::string> parse_mcq(const std::string& text, ScanOrder order) {
  const auto bare = trim_answer(text);
  if (bare.size() == 1) {
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(bare[0])));
    if (c >= 'A' && c <= 'D') return std::string(1, c);
  }

  // Explicit markers: "answer is B", "Answer: b", "option C", "(D)", "A." at line start.
  static const std::regex kExplicit(
      R"((?:answer|option|choice)\s*(?:is|:|-|=)?\s*(?:option\s*)?[:\-]?\s*\(?([A-Da-d])(?![A-Za-z0-9])|\(([A-Da-d])\)|(?:^|\n)\s*([A-D])[.)](?:\s|$))",
      std::regex::icase);
  std::vector<Candidate> explicit_hits;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kExplicit); it != std::sregex_iterator();
       ++it) {
    const auto& m = *it;
    for (int g = 1; g <= 3; ++g) {
      if (!m[g].matched) continue;
      const char letter = m[g].str()[0];
      const auto after = static_cast<std::size_t>(m.position(g)) + 1;
      // A lowercase letter followed by another word is an article ("is a flood").
      if (std::islower(static_cast<unsigned char>(letter))) {
        std::size_t k = after;
        while (k < text.size() && text[k] == ' ') ++k;
        if (k < text.size() && std::isalpha(static_cast<unsigned char>(text[k]))) continue;
      }
      explicit_hits.push_back({static_cast<std::size_t>(m.position(g)),
                               std::string(1, static_cast<char>(std::toupper(letter)))});
    }
  }
  if (auto c = pick(explicit_hits, order)) return c->value;

  // Standalone uppercase A-D tokens.
  std::vector<Candidate> tokens;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < 'A' || c > 'D') continue;
    const bool left = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
    const bool right = i + 1 == text.size() || !std::isalnum(static_cast<unsigned char>(text[i + 1]));
    if (left && right) tokens.push_back({i, std::string(1, c)});
  }
  if (auto c = pick(tokens, order)) return c->value;
  return std::nullopt;
}

}  // namespace parse_detail

// Returns "True"/"False" or "A".."D"; nullopt means unparseable. Chain-of-
// thought output should be scanned from the end so the final answer wins.
inline std::optional<std::string> parse_answer(std::string_view raw, QaFormat format,
                                               ScanOrder order = ScanOrder::First) {
  const std::string text = parse_detail::strip_markup(raw);
  return format == QaFormat::TF ? parse_detail::parse_tf(text, order)
                                : parse_detail::parse_mcq(text, order);
}

}  // namespace canqa
