#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "sage/corpus/sentiment.hpp"
#include "sage/corpus/types.hpp"

namespace sage::corpus {

/// Thresholds are strict: a dialogue passes only when it has *more than*
/// `min_turns_exclusive` turns, its mean words per utterance *exceeds*
/// `min_avg_words`, and every utterance scores *above* `min_sentiment`.
struct FilterConfig {
  int min_turns_exclusive = 4;
  double min_avg_words = 15.0;
  double min_sentiment = 0.4;
  bool require_question = true;

  void validate() const;
};

FilterConfig filter_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const FilterConfig& c);

enum class FilterRule { turns, avg_length, sentiment, question };
inline constexpr std::array kAllRules = {FilterRule::turns, FilterRule::avg_length,
                                         FilterRule::sentiment, FilterRule::question};

std::string_view to_string(FilterRule r);

struct FilterDecision {
  bool passed = true;
  std::vector<FilterRule> failed_rules;  // in kAllRules order
};

FilterDecision filter_dialogue(const Dialogue& d, const FilterConfig& cfg,
                               const SentimentScorer& scorer = default_scorer());

struct CorpusStats {
  std::size_t seen = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
  std::size_t corrupt = 0;
  std::array<std::size_t, kAllRules.size()> rule_failures{};

  std::size_t failures_for(FilterRule r) const { return rule_failures[static_cast<std::size_t>(r)]; }
  nlohmann::json to_json() const;
};

/// Streams newline-delimited dialogue records from `in`, calling `on_pass` for
/// each passing dialogue in input order. Undecodable or invalid records are
/// counted as corrupt and skipped.
CorpusStats filter_corpus(std::istream& in, const FilterConfig& cfg,
                          const std::function<void(const Dialogue&)>& on_pass,
                          const SentimentScorer& scorer = default_scorer());

}  // namespace sage::corpus
