#include "sage/corpus/filter.hpp"

#include <istream>
#include <stdexcept>

#include "sage/common/jsonl.hpp"
#include "sage/common/text.hpp"

namespace sage::corpus {

void FilterConfig::validate() const {
  if (min_turns_exclusive < 0) throw std::invalid_argument("min_turns_exclusive must be >= 0");
  if (min_avg_words < 0) throw std::invalid_argument("min_avg_words must be >= 0");
  if (min_sentiment < -1.0 || min_sentiment > 1.0)
    throw std::invalid_argument("min_sentiment must lie in [-1, 1]");
}

FilterConfig filter_config_from_json(const nlohmann::json& j) {
  FilterConfig c;
  c.min_turns_exclusive = j.value("min_turns_exclusive", c.min_turns_exclusive);
  c.min_avg_words = j.value("min_avg_words", c.min_avg_words);
  c.min_sentiment = j.value("min_sentiment", c.min_sentiment);
  c.require_question = j.value("require_question", c.require_question);
  c.validate();
  return c;
}

nlohmann::json to_json(const FilterConfig& c) {
  return {{"min_turns_exclusive", c.min_turns_exclusive},
          {"min_avg_words", c.min_avg_words},
          {"min_sentiment", c.min_sentiment},
          {"require_question", c.require_question}};
}

std::string_view to_string(FilterRule r) {
  switch (r) {
    case FilterRule::turns: return "turns";
    case FilterRule::avg_length: return "avg_length";
    case FilterRule::sentiment: return "sentiment";
    case FilterRule::question: return "question";
  }
  return "?";
}

FilterDecision filter_dialogue(const Dialogue& d, const FilterConfig& cfg,
                               const SentimentScorer& scorer) {
  FilterDecision out;
  const auto fail = [&](FilterRule r) {
    out.passed = false;
    out.failed_rules.push_back(r);
  };

  if (static_cast<long>(d.turns.size()) <= cfg.min_turns_exclusive) fail(FilterRule::turns);

  std::size_t words = 0;
  for (const auto& u : d.turns) words += text::word_count(u.text);
  const double mean = d.turns.empty() ? 0.0 : static_cast<double>(words) / d.turns.size();
  if (!(mean > cfg.min_avg_words)) fail(FilterRule::avg_length);

  for (const auto& u : d.turns) {
    if (!(scorer.score(u.text) > cfg.min_sentiment)) {
      fail(FilterRule::sentiment);
      break;
    }
  }

  if (cfg.require_question) {
    bool any = false;
    for (const auto& u : d.turns) {
      auto t = text::trim(u.text);
      if (!t.empty() && t.back() == '?') {
        any = true;
        break;
      }
    }
    if (!any) fail(FilterRule::question);
  }
  return out;
}

nlohmann::json CorpusStats::to_json() const {
  nlohmann::json rules = nlohmann::json::object();
  for (auto r : kAllRules) rules[std::string(to_string(r))] = failures_for(r);
  return {{"seen", seen},       {"passed", passed},        {"failed", failed},
          {"corrupt", corrupt}, {"rule_failures", rules}};
}

CorpusStats filter_corpus(std::istream& in, const FilterConfig& cfg,
                          const std::function<void(const Dialogue&)>& on_pass,
                          const SentimentScorer& scorer) {
  cfg.validate();
  CorpusStats stats;
  auto rs = jsonl::read(in, [&](const nlohmann::json& j) {
    Dialogue d = dialogue_from_json(j);  // throws on invalid record -> counted corrupt
    auto decision = filter_dialogue(d, cfg, scorer);
    if (decision.passed) {
      on_pass(d);
      ++stats.passed;
    } else {
      ++stats.failed;
      for (auto r : decision.failed_rules) ++stats.rule_failures[static_cast<std::size_t>(r)];
    }
  });
  stats.seen = rs.lines;
  stats.corrupt = rs.corrupt;
  return stats;
}

}  // namespace sage::corpus
