#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/arena/judge.hpp"
#include "sage/selfplay/types.hpp"

namespace sage::arena {

struct SignTestResult {
  double p = 1.0;        // 0 when below the smallest double
  double log10_p = 0.0;  // always finite
};

/// Two-sided exact binomial test of max(a, b) successes in a + b trials at
/// 0.5, evaluated in log space. Ties are the caller's business. Requires
/// a + b >= 1.
SignTestResult sign_test(std::uint64_t wins_a, std::uint64_t wins_b);

enum class Significance { none, star, double_star };

std::string_view to_string(Significance s);
/// "**" below 1e-50, "*" below 1e-10.
Significance significance_of(double log10_p);

struct ComparisonReport {
  std::string method_a;
  std::string method_b;
  std::string judge;
  std::uint64_t a_wins = 0;
  std::uint64_t ties = 0;
  std::uint64_t b_wins = 0;
  std::uint64_t total = 0;
  double pct_a = 0, pct_tie = 0, pct_b = 0;  // over total, one decimal
  std::optional<SignTestResult> sign;        // empty when a_wins + b_wins == 0
  Significance significance = Significance::none;
  std::uint64_t failures = 0;  // pairs excluded because a rollout failed
};

ComparisonReport aggregate(std::uint64_t a_wins, std::uint64_t ties, std::uint64_t b_wins);
ComparisonReport aggregate(const std::vector<ConsistentVerdict>& verdicts);

nlohmann::json to_json(const ComparisonReport& r);

/// Fixed-width table with Method A, Method B, A Wins, Ties, B Wins, p and
/// stars columns, one row per report.
std::string format_table(const std::vector<ComparisonReport>& reports);

struct ActionDistribution {
  std::map<std::string, std::uint64_t> motivation;
  std::map<std::string, std::uint64_t> emotion;
  std::uint64_t turns = 0;
  double mean_response_words = 0.0;
};

/// Frequencies over the selected agent turns; null fields count as "null".
ActionDistribution action_distribution(const std::vector<selfplay::Trajectory>& trajs);
nlohmann::json to_json(const ActionDistribution& d);

}  // namespace sage::arena
