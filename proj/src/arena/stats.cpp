#include "sage/arena/stats.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "sage/common/text.hpp"

namespace sage::arena {

using nlohmann::json;

namespace {

double log_choose(double n, double k) { return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1); }

double pct(std::uint64_t x, std::uint64_t total) {
  if (total == 0) return 0.0;
  return std::round(1000.0 * static_cast<double>(x) / static_cast<double>(total)) / 10.0;
}

}  // namespace

SignTestResult sign_test(std::uint64_t wins_a, std::uint64_t wins_b) {
  const std::uint64_t n = wins_a + wins_b;
  if (n == 0) throw std::invalid_argument("sign test needs at least one decisive comparison");
  const std::uint64_t k = std::max(wins_a, wins_b);
  // Upper tail P(X >= k) = C(n,k)/2^n * sum_{i>=k} C(n,i)/C(n,k). For k >= n/2
  // the ratios shrink monotonically, so the sum is well conditioned.
  double ratio = 1.0, sum = 1.0;
  for (std::uint64_t i = k; i < n; ++i) {
    ratio *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    sum += ratio;
    if (ratio < sum * 1e-17) break;
  }
  const double ln_p = std::log(2.0) + log_choose(static_cast<double>(n), static_cast<double>(k)) + std::log(sum) -
                      static_cast<double>(n) * std::log(2.0);
  SignTestResult r;
  r.log10_p = std::min(0.0, ln_p / std::log(10.0));
  r.p = std::pow(10.0, r.log10_p);
  return r;
}

std::string_view to_string(Significance s) {
  switch (s) {
    case Significance::none: return "";
    case Significance::star: return "*";
    case Significance::double_star: return "**";
  }
  return "";
}

Significance significance_of(double log10_p) {
  if (log10_p < -50.0) return Significance::double_star;
  if (log10_p < -10.0) return Significance::star;
  return Significance::none;
}

ComparisonReport aggregate(std::uint64_t a_wins, std::uint64_t ties, std::uint64_t b_wins) {
  ComparisonReport r;
  r.a_wins = a_wins;
  r.ties = ties;
  r.b_wins = b_wins;
  r.total = a_wins + ties + b_wins;
  r.pct_a = pct(a_wins, r.total);
  r.pct_tie = pct(ties, r.total);
  r.pct_b = pct(b_wins, r.total);
  if (a_wins + b_wins > 0) {
    r.sign = sign_test(a_wins, b_wins);
    r.significance = significance_of(r.sign->log10_p);
  }
  return r;
}

ComparisonReport aggregate(const std::vector<ConsistentVerdict>& verdicts) {
  std::uint64_t a = 0, t = 0, b = 0;
  for (const auto& v : verdicts) {
    switch (v.winner) {
      case Winner::A: ++a; break;
      case Winner::B: ++b; break;
      case Winner::tie_inconsistent: ++t; break;
    }
  }
  return aggregate(a, t, b);
}

json to_json(const ComparisonReport& r) {
  json j = {{"method_a", r.method_a}, {"method_b", r.method_b}, {"judge", r.judge},
            {"a_wins", r.a_wins},     {"ties", r.ties},         {"b_wins", r.b_wins},
            {"total", r.total},       {"pct_a", r.pct_a},       {"pct_tie", r.pct_tie},
            {"pct_b", r.pct_b},       {"failures", r.failures}, {"significance", to_string(r.significance)}};
  if (r.sign) {
    j["p_value"] = r.sign->p;
    j["log10_p_value"] = r.sign->log10_p;
  } else {
    j["p_value"] = nullptr;
    j["log10_p_value"] = nullptr;
  }
  return j;
}

std::string format_table(const std::vector<ComparisonReport>& reports) {
  auto cell = [](std::uint64_t n, double p) {
    std::ostringstream s;
    s << n << " (" << std::fixed << std::setprecision(1) << p << "%)";
    return s.str();
  };
  auto pval = [](const ComparisonReport& r) -> std::string {
    if (!r.sign) return "n/a";
    std::ostringstream s;
    if (r.sign->p > 0) s << std::scientific << std::setprecision(2) << r.sign->p;
    else s << "1e" << std::fixed << std::setprecision(1) << r.sign->log10_p;
    return s.str();
  };
  std::vector<std::vector<std::string>> rows{{"Method A", "Method B", "Judge", "A Wins", "Ties", "B Wins", "p", ""}};
  for (const auto& r : reports)
    rows.push_back({r.method_a, r.method_b, r.judge, cell(r.a_wins, r.pct_a), cell(r.ties, r.pct_tie),
                    cell(r.b_wins, r.pct_b), pval(r), std::string(to_string(r.significance))});
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) line += " | ";
      line += rows[i][c] + std::string(width[c] - rows[i][c].size(), ' ');
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 3 * (width.size() - 1), '-') + "\n";
    }
  }
  return out;
}

ActionDistribution action_distribution(const std::vector<selfplay::Trajectory>& trajs) {
  ActionDistribution d;
  std::uint64_t words = 0;
  for (const auto& t : trajs) {
    for (const auto& ex : t.exchanges) {
      const auto& turn = ex.candidates.chosen();
      ++d.motivation[turn.action.motivation.value_or("null")];
      ++d.emotion[turn.action.emotion.value_or("null")];
      words += text::word_count(turn.response);
      ++d.turns;
    }
  }
  if (d.turns) d.mean_response_words = static_cast<double>(words) / static_cast<double>(d.turns);
  return d;
}

json to_json(const ActionDistribution& d) {
  return {{"motivation", d.motivation},
          {"emotion", d.emotion},
          {"turns", d.turns},
          {"mean_response_words", d.mean_response_words}};
}

}  // namespace sage::arena
