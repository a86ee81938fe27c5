#include "sage/arena/matchup.hpp"

#include <spdlog/spdlog.h>

#include <future>

namespace sage::arena {

std::vector<ComparisonReport> judge_pairs(std::vector<PairRecord>& pairs, const std::vector<NamedJudge>& judges,
                                          const std::string& name_a, const std::string& name_b, int parallel) {
  const std::size_t width = std::max(1, parallel);
  for (std::size_t base = 0; base < pairs.size(); base += width) {
    std::vector<std::future<std::vector<ConsistentVerdict>>> batch;
    const auto end = std::min(pairs.size(), base + width);
    for (std::size_t i = base; i < end; ++i) {
      batch.push_back(std::async(std::launch::async, [&, i] {
        std::vector<ConsistentVerdict> out;
        if (!pairs[i].failure.empty()) return out;
        for (const auto& j : judges) out.push_back(compare_pair(pairs[i].dialog_a, pairs[i].dialog_b, j.spec));
        return out;
      }));
    }
    for (std::size_t i = base; i < end; ++i) pairs[i].verdicts = batch[i - base].get();
  }

  std::vector<ComparisonReport> reports;
  for (std::size_t j = 0; j < judges.size(); ++j) {
    std::vector<ConsistentVerdict> vs;
    std::uint64_t failures = 0;
    for (const auto& p : pairs) {
      if (p.failure.empty()) vs.push_back(p.verdicts[j]);
      else ++failures;
    }
    auto r = aggregate(vs);
    r.method_a = name_a;
    r.method_b = name_b;
    r.judge = judges[j].name;
    r.failures = failures;
    reports.push_back(std::move(r));
  }
  return reports;
}

MatchupResult run_matchup(const Contender& x, const Contender& y, llm::Gateway& user,
                          const std::vector<corpus::SeedSituation>& seeds, const selfplay::RolloutConfig& cfg,
                          const std::vector<NamedJudge>& judges, int parallel) {
  if (!x.agent || !y.agent) throw std::invalid_argument("both contenders need an agent gateway");
  MatchupResult result;
  result.pairs.resize(seeds.size());
  auto rollout = [&](const Contender& c, std::size_t i) {
    auto ccfg = cfg;
    ccfg.agent_model = c.model_id.empty() ? c.name : c.model_id;
    ccfg.use_selector = false;
    ccfg.candidates_per_turn = 1;
    // Same trajectory id on both sides so the user simulator sees the same seeds.
    return selfplay::simulate(seeds[i], ccfg, {*c.agent, user, nullptr}, "seed-" + std::to_string(i));
  };
  const std::size_t width = std::max(1, parallel);
  for (std::size_t base = 0; base < seeds.size(); base += width) {
    std::vector<std::future<void>> batch;
    for (std::size_t i = base; i < std::min(seeds.size(), base + width); ++i) {
      batch.push_back(std::async(std::launch::async, [&, i] {
        auto& rec = result.pairs[i];
        rec.seed_index = i;
        try {
          auto tx = rollout(x, i);
          auto ty = rollout(y, i);
          if (tx.truncated || ty.truncated) throw std::runtime_error(tx.truncated ? tx.truncation_note : ty.truncation_note);
          rec.dialog_a = render_for_judge(tx.selected_dialogue());
          rec.dialog_b = render_for_judge(ty.selected_dialogue());
        } catch (const std::exception& e) {
          rec.failure = e.what();
          spdlog::warn("seed {}: excluded from matchup ({})", i, e.what());
        }
      }));
    }
    for (auto& f : batch) f.get();
  }
  result.reports = judge_pairs(result.pairs, judges, x.name, y.name, parallel);
  return result;
}

}  // namespace sage::arena
