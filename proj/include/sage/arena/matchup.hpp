#pragma once

#include "sage/arena/stats.hpp"
#include "sage/selfplay/rollout.hpp"

namespace sage::arena {

struct Contender {
  std::string name;       // column label, e.g. "SAGE_2"
  llm::Gateway* agent = nullptr;
  std::string model_id;
};

struct NamedJudge {
  std::string name;
  JudgeSpec spec;
};

struct PairRecord {
  std::size_t seed_index = 0;
  std::string dialog_a;
  std::string dialog_b;
  std::vector<ConsistentVerdict> verdicts;  // one per judge
  std::string failure;                      // rollout error, pair excluded
};

struct MatchupResult {
  std::vector<ComparisonReport> reports;  // one per judge
  std::vector<PairRecord> pairs;
};

/// Rolls out both contenders on every seed against the same user model and
/// judges the stripped transcripts. Rollouts use one candidate per turn and
/// no selector regardless of `cfg`.
MatchupResult run_matchup(const Contender& x, const Contender& y, llm::Gateway& user,
                          const std::vector<corpus::SeedSituation>& seeds, const selfplay::RolloutConfig& cfg,
                          const std::vector<NamedJudge>& judges, int parallel = 4);

/// Judges already-rendered transcript pairs (dialog_a/dialog_b filled in).
/// Reports count only pairs without a failure.
std::vector<ComparisonReport> judge_pairs(std::vector<PairRecord>& pairs, const std::vector<NamedJudge>& judges,
                                          const std::string& name_a, const std::string& name_b, int parallel = 4);

}  // namespace sage::arena
