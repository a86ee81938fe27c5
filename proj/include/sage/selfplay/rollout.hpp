#pragma once

#include <stdexcept>

#include "sage/llm/gateway.hpp"
#include "sage/selfplay/types.hpp"

namespace sage::selfplay {

/// Thrown when every candidate for a turn stayed malformed.
class AllCandidatesMalformed : public std::runtime_error {
 public:
  AllCandidatesMalformed(std::size_t turn, std::size_t attempts)
      : std::runtime_error("turn " + std::to_string(turn) + ": all candidates malformed after " +
                           std::to_string(attempts) + " generations") {}
};

/// A gateway failure mid-rollout; carries what was simulated so far.
class RolloutError : public std::runtime_error {
 public:
  RolloutError(const std::string& what, Trajectory partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}
  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

/// Agent view: user turns as "user", selected SAC turns (blocks included) as
/// "assistant". `history` ends with the open user turn.
std::vector<llm::Message> agent_messages(const sac::SacDialogue& history);

/// User-simulator view: roles flipped, agent blocks stripped, prefixed by a
/// short persona instruction built from the seed situation.
std::vector<llm::Message> user_messages(const sac::SacDialogue& history, const corpus::SeedSituation& seed,
                                        const std::string& end_marker);

/// Selector prompt listing the candidate responses (numbered from 1, in
/// `order`) under the companion-chatbot rubric.
std::string selector_prompt(const sac::SacDialogue& history, const std::vector<sac::SacSystemTurn>& candidates,
                            const std::vector<std::size_t>& order);

/// 1-based candidate number from a selector reply: "candidate N" wins,
/// otherwise the first integer in [1, count].
std::optional<std::size_t> parse_selector_reply(std::string_view reply, std::size_t count);

/// Per-trajectory RNG stream key.
std::uint64_t trajectory_key(const RolloutConfig& cfg, const std::string& trajectory_id);

/// Samples and parses candidates for the open user turn, regenerating
/// malformed ones within the budget. Selection fields are left unset.
CandidateSet generate_candidates(const sac::SacDialogue& history, const RolloutConfig& cfg, llm::Gateway& agent,
                                 std::uint64_t traj_key, std::size_t turn);

struct Selection {
  std::size_t index = 0;
  std::string raw;
  std::vector<std::size_t> order;
  bool fallback = false;
};

/// Shuffles the presentation order, asks the selector, retries once on an
/// unparseable reply, then falls back to candidate 0.
Selection select_best(const sac::SacDialogue& history, const CandidateSet& cands, llm::Gateway& selector,
                      const RolloutConfig& cfg, std::uint64_t traj_key);

struct Models {
  llm::Gateway& agent;
  llm::Gateway& user;
  llm::Gateway* selector = nullptr;  // required when cfg.use_selector
};

/// One self-play conversation opened by `seed.statement`.
Trajectory simulate(const corpus::SeedSituation& seed, const RolloutConfig& cfg, Models models,
                    const std::string& trajectory_id);

/// Runs `seeds` with up to `parallel` trajectories in flight. Ids are
/// "<prefix><index>"; output order follows the input. Gateway failures
/// come back as truncated partial trajectories.
std::vector<Trajectory> simulate_all(const std::vector<corpus::SeedSituation>& seeds, const RolloutConfig& cfg,
                                     Models models, const std::string& id_prefix = "traj-", int parallel = 4);

}  // namespace sage::selfplay
