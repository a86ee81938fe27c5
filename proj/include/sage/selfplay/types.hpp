#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/corpus/seeds.hpp"
#include "sage/llm/types.hpp"
#include "sage/sac/types.hpp"

namespace sage::selfplay {

enum class Fanout {
  batched,     // one request with n = candidates_per_turn
  serial,      // one request per candidate, issued in order
  concurrent,  // one request per candidate, issued together
};

std::string_view to_string(Fanout f);
Fanout fanout_from_string(std::string_view s);

struct RolloutConfig {
  int max_exchanges = 12;
  int candidates_per_turn = 16;
  llm::SamplingParams agent_params;
  llm::SamplingParams user_params;
  std::string agent_model = "SAGE_1";
  std::string user_model = "SAGE_1";
  std::string selector_model = "selector";
  std::uint64_t seed = 0;
  /// Either side emitting this string ends the conversation.
  std::string end_marker = "[END]";
  /// Extra generation rounds for candidates that fail to parse.
  int regeneration_budget = 2;
  Fanout fanout = Fanout::batched;
  /// Evaluation rollouts take one candidate and skip the selector.
  bool use_selector = true;
  int model_iteration = 1;

  /// Tree-search defaults: 12 exchanges, 16 candidates.
  static RolloutConfig search();
  /// Evaluation defaults: 8 exchanges, a single candidate, no selector.
  static RolloutConfig evaluation();

  void validate() const;
};

nlohmann::json to_json(const RolloutConfig& c);
RolloutConfig rollout_config_from_json(const nlohmann::json& j, RolloutConfig base = RolloutConfig::search());

struct CandidateSet {
  std::size_t turn_index = 0;
  std::vector<sac::SacSystemTurn> candidates;
  std::size_t selected = 0;
  std::string selector_raw;
  /// Candidate indices in the order the selector saw them.
  std::vector<std::size_t> presentation_order;
  bool fallback = false;
  std::size_t requested = 0;
  /// Slots still malformed after the regeneration budget.
  std::size_t dropped = 0;

  const sac::SacSystemTurn& chosen() const { return candidates.at(selected); }
};

struct Exchange {
  std::string user_text;
  CandidateSet candidates;
};

enum class EndReason { max_exchanges, end_marker, aborted };

std::string_view to_string(EndReason r);

struct Trajectory {
  std::string id;
  corpus::SeedSituation seed;
  std::vector<Exchange> exchanges;
  int model_iteration_k = 1;
  EndReason end_reason = EndReason::max_exchanges;
  /// Set when a turn was aborted; such trajectories are kept out of datasets.
  bool truncated = false;
  std::string truncation_note;
  nlohmann::json config = nlohmann::json::object();

  /// History as the agent saw it: (user text, selected turn) pairs.
  sac::SacDialogue selected_dialogue() const;
};

nlohmann::json to_json(const CandidateSet& c);
CandidateSet candidate_set_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path);
void write_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);

}  // namespace sage::selfplay
