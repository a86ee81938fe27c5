#pragma once

#include <filesystem>

#include "sage/selfplay/rollout.hpp"

namespace sage::selfplay {

struct RefinementStats {
  std::size_t trajectories = 0;
  std::size_t included = 0;
  std::size_t excluded_truncated = 0;
  std::size_t excluded_empty = 0;
  std::size_t exchanges = 0;

  nlohmann::json to_json() const;
};

/// One dataset record per usable trajectory: the selected candidates as
/// system turns, user turns masked out.
std::vector<nlohmann::json> extract_refinement_dataset(const std::vector<Trajectory>& trajs,
                                                       RefinementStats* stats = nullptr);

struct IterateOptions {
  int k = 1;
  /// Agent for round k (SAGE_k) and the fixed user simulator (SAGE_1).
  std::string agent_model;
  std::string user_model;
  std::string base_model;  // defaults to agent_model
  int epochs = 5;
  std::filesystem::path out_dir;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoundArtifacts {
  std::filesystem::path dir;
  nlohmann::json manifest;
};

/// Writes round_<k>/ with trajectories.jsonl, dataset.jsonl,
/// train_config.json and manifest.json. The fine-tune itself runs elsewhere.
RoundArtifacts write_round(const IterateOptions& opts, const RolloutConfig& cfg,
                           const std::vector<corpus::SeedSituation>& seeds, const std::vector<Trajectory>& trajs);

/// Rolls out every seed with SAGE_k as agent and SAGE_1 as user, then
/// writes the round. Model ids in `cfg` are overridden from `opts`.
RoundArtifacts iterate(const IterateOptions& opts, RolloutConfig cfg, const std::vector<corpus::SeedSituation>& seeds,
                       Models models, int parallel = 4);

}  // namespace sage::selfplay
