#pragma once

#include <filesystem>

#include "sage/selfplay/types.hpp"

namespace sage::preference {

struct Provenance {
  std::string trajectory_id;
  std::size_t turn_index = 0;
  std::size_t rejected_index = 0;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct PreferencePair {
  std::string context;  // SAC history through the triggering user message
  std::string chosen;   // full SAC system message
  std::string rejected;
  Provenance provenance;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct PairSet {
  std::vector<PreferencePair> pairs;
  std::size_t skip_count = 0;  // turns whose reject pool was empty
};

/// One pair per agent turn: chosen is the selected candidate, rejected is
/// drawn uniformly from the other candidates whose rendering differs from
/// the chosen one. Output is ordered by (trajectory id, turn).
PairSet make_pairs(const std::vector<selfplay::Trajectory>& trajs, std::uint64_t seed);

nlohmann::json to_json(const PreferencePair& p);
PreferencePair pair_from_json(const nlohmann::json& j);

/// {"context","chosen","rejected","provenance"} per line.
void export_dpo(std::vector<PreferencePair> pairs, const std::filesystem::path& path);
std::vector<PreferencePair> read_dpo(const std::filesystem::path& path);

}  // namespace sage::preference
