#include "sage/selfplay/dataset.hpp"

#include <fstream>

#include "sage/common/digest.hpp"
#include "sage/common/jsonl.hpp"
#include "sage/sac/training.hpp"

namespace sage::selfplay {

using nlohmann::json;

json RefinementStats::to_json() const {
  return {{"trajectories", trajectories},
          {"included", included},
          {"excluded_truncated", excluded_truncated},
          {"excluded_empty", excluded_empty},
          {"exchanges", exchanges}};
}

std::vector<json> extract_refinement_dataset(const std::vector<Trajectory>& trajs, RefinementStats* stats) {
  RefinementStats s;
  std::vector<json> out;
  for (const auto& t : trajs) {
    ++s.trajectories;
    if (t.truncated) {
      ++s.excluded_truncated;
      continue;
    }
    if (t.exchanges.empty()) {
      ++s.excluded_empty;
      continue;
    }
    out.push_back(sac::dataset_record(t.id, sac::emit_training_example(t.selected_dialogue())));
    ++s.included;
    s.exchanges += t.exchanges.size();
  }
  if (stats) *stats = s;
  return out;
}

namespace {

void write_json(const std::filesystem::path& p, const json& j) {
  std::ofstream out(p, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

RoundArtifacts write_round(const IterateOptions& opts, const RolloutConfig& cfg,
                           const std::vector<corpus::SeedSituation>& seeds, const std::vector<Trajectory>& trajs) {
  if (opts.k < 1) throw ConfigError("round k must be >= 1");
  if (opts.agent_model.empty()) throw ConfigError("agent model id (SAGE_" + std::to_string(opts.k) + ") is not set");
  if (opts.user_model.empty()) throw ConfigError("user model id (SAGE_1) is not set");
  if (opts.out_dir.empty()) throw ConfigError("output directory is not set");

  const auto dir = opts.out_dir / ("round_" + std::to_string(opts.k));
  std::filesystem::create_directories(dir);

  write_trajectories(dir / "trajectories.jsonl", trajs);
  RefinementStats stats;
  jsonl::write_file(dir / "dataset.jsonl", extract_refinement_dataset(trajs, &stats));

  const auto next = "SAGE_" + std::to_string(opts.k + 1);
  json train = {{"base_model", opts.base_model.empty() ? opts.agent_model : opts.base_model},
                {"output_model", next},
                {"method", "lora"},
                {"epochs", opts.epochs},
                {"dataset", "dataset.jsonl"},
                {"loss", "mask_spans"},
                {"adapter", {{"r", nullptr}, {"alpha", nullptr}, {"dropout", nullptr}, {"target_modules", nullptr}}},
                {"learning_rate", nullptr}};
  write_json(dir / "train_config.json", train);

  std::string seed_blob;
  for (const auto& s : seeds) seed_blob += s.statement + '\t' + s.sentiment_label + '\n';
  json outputs = json::object();
  for (const char* name : {"trajectories.jsonl", "dataset.jsonl", "train_config.json"})
    outputs[name] = {{"path", name}, {"sha256", sha256_file(dir / name)}};
  outputs["trajectories.jsonl"]["records"] = trajs.size();
  outputs["dataset.jsonl"]["records"] = stats.included;

  json manifest = {{"round", opts.k},
                   {"agent_model", opts.agent_model},
                   {"user_model", opts.user_model},
                   {"next_model", next},
                   {"rollout_config", to_json(cfg)},
                   {"inputs", {{"seed_situations", seeds.size()}, {"seeds_sha256", sha256_hex(seed_blob)}}},
                   {"outputs", outputs},
                   {"counts", stats.to_json()}};
  write_json(dir / "manifest.json", manifest);
  return {dir, manifest};
}

RoundArtifacts iterate(const IterateOptions& opts, RolloutConfig cfg, const std::vector<corpus::SeedSituation>& seeds,
                       Models models, int parallel) {
  if (opts.agent_model.empty()) throw ConfigError("agent model id (SAGE_" + std::to_string(opts.k) + ") is not set");
  if (opts.user_model.empty()) throw ConfigError("user model id (SAGE_1) is not set");
  cfg.agent_model = opts.agent_model;
  cfg.user_model = opts.user_model;
  cfg.model_iteration = opts.k;
  auto trajs = simulate_all(seeds, cfg, models, "r" + std::to_string(opts.k) + "-", parallel);
  return write_round(opts, cfg, seeds, trajs);
}

}  // namespace sage::selfplay
