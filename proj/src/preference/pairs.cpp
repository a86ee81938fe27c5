#include "sage/preference/pairs.hpp"

#include <algorithm>

#include "sage/common/jsonl.hpp"
#include "sage/common/random.hpp"
#include "sage/sac/grammar.hpp"

namespace sage::preference {

using nlohmann::json;

namespace {

bool ordered_before(const PreferencePair& a, const PreferencePair& b) {
  return std::tie(a.provenance.trajectory_id, a.provenance.turn_index) <
         std::tie(b.provenance.trajectory_id, b.provenance.turn_index);
}

}  // namespace

PairSet make_pairs(const std::vector<selfplay::Trajectory>& trajs, std::uint64_t seed) {
  PairSet out;
  for (const auto& t : trajs) {
    sac::SacDialogue history;
    for (std::size_t turn = 0; turn < t.exchanges.size(); ++turn) {
      const auto& ex = t.exchanges[turn];
      const auto& set = ex.candidates;
      history.open_user_turn = ex.user_text;
      const auto chosen = sac::render_system_message(set.chosen());

      std::vector<std::size_t> pool;
      for (std::size_t i = 0; i < set.candidates.size(); ++i)
        if (i != set.selected && sac::render_system_message(set.candidates[i]) != chosen) pool.push_back(i);

      if (pool.empty()) {
        ++out.skip_count;
      } else {
        const auto draw_seed = derive_seed(seed, fnv1a(t.id), turn);
        Rng rng(draw_seed);
        const auto r = pool[rng.below(pool.size())];
        out.pairs.push_back({sac::render_sac(history), chosen, sac::render_system_message(set.candidates[r]),
                             {t.id, turn, r, draw_seed}});
      }
      history.open_user_turn.reset();
      history.exchanges.push_back({ex.user_text, set.chosen()});
    }
  }
  std::stable_sort(out.pairs.begin(), out.pairs.end(), ordered_before);
  return out;
}

json to_json(const PreferencePair& p) {
  return {{"context", p.context},
          {"chosen", p.chosen},
          {"rejected", p.rejected},
          {"provenance",
           {{"trajectory_id", p.provenance.trajectory_id},
            {"turn_index", p.provenance.turn_index},
            {"rejected_index", p.provenance.rejected_index},
            {"rng_seed", p.provenance.rng_seed}}}};
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair p;
  p.context = j.at("context").get<std::string>();
  p.chosen = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  const auto& pv = j.at("provenance");
  p.provenance = {pv.at("trajectory_id").get<std::string>(), pv.at("turn_index").get<std::size_t>(),
                  pv.at("rejected_index").get<std::size_t>(), pv.at("rng_seed").get<std::uint64_t>()};
  return p;
}

void export_dpo(std::vector<PreferencePair> pairs, const std::filesystem::path& path) {
  std::stable_sort(pairs.begin(), pairs.end(), ordered_before);
  std::vector<json> lines;
  lines.reserve(pairs.size());
  for (const auto& p : pairs) lines.push_back(to_json(p));
  jsonl::write_file(path, lines);
}

std::vector<PreferencePair> read_dpo(const std::filesystem::path& path) {
  std::vector<PreferencePair> out;
  auto stats = jsonl::read_file(path, [&](const json& j) { out.push_back(pair_from_json(j)); });
  if (stats.corrupt) throw std::runtime_error(path.string() + ": " + std::to_string(stats.corrupt) + " bad DPO lines");
  return out;
}

}  // namespace sage::preference
