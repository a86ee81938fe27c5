#include <catch_amalgamated.hpp>

#include <cmath>

#include "sage/llm/scripted.hpp"
#include "sage/preference/pairs.hpp"
#include "sage/sac/grammar.hpp"
#include "sage/selfplay/rollout.hpp"
#include "support/files.hpp"

using namespace sage;
using namespace sage::preference;

namespace {

sac::SacSystemTurn turn(const std::string& response) {
  return {{"venting", "sad", {"work"}}, {"sympathy", "caring", {"work"}}, response};
}

/// One trajectory, one turn, 16 distinct candidates, candidate 5 selected.
selfplay::Trajectory fixture(std::string id = "fx", std::size_t n = 16, std::size_t selected = 5) {
  selfplay::Trajectory t;
  t.id = std::move(id);
  selfplay::CandidateSet set;
  for (std::size_t i = 0; i < n; ++i) set.candidates.push_back(turn("response " + std::to_string(i)));
  set.selected = selected;
  t.exchanges.push_back({"My boss yelled at me.", set});
  return t;
}

std::vector<selfplay::Trajectory> rollouts() {
  auto backend = std::make_shared<llm::ScriptedBackend>(8);
  llm::Gateway gw(backend);
  auto cfg = selfplay::RolloutConfig::search();
  cfg.max_exchanges = 3;
  cfg.seed = 4;
  return selfplay::simulate_all({{"I passed my exam!", "proud"}, {"My cat is sick.", "sad"}}, cfg, {gw, gw, &gw});
}

}  // namespace

TEST_CASE("make_pairs", "[preference]") {
  SECTION("16 candidates give one pair with a different rejected index") {
    auto set = make_pairs({fixture()}, 1);
    REQUIRE(set.pairs.size() == 1);
    const auto& p = set.pairs[0];
    CHECK(p.provenance.rejected_index != 5);
    CHECK(p.chosen == sac::render_system_message(turn("response 5")));
    CHECK(p.rejected == sac::render_system_message(turn("response " + std::to_string(p.provenance.rejected_index))));
    CHECK(p.context == "<user> My boss yelled at me.\n");
    CHECK(p.chosen != p.rejected);
    CHECK_NOTHROW(sac::parse_system_message(p.rejected));
  }
  SECTION("degenerate pool is skipped") {
    auto t = fixture();
    for (auto& c : t.exchanges[0].candidates.candidates) c = turn("same");
    auto set = make_pairs({t}, 1);
    CHECK(set.pairs.empty());
    CHECK(set.skip_count == 1);
  }
  SECTION("duplicates of the chosen text are never drawn") {
    auto t = fixture();
    auto& cands = t.exchanges[0].candidates.candidates;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (i != 9) cands[i] = turn("response 5");
    for (std::uint64_t s = 0; s < 50; ++s) CHECK(make_pairs({t}, s).pairs.at(0).provenance.rejected_index == 9);
  }
  SECTION("rollout invariants") {
    auto trajs = rollouts();
    auto set = make_pairs(trajs, 3);
    std::size_t turns = 0;
    for (const auto& t : trajs) turns += t.exchanges.size();
    CHECK(set.pairs.size() == turns - set.skip_count);
    for (const auto& p : set.pairs) {
      const auto& t = p.provenance.trajectory_id == trajs[0].id ? trajs[0] : trajs[1];
      const auto& set_i = t.exchanges[p.provenance.turn_index].candidates;
      CHECK(p.chosen == sac::render_system_message(set_i.chosen()));
      CHECK(p.provenance.rejected_index != set_i.selected);
      // Context includes prior SAC blocks and ends with the triggering user line.
      auto ctx = sac::parse_sac(p.context);
      CHECK(ctx.exchanges.size() == p.provenance.turn_index);
      CHECK(ctx.open_user_turn == t.exchanges[p.provenance.turn_index].user_text);
    }
    CHECK(to_json(make_pairs(trajs, 3).pairs.front()) == to_json(set.pairs.front()));
  }
  SECTION("ordering by trajectory id then turn") {
    auto set = make_pairs({fixture("b"), fixture("a"), fixture("c")}, 0);
    CHECK(set.pairs[0].provenance.trajectory_id == "a");
    CHECK(set.pairs[2].provenance.trajectory_id == "c");
  }
}

TEST_CASE("rejected index is uniform", "[preference][uniformity]") {
  const auto t = fixture();
  std::vector<int> hist(16, 0);
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) ++hist[make_pairs({t}, static_cast<std::uint64_t>(s)).pairs[0].provenance.rejected_index];
  CHECK(hist[5] == 0);
  const double p = 1.0 / 15.0, expected = draws * p, sigma = std::sqrt(draws * p * (1 - p));
  for (std::size_t i = 0; i < 16; ++i) {
    if (i == 5) continue;
    INFO("index " << i << " count " << hist[i]);
    CHECK(std::abs(hist[i] - expected) <= 3 * sigma);
  }
}

TEST_CASE("export_dpo", "[preference][io]") {
  const auto dir = testing::scratch_dir("dpo");
  auto set = make_pairs(rollouts(), 11);
  REQUIRE(set.pairs.size() >= 3);
  std::vector<PreferencePair> three(set.pairs.begin(), set.pairs.begin() + 3);
  export_dpo(three, dir / "a.jsonl");
  auto text = testing::read_file(dir / "a.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  auto back = read_dpo(dir / "a.jsonl");
  CHECK(back == three);
  std::reverse(three.begin(), three.end());
  export_dpo(three, dir / "b.jsonl");
  CHECK(testing::read_file(dir / "b.jsonl") == text);
  auto line = nlohmann::json::parse(text.substr(0, text.find('\n')));
  for (auto key : {"context", "chosen", "rejected", "provenance"}) CHECK(line.contains(key));
  CHECK_THROWS(export_dpo(three, "/proc/forbidden/x.jsonl"));
}
