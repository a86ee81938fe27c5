#include <catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>

#include "sage/common/digest.hpp"
#include "sage/common/jsonl.hpp"
#include "sage/llm/cassette.hpp"
#include "sage/llm/scripted.hpp"
#include "sage/sac/grammar.hpp"
#include "sage/selfplay/dataset.hpp"
#include "support/files.hpp"

using namespace sage;
using namespace sage::selfplay;
using nlohmann::json;

namespace {

corpus::SeedSituation situation(std::string s = "I finally got my driving license today!") {
  return {std::move(s), "proud"};
}

RolloutConfig small_cfg(int exchanges = 3, int candidates = 4) {
  auto c = RolloutConfig::search();
  c.max_exchanges = exchanges;
  c.candidates_per_turn = candidates;
  c.seed = 17;
  return c;
}

struct Mocks {
  std::shared_ptr<llm::ScriptedBackend> backend = std::make_shared<llm::ScriptedBackend>(3);
  llm::Gateway agent{backend};
  llm::Gateway user{backend};
  llm::Gateway selector{backend};
  Models models() { return {agent, user, &selector}; }
};

sac::SacDialogue open_history(std::string text) {
  sac::SacDialogue h;
  h.open_user_turn = std::move(text);
  return h;
}

}  // namespace

TEST_CASE("rollout config", "[selfplay]") {
  auto s = RolloutConfig::search();
  CHECK(s.max_exchanges == 12);
  CHECK(s.candidates_per_turn == 16);
  CHECK(s.agent_params.top_k == 100);
  CHECK(s.agent_params.temperature == 1.1);
  CHECK(s.agent_params.repetition_penalty == 1.1);
  auto e = RolloutConfig::evaluation();
  CHECK(e.max_exchanges == 8);
  CHECK_NOTHROW(e.validate());
  s.candidates_per_turn = 1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = RolloutConfig::search();
  s.max_exchanges = 0;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  auto round = rollout_config_from_json(to_json(small_cfg()));
  CHECK(to_json(round) == to_json(small_cfg()));
}

TEST_CASE("generate_candidates", "[selfplay]") {
  Mocks m;
  auto cfg = small_cfg(3, 16);
  SECTION("mock n=16 yields 16 parsed candidates") {
    auto set = generate_candidates(open_history("hello"), cfg, m.agent, 1, 0);
    CHECK(set.candidates.size() == 16);
    CHECK(set.dropped == 0);
    CHECK(set.requested == 16);
  }
  SECTION("malformed candidates are regenerated") {
    std::atomic<bool> first{true};
    m.backend->add_handler([&](const llm::ChatRequest& r, std::size_t i) -> std::optional<std::string> {
      if (r.purpose != llm::Purpose::agent || !first) return std::nullopt;
      if (i + 1 == static_cast<std::size_t>(r.params.n)) first = false;
      if (i < 3) return "no blocks here";
      return std::nullopt;
    });
    auto set = generate_candidates(open_history("hello"), cfg, m.agent, 1, 0);
    CHECK(set.candidates.size() == 16);
    CHECK(set.dropped == 0);
    CHECK(m.backend->calls() == 2);
  }
  SECTION("budget exhausted keeps the parsed ones") {
    m.backend->add_handler([](const llm::ChatRequest&, std::size_t i) -> std::optional<std::string> {
      if (i == 0) return "[u_state] u_motivation: x [/u_state] broken";
      return std::nullopt;
    });
    cfg.regeneration_budget = 1;
    auto set = generate_candidates(open_history("hello"), cfg, m.agent, 1, 0);
    CHECK(set.candidates.size() == 15);
    CHECK(set.dropped == 1);
  }
  SECTION("all malformed throws") {
    m.backend->add_handler([](const llm::ChatRequest&, std::size_t) -> std::optional<std::string> { return "junk"; });
    CHECK_THROWS_AS(generate_candidates(open_history("hello"), cfg, m.agent, 1, 0), AllCandidatesMalformed);
  }
  SECTION("requires an open user turn") {
    CHECK_THROWS_AS(generate_candidates(sac::SacDialogue{}, cfg, m.agent, 1, 0), std::invalid_argument);
  }
}

TEST_CASE("selector", "[selfplay][selector]") {
  SECTION("reply parsing is 1-indexed") {
    CHECK(parse_selector_reply("3", 16) == 3u);
    CHECK(parse_selector_reply("I think candidate 5 is best", 16) == 5u);
    CHECK(parse_selector_reply("Candidate #12.", 16) == 12u);
    CHECK(parse_selector_reply("Among 20 options, 7", 16) == 7u);
    CHECK(parse_selector_reply("Candidate 40, no wait, 2", 16) == 2u);
    CHECK_FALSE(parse_selector_reply("they are all lovely", 16));
    CHECK_FALSE(parse_selector_reply("0", 16));
  }

  Mocks m;
  auto cfg = small_cfg(3, 6);
  auto hist = open_history("I adopted a cat.");
  auto cands = generate_candidates(hist, cfg, m.agent, 9, 0);

  SECTION("prompt lists rubric and numbered candidates in presentation order") {
    std::vector<std::size_t> order{2, 0, 1, 3, 5, 4};
    auto p = selector_prompt(hist, cands.candidates, order);
    for (auto w : {"consistency", "humor", "sympathy", "informativeness", "appropriateness", "respect"})
      CHECK(p.find(w) != std::string::npos);
    CHECK(p.find("Candidate 1: " + cands.candidates[2].response) != std::string::npos);
    CHECK(p.find("Candidate 6: " + cands.candidates[4].response) != std::string::npos);
    CHECK(p.find("[a_action]") == std::string::npos);
  }
  SECTION("scripted numeric reply maps through the permutation") {
    llm::Gateway sel(std::make_shared<llm::ScriptedBackend>(0, std::vector<llm::ScriptRule>{{"*", {"3"}}}));
    auto s = select_best(hist, cands, sel, cfg, 9);
    REQUIRE(s.order.size() == 6);
    CHECK(s.index == s.order[2]);
    CHECK_FALSE(s.fallback);
    CHECK(s.raw == "3");
  }
  SECTION("prose reply") {
    llm::Gateway sel(std::make_shared<llm::ScriptedBackend>(
        0, std::vector<llm::ScriptRule>{{"*", {"Honestly candidate 5 is best."}}}));
    auto s = select_best(hist, cands, sel, cfg, 9);
    CHECK(s.index == s.order[4]);
  }
  SECTION("unparseable twice falls back to 0") {
    auto b = std::make_shared<llm::ScriptedBackend>(0, std::vector<llm::ScriptRule>{{"*", {"no idea", "still no"}}});
    llm::Gateway sel(b);
    auto s = select_best(hist, cands, sel, cfg, 9);
    CHECK(s.index == 0);
    CHECK(s.fallback);
    CHECK(b->calls() == 2);
  }
  SECTION("retry succeeds on second reply") {
    llm::Gateway sel(std::make_shared<llm::ScriptedBackend>(
        0, std::vector<llm::ScriptRule>{{"*", {"hmm", "Candidate 1"}}}));
    auto s = select_best(hist, cands, sel, cfg, 9);
    CHECK(s.index == s.order[0]);
    CHECK_FALSE(s.fallback);
  }
  SECTION("presentation order is seeded") {
    llm::Gateway sel(std::make_shared<llm::ScriptedBackend>(0, std::vector<llm::ScriptRule>{{"*", {"1"}}}));
    CHECK(select_best(hist, cands, sel, cfg, 9).order == select_best(hist, cands, sel, cfg, 9).order);
    bool differs = false;
    for (std::uint64_t k = 10; k < 20 && !differs; ++k)
      differs = select_best(hist, cands, sel, cfg, k).order != select_best(hist, cands, sel, cfg, 9).order;
    CHECK(differs);
  }
}

TEST_CASE("simulate", "[selfplay][simulate]") {
  Mocks m;
  SECTION("three exchanges opened by the seed statement") {
    auto t = simulate(situation(), small_cfg(3), m.models(), "t0");
    REQUIRE(t.exchanges.size() == 3);
    CHECK(t.exchanges[0].user_text == situation().statement);
    CHECK(t.end_reason == EndReason::max_exchanges);
    CHECK_FALSE(t.truncated);
    for (const auto& ex : t.exchanges) {
      CHECK(ex.candidates.candidates.size() == 4);
      CHECK(ex.candidates.selected < 4);
      CHECK(ex.user_text.find("[u_state]") == std::string::npos);
    }
  }
  SECTION("deterministic under a fixed seed") {
    Mocks other;
    auto a = to_json(simulate(situation(), small_cfg(4), m.models(), "t0"));
    auto b = to_json(simulate(situation(), small_cfg(4), other.models(), "t0"));
    CHECK(a == b);
    auto cfg = small_cfg(4);
    cfg.seed = 18;
    CHECK(to_json(simulate(situation(), cfg, other.models(), "t0")) != a);
  }
  SECTION("search settings are recorded in the trajectory") {
    auto cfg = RolloutConfig::search();
    cfg.max_exchanges = 1;
    auto t = simulate(situation(), cfg, m.models(), "t0");
    CHECK(t.config["max_exchanges"] == 1);
    CHECK(t.config["candidates_per_turn"] == 16);
    CHECK(t.config["agent_params"]["top_k"] == 100);
    CHECK(t.config["agent_params"]["temperature"] == 1.1);
    CHECK(t.config["agent_params"]["repetition_penalty"] == 1.1);
    CHECK(t.exchanges[0].candidates.candidates.size() == 16);
  }
  SECTION("fan-out mode does not change serial vs concurrent results") {
    auto cfg = small_cfg(3, 5);
    cfg.fanout = Fanout::serial;
    auto serial = to_json(simulate(situation(), cfg, m.models(), "t1"));
    cfg.fanout = Fanout::concurrent;
    Mocks other;
    auto concurrent = to_json(simulate(situation(), cfg, other.models(), "t1"));
    serial["config"].erase("fanout");
    concurrent["config"].erase("fanout");
    CHECK(serial == concurrent);
  }
  SECTION("history consistency and user view") {
    const auto dir = testing::scratch_dir("history");
    auto backend = std::make_shared<llm::ScriptedBackend>(3);
    llm::Gateway agent(std::make_shared<llm::RecordingBackend>(backend, dir / "agent.jsonl"));
    llm::Gateway user(std::make_shared<llm::RecordingBackend>(backend, dir / "user.jsonl"));
    llm::Gateway selector(backend);
    auto t = simulate(situation(), small_cfg(4), {agent, user, &selector}, "t2");
    auto calls = llm::read_cassette(dir / "agent.jsonl");
    REQUIRE(calls.size() == 4);
    for (std::size_t i = 0; i + 1 < t.exchanges.size(); ++i) {
      const auto& msgs = calls[i + 1].request.messages;
      CHECK(msgs[2 * i + 1].role == llm::Role::assistant);
      CHECK(msgs[2 * i + 1].content == sac::render_system_message(t.exchanges[i].candidates.chosen()));
      CHECK(msgs[2 * i + 2].content == t.exchanges[i + 1].user_text);
    }
    auto ucalls = llm::read_cassette(dir / "user.jsonl");
    REQUIRE(ucalls.size() == 3);
    for (const auto& c : ucalls) {
      CHECK(c.request.params.n == 1);
      CHECK(c.request.messages[0].role == llm::Role::system);
      CHECK(c.request.messages[0].content.find(situation().statement) != std::string::npos);
      CHECK(c.request.messages[1].role == llm::Role::assistant);
      CHECK(c.request.messages[1].content == situation().statement);
      for (const auto& msg : c.request.messages) CHECK(msg.content.find("[a_action]") == std::string::npos);
    }
  }
  SECTION("end marker stops the conversation") {
    std::atomic<int> user_turns{0};
    m.backend->add_handler([&](const llm::ChatRequest& r, std::size_t) -> std::optional<std::string> {
      if (r.purpose != llm::Purpose::user_sim) return std::nullopt;
      return ++user_turns == 2 ? "ok bye [END]" : std::optional<std::string>{};
    });
    auto t = simulate(situation(), small_cfg(6), m.models(), "t3");
    CHECK(t.exchanges.size() == 2);
    CHECK(t.end_reason == EndReason::end_marker);
    CHECK_FALSE(t.truncated);
  }
  SECTION("all-malformed turn truncates and flags") {
    std::atomic<int> agent_calls{0};
    m.backend->add_handler([&](const llm::ChatRequest& r, std::size_t i) -> std::optional<std::string> {
      if (r.purpose != llm::Purpose::agent) return std::nullopt;
      if (i == 0) ++agent_calls;
      return agent_calls > 1 ? std::optional<std::string>{"malformed"} : std::nullopt;
    });
    auto t = simulate(situation(), small_cfg(5), m.models(), "t4");
    CHECK(t.truncated);
    CHECK(t.end_reason == EndReason::aborted);
    CHECK(t.exchanges.size() == 1);
    CHECK(t.truncation_note.find("malformed") != std::string::npos);
  }
  SECTION("gateway errors carry the partial trajectory") {
    std::atomic<int> user_calls{0};
    m.backend->add_handler([&](const llm::ChatRequest& r, std::size_t) -> std::optional<std::string> {
      if (r.purpose == llm::Purpose::user_sim && ++user_calls == 2)
        throw llm::GatewayError(llm::ErrorKind::client, "bad request", 400);
      return std::nullopt;
    });
    try {
      simulate(situation(), small_cfg(5), m.models(), "t5");
      FAIL("expected RolloutError");
    } catch (const RolloutError& e) {
      CHECK(e.partial().exchanges.size() == 2);
      CHECK(e.partial().truncated);
    }
  }
  SECTION("evaluation rollouts skip the selector") {
    auto cfg = RolloutConfig::evaluation();
    llm::Gateway agent(m.backend), user(m.backend);
    auto t = simulate(situation(), cfg, {agent, user, nullptr}, "e0");
    CHECK(t.exchanges.size() == 8);
    for (const auto& ex : t.exchanges) {
      CHECK(ex.candidates.candidates.size() == 1);
      CHECK(ex.candidates.selector_raw.empty());
    }
  }
  SECTION("trajectory json round trip") {
    auto t = simulate(situation(), small_cfg(3), m.models(), "t6");
    CHECK(to_json(trajectory_from_json(to_json(t))) == to_json(t));
  }
}

TEST_CASE("refinement dataset", "[selfplay][dataset]") {
  Mocks m;
  SECTION("one trajectory, three exchanges") {
    RefinementStats st;
    auto recs = extract_refinement_dataset({simulate(situation(), small_cfg(3), m.models(), "d0")}, &st);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0]["mask_spans"].size() == 3);
    CHECK(recs[0]["id"] == "d0");
    CHECK(st.included == 1);
  }
  SECTION("truncated trajectories are excluded and counted") {
    auto good = simulate(situation(), small_cfg(2), m.models(), "d1");
    auto bad = good;
    bad.id = "d2";
    bad.truncated = true;
    Trajectory empty;
    empty.id = "d3";
    RefinementStats st;
    auto recs = extract_refinement_dataset({good, bad, empty}, &st);
    CHECK(recs.size() == 1);
    CHECK(st.excluded_truncated == 1);
    CHECK(st.excluded_empty == 1);
  }
  SECTION("fixture batch matches the golden dataset") {
    std::vector<corpus::SeedSituation> seeds{situation(), situation("My sister is visiting next week."),
                                             situation("I burned dinner again.")};
    auto trajs = simulate_all(seeds, small_cfg(3, 4), m.models(), "g-");
    std::string text;
    for (const auto& r : extract_refinement_dataset(trajs)) text += jsonl::dump_line(r) + "\n";
    const auto golden_path = testing::fixture("golden/v1/refinement_dataset.jsonl");
    if (std::getenv("SAGE_RECORD_GOLDEN")) {
      std::ofstream(golden_path, std::ios::binary) << text;
    }
    CHECK(text == testing::read_file(golden_path));
  }
}

TEST_CASE("iterate", "[selfplay][iterate]") {
  std::vector<corpus::SeedSituation> seeds{situation(), situation("I start a new job on Monday.")};
  IterateOptions opts;
  opts.k = 1;
  opts.agent_model = "SAGE_1";
  opts.user_model = "SAGE_1";

  SECTION("round artifacts and manifest") {
    Mocks m;
    opts.out_dir = testing::scratch_dir("iterate");
    auto art = iterate(opts, small_cfg(2, 3), seeds, m.models());
    CHECK(art.dir == opts.out_dir / "round_1");
    CHECK(art.manifest["round"] == 1);
    CHECK(art.manifest["user_model"] == "SAGE_1");
    CHECK(art.manifest["next_model"] == "SAGE_2");
    CHECK(art.manifest["outputs"]["dataset.jsonl"]["path"] == "dataset.jsonl");
    CHECK(art.manifest["outputs"]["dataset.jsonl"]["records"] == 2);
    auto train = json::parse(testing::read_file(art.dir / "train_config.json"));
    CHECK(train["epochs"] == 5);
    CHECK(train["base_model"] == "SAGE_1");
    CHECK(std::filesystem::exists(art.dir / "trajectories.jsonl"));
  }
  SECTION("re-running reproduces the manifest hash") {
    Mocks m1, m2;
    opts.out_dir = testing::scratch_dir("iterate-a");
    auto a = iterate(opts, small_cfg(2, 3), seeds, m1.models());
    opts.out_dir = testing::scratch_dir("iterate-b");
    auto b = iterate(opts, small_cfg(2, 3), seeds, m2.models());
    CHECK(sha256_file(a.dir / "manifest.json") == sha256_file(b.dir / "manifest.json"));
  }
  SECTION("missing model id is a configuration error") {
    Mocks m;
    opts.out_dir = testing::scratch_dir("iterate-c");
    opts.agent_model.clear();
    CHECK_THROWS_AS(iterate(opts, small_cfg(2, 3), seeds, m.models()), ConfigError);
  }
}
