// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes. Runs offline against the scripted backend.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "sage/arena/judge.hpp"
#include "sage/arena/stats.hpp"
#include "sage/common/digest.hpp"
#include "sage/common/jsonl.hpp"
#include "sage/common/random.hpp"
#include "sage/common/text.hpp"
#include "sage/corpus/seeds.hpp"
#include "sage/llm/cassette.hpp"
#include "sage/llm/scripted.hpp"
#include "sage/preference/pairs.hpp"
#include "sage/sac/grammar.hpp"
#include "sage/sac/training.hpp"
#include "sage/selfplay/dataset.hpp"
#include "sage/selfplay/rollout.hpp"
#include "sage/steer/steering.hpp"
#include "support/exact_binomial.hpp"
#include "support/files.hpp"
#include "support/sac_gen.hpp"

using namespace sage;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail.str("");
      detail << what;
    }
  }
};

using Criterion = std::function<void(Outcome&)>;

bool run(const std::string& name, double limit_s, const Criterion& c) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    c(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail.str("");
    o.detail << "exception: " << e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) {
    o.pass = false;
    o.detail << " [over time limit " << limit_s << " s]";
  }
  std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << "  (" << o.detail.str() << "; "
            << std::fixed << std::setprecision(3) << secs << " s)" << std::endl;
  return o.pass;
}

// Published matchup rows: counts and printed percentages.
struct PrintedRow {
  std::uint64_t a, t, b;
  double pct_a, pct_t, pct_b;
};
constexpr PrintedRow kRow1{688, 892, 964, 27.0, 35.0, 38.0};
constexpr PrintedRow kRow6{542, 899, 1103, 21.0, 35.0, 43.0};

void table_arithmetic(Outcome& o) {
  for (const auto& r : {kRow1, kRow6}) {
    const auto rep = arena::aggregate(r.a, r.t, r.b);
    o.require(rep.total == 2544, "total " + std::to_string(rep.total) + " != 2544");
    o.require(std::abs(rep.pct_a - r.pct_a) <= 0.5, "A% off");
    o.require(std::abs(rep.pct_tie - r.pct_t) <= 0.5, "tie% off");
    o.require(std::abs(rep.pct_b - r.pct_b) <= 0.5, "B% off");
    o.detail << r.a << "/" << r.t << "/" << r.b << " -> " << std::fixed << std::setprecision(1) << rep.pct_a << "/" << rep.pct_tie
             << "/" << rep.pct_b << "% ";
  }
}

void significance(Outcome& o) {
  // Pinned from a big-rational evaluation of the two-sided binomial tail.
  struct Pinned {
    std::uint64_t a, b;
    double log10_p;
  };
  const Pinned pinned[] = {{688, 964, -10.924302007133555}, {542, 1103, -43.476041932098815}};
  for (const auto& p : pinned) {
    const auto r = arena::sign_test(p.a, p.b);
    const double oracle = testing::exact_sign_test_log10(p.a, p.b);
    o.require(r.p < 1e-10, "p >= 1e-10 for " + std::to_string(p.a));
    o.require(std::abs(r.log10_p - p.log10_p) < 1e-9, "log10 p differs from pinned value");
    o.require(std::abs(r.log10_p - oracle) < 1e-9, "log10 p differs from big-rational oracle");
    o.require(arena::significance_of(r.log10_p) != arena::Significance::none, "no significance marker");
    o.detail << p.a << " vs " << p.b << ": p=" << std::scientific << std::setprecision(3) << r.p << " ("
             << arena::to_string(arena::significance_of(r.log10_p)) << ") ";
  }
  o.detail << "published '**' (<1e-50) for the second row is reported, not asserted";
}

void sac_round_trip(Outcome& o) {
  testing::SacGenerator gen(20240601);
  std::size_t failures = 0, exchanges = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto d = gen.dialogue(12);
    exchanges += d.exchanges.size();
    try {
      if (!(sac::parse_sac(sac::render_sac(d)) == d)) ++failures;
    } catch (const sac::ParseError&) {
      ++failures;
    }
  }
  o.require(failures == 0, std::to_string(failures) + " failures");
  o.detail << "1000 dialogues, " << exchanges << " exchanges, " << failures << " failures";
}

void loss_mask(Outcome& o) {
  testing::SacGenerator gen(77);
  std::size_t sys_bytes = 0, sys_covered = 0, user_bytes = 0, user_covered = 0;
  for (int i = 0; i < 100; ++i) {
    const auto d = gen.dialogue(12);
    // Independent layout of the serialized text.
    std::string text;
    std::vector<std::pair<std::size_t, std::size_t>> users, systems;
    for (const auto& ex : d.exchanges) {
      text += "<user> ";
      const auto u = sac::escape_text(ex.user_text);
      users.emplace_back(text.size(), text.size() + u.size());
      text += u + "\n<system> ";
      const auto s = sac::render_system_message(ex.system);
      systems.emplace_back(text.size(), text.size() + s.size());
      text += s + "\n";
    }
    const auto ex = sac::emit_training_example(d);
    o.require(ex.text == text, "serialized text differs from independent layout");
    std::vector<bool> masked(ex.text.size(), false);
    for (const auto& span : ex.mask)
      for (auto b = span.begin; b < span.end && b < masked.size(); ++b) masked[b] = true;
    for (const auto& [b, e] : systems)
      for (auto k = b; k < e; ++k) sys_bytes++, sys_covered += masked[k];
    for (const auto& [b, e] : users)
      for (auto k = b; k < e; ++k) user_bytes++, user_covered += masked[k];
  }
  o.require(sys_covered == sys_bytes, "system coverage below 100%");
  o.require(user_covered == 0, "user bytes masked");
  o.detail << "system " << sys_covered << "/" << sys_bytes << " bytes, user " << user_covered << "/" << user_bytes;
}

struct PipelineRun {
  std::string trajectories_sha, dataset_sha, pairs_sha;
  std::size_t turns = 0, pairs = 0, bad_sets = 0, bad_pairs = 0, truncated = 0;
};

PipelineRun pipeline(const fs::path& dir, const std::vector<corpus::SeedSituation>& seeds) {
  auto backend = std::make_shared<llm::ScriptedBackend>(20240601);
  llm::Gateway gw(backend);
  auto cfg = selfplay::RolloutConfig::search();
  cfg.seed = 42;
  cfg.max_exchanges = 12;
  cfg.candidates_per_turn = 16;
  cfg.agent_params.top_k = 100;
  cfg.agent_params.temperature = 1.1;
  cfg.agent_params.repetition_penalty = 1.1;

  const auto trajs = selfplay::simulate_all(seeds, cfg, {gw, gw, &gw}, "traj-", 4);
  PipelineRun r;
  for (const auto& t : trajs) {
    r.truncated += t.truncated;
    for (const auto& e : t.exchanges) {
      ++r.turns;
      const auto& c = e.candidates;
      const bool one_selected = c.selected < c.candidates.size();
      if (c.candidates.size() != 16 || !one_selected || c.candidates.size() - 1 != 15) ++r.bad_sets;
    }
  }
  selfplay::write_trajectories(dir / "trajectories.jsonl", trajs);
  selfplay::RefinementStats stats;
  jsonl::write_file(dir / "dataset.jsonl", selfplay::extract_refinement_dataset(trajs, &stats));
  const auto set = preference::make_pairs(trajs, 7);
  r.pairs = set.pairs.size();
  for (const auto& p : set.pairs) {
    const auto& t = *std::find_if(trajs.begin(), trajs.end(), [&](auto& x) { return x.id == p.provenance.trajectory_id; });
    const auto& c = t.exchanges.at(p.provenance.turn_index).candidates;
    if (p.provenance.rejected_index == c.selected || p.chosen != sac::render_system_message(c.chosen())) ++r.bad_pairs;
  }
  preference::export_dpo(set.pairs, dir / "dpo.jsonl");
  r.trajectories_sha = sha256_file(dir / "trajectories.jsonl");
  r.dataset_sha = sha256_file(dir / "dataset.jsonl");
  r.pairs_sha = sha256_file(dir / "dpo.jsonl");
  return r;
}

void end_to_end(Outcome& o) {
  const auto seeds = corpus::load_seed_situations(testing::fixture("seeds_20.csv"));
  o.require(seeds.size() == 20, "fixture should hold 20 seeds");
  const auto a = pipeline(testing::scratch_dir("acceptance-e2e-1"), seeds);
  const auto b = pipeline(testing::scratch_dir("acceptance-e2e-2"), seeds);
  o.require(a.truncated == 0, "truncated trajectories");
  o.require(a.turns == 20 * 12, "expected 240 agent turns, got " + std::to_string(a.turns));
  o.require(a.bad_sets == 0, std::to_string(a.bad_sets) + " candidate sets without 16 candidates / one selection");
  o.require(a.bad_pairs == 0, "pairs reject the selected candidate");
  o.require(a.pairs == a.turns, "pair count " + std::to_string(a.pairs) + " != turns " + std::to_string(a.turns));
  o.require(a.trajectories_sha == b.trajectories_sha, "trajectories differ across runs");
  o.require(a.dataset_sha == b.dataset_sha, "dataset differs across runs");
  o.require(a.pairs_sha == b.pairs_sha, "pairs differ across runs");
  o.detail << "20 seeds, " << a.turns << " turns x 16 candidates, " << a.pairs << " pairs, outputs identical ("
           << a.trajectories_sha.substr(0, 12) << ")";
}

std::pair<std::string, std::string> dialogs_in(const std::string& prompt) {
  const auto tail = prompt.substr(prompt.rfind("Now do the following:"));
  const auto a = tail.find("Dialog A:\n") + 10;
  const auto b = tail.find("Dialog B:\n");
  const auto c = tail.find("Conclusion:");
  return {tail.substr(a, b - a), tail.substr(b + 10, c - b - 10)};
}

std::string constructed_dialog(Rng& rng, std::size_t turns) {
  static const std::vector<std::string> words{"hello", "rain", "work", "dog", "really", "fine", "music", "tired"};
  std::string out;
  for (std::size_t t = 0; t < turns; ++t) {
    out += "User: ";
    for (std::size_t w = 0; w < 2 + rng.below(5); ++w) out += rng.pick(words) + " ";
    out += "\nAssistant: ";
    for (std::size_t w = 0; w < 2 + rng.below(5); ++w) out += rng.pick(words) + " ";
    out += "\n";
  }
  return out;
}

void judge_debiasing(Outcome& o) {
  auto first = std::make_shared<llm::ScriptedBackend>(0, std::vector<llm::ScriptRule>{{"*", {"Dialog A is better"}}});
  auto invariant = std::make_shared<llm::ScriptedBackend>(0);
  invariant->add_handler([](const llm::ChatRequest& r, std::size_t) -> std::optional<std::string> {
    const auto [x, y] = dialogs_in(r.messages.back().content);
    return text::word_count(x) > text::word_count(y) ? "Dialog A is better" : "Dialog B is better";
  });
  llm::Gateway biased_gw(first), fair_gw(invariant);

  Rng rng(99);
  std::size_t biased_ties = 0, fair_ties = 0, fair_correct = 0;
  for (int i = 0; i < 200; ++i) {
    const auto shorter = constructed_dialog(rng, 1 + rng.below(3));
    const auto longer = shorter + constructed_dialog(rng, 1 + rng.below(3));
    const bool a_is_longer = rng.below(2) == 1;
    const auto& da = a_is_longer ? longer : shorter;
    const auto& db = a_is_longer ? shorter : longer;
    biased_ties += arena::compare_pair(da, db, {&biased_gw, "judge", ""}).winner == arena::Winner::tie_inconsistent;
    const auto v = arena::compare_pair(da, db, {&fair_gw, "judge", ""});
    fair_ties += v.winner == arena::Winner::tie_inconsistent;
    fair_correct += v.winner == (a_is_longer ? arena::Winner::A : arena::Winner::B);
  }
  o.require(biased_ties == 200, "first-position judge not fully discarded");
  o.require(fair_ties == 0, "order-invariant judge produced ties");
  o.require(fair_correct == 200, "order-invariant judge picked wrong winners");
  o.detail << "first-position judge " << biased_ties << "/200 tie_inconsistent; order-invariant judge " << fair_ties
           << "/200 ties, " << fair_correct << "/200 correct";
}

void steering(Outcome& o) {
  const auto dir = testing::scratch_dir("acceptance-steer");
  auto backend = std::make_shared<llm::ScriptedBackend>(31);
  auto rec = std::make_shared<llm::RecordingBackend>(backend, dir / "cassette.jsonl");
  llm::Gateway gw(rec);
  const std::vector<std::string> emotions{"optimism", "pessimistic", "playful", "philosophical"};
  const std::vector<std::string> motivations{"reassurance", "sympathy", "humor", "teasing"};
  const std::vector<std::string> topics{"the future", "ai", "family", "health", "work"};
  Rng rng(5);
  std::size_t verbatim = 0;
  for (int i = 0; i < 50; ++i) {
    steer::SteeringSpec s;
    s.mode = steer::Mode::force;
    do {
      if (rng.below(2)) s.forced_action.motivation = rng.pick(motivations);
      if (rng.below(2)) s.forced_action.emotion = rng.pick(emotions);
      if (rng.below(2)) s.forced_action.topics = sac::normalize_topics({rng.pick(topics), rng.pick(topics)});
    } while (s.forced_action.empty());
    sac::SacDialogue h;
    h.open_user_turn = "What do you think about AI and the future? #" + std::to_string(i);
    const auto tr = steer::two_phase_generate(gw, h, s, {"SAGE_1", {}, static_cast<std::uint64_t>(i), 2});
    const auto rendered = sac::render_block(tr.turn.action);
    bool ok = true;
    if (s.forced_action.motivation) ok &= rendered.find("a_motivation: " + *s.forced_action.motivation + ";") != std::string::npos;
    if (s.forced_action.emotion) ok &= rendered.find("a_emotion: " + *s.forced_action.emotion + ";") != std::string::npos;
    if (s.forced_action.topics)
      ok &= rendered.find("a_topics: " + text::join(*s.forced_action.topics, ", ") + " [/a_action]") != std::string::npos;
    verbatim += ok;
  }
  o.require(verbatim == 50, std::to_string(50 - verbatim) + " forced cases missing fields");

  const auto bias_log = dir / "bias.jsonl";
  auto rec2 = std::make_shared<llm::RecordingBackend>(backend, bias_log);
  llm::Gateway gw2(rec2);
  steer::SteeringSpec bias;
  bias.mode = steer::Mode::bias;
  bias.bias_keywords = {{"reassurance", 1.0}, {"sympathy", 0.5}};
  for (int i = 0; i < 10; ++i) {
    sac::SacDialogue h;
    h.open_user_turn = "I'm worried #" + std::to_string(i);
    steer::two_phase_generate(gw2, h, bias, {"SAGE_1", {}, static_cast<std::uint64_t>(i), 2});
  }
  std::size_t p1 = 0, p1_biased = 0, p2 = 0, p2_biased = 0;
  for (const auto& e : llm::read_cassette(bias_log)) {
    if (e.request.continues_assistant()) {
      ++p2;
      p2_biased += !e.request.logit_bias.empty();
    } else {
      ++p1;
      p1_biased += e.request.logit_bias == bias.bias_keywords;
    }
  }
  o.require(p1 > 0 && p1 == p1_biased, "phase-1 requests without the bias map");
  o.require(p2 > 0 && p2_biased == 0, "bias leaked into phase 2");
  o.detail << verbatim << "/50 forced cases verbatim; cassette: bias on " << p1_biased << "/" << p1
           << " phase-1 requests, " << p2_biased << "/" << p2 << " phase-2";
}

void preference_uniformity(Outcome& o) {
  selfplay::Trajectory t;
  t.id = "fixture";
  selfplay::CandidateSet set;
  for (int i = 0; i < 16; ++i)
    set.candidates.push_back({{"venting", "sad", {"work"}}, {"sympathy", "caring", {"work"}}, "reply " + std::to_string(i)});
  set.selected = 5;
  t.exchanges.push_back({"My boss yelled at me.", set});

  std::vector<int> hist(16, 0);
  const int draws = 10000;
  for (int s = 0; s < draws; ++s)
    ++hist[preference::make_pairs({t}, static_cast<std::uint64_t>(s)).pairs.at(0).provenance.rejected_index];
  o.require(hist[5] == 0, "selected candidate drawn as rejected");
  const double p = 1.0 / 15.0, expected = draws * p, sigma = std::sqrt(draws * p * (1 - p));
  double worst = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    if (i == 5) continue;
    worst = std::max(worst, std::abs(hist[i] - expected) / sigma);
  }
  o.require(worst <= 3.0, "bin outside 3 sigma");
  o.detail << "10000 draws over 15 rejects, max deviation " << std::setprecision(2) << std::fixed << worst << " sigma";
}

}  // namespace

int main() {
  bool all = true;
  all &= run("results-table-arithmetic", 1, table_arithmetic);
  all &= run("significance", 5, significance);
  all &= run("sac-round-trip", 10, sac_round_trip);
  all &= run("loss-mask", 0, loss_mask);
  all &= run("end-to-end-mock", 60, end_to_end);
  all &= run("judge-debiasing", 0, judge_debiasing);
  all &= run("steering-fidelity", 0, steering);
  all &= run("preference-uniformity", 0, preference_uniformity);
  std::cout << (all ? "ALL PASS" : "SOME FAILED") << std::endl;
  return all ? 0 : 1;
}
