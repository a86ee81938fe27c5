#include "sage/selfplay/rollout.hpp"

#include <spdlog/spdlog.h>

#include <regex>

#include "sage/common/random.hpp"
#include "sage/common/text.hpp"
#include "sage/sac/grammar.hpp"

namespace sage::selfplay {

namespace {

constexpr std::uint64_t kCandidateStream = 0xCA;
constexpr std::uint64_t kSelectorStream = 0x5E;
constexpr std::uint64_t kUserStream = 0x05;

constexpr std::string_view kRubric =
    "You are choosing the best next response for a social companion chatbot. An ideal companion chatbot "
    "shows consistency, humor, sympathy, informativeness, appropriateness, and respect. Consider both the "
    "immediate quality of each response and its potential to lead to an engaging continuation of the "
    "conversation.\n";

std::string transcript(const sac::SacDialogue& history) {
  std::string out;
  for (const auto& ex : history.exchanges) {
    out.append("User: ").append(ex.user_text).append("\n");
    out.append("Assistant: ").append(ex.system.response).append("\n");
  }
  if (history.open_user_turn) out.append("User: ").append(*history.open_user_turn).append("\n");
  return out;
}

std::vector<std::string> sample(const std::vector<llm::Message>& messages, const RolloutConfig& cfg,
                                llm::Gateway& agent, std::uint64_t seed, std::size_t count) {
  auto make = [&](std::uint64_t s, int n) {
    llm::ChatRequest r;
    r.messages = messages;
    r.params = cfg.agent_params;
    r.params.n = n;
    r.params.seed = s;
    r.model_id = cfg.agent_model;
    r.purpose = llm::Purpose::agent;
    return r;
  };
  std::vector<std::string> out;
  switch (cfg.fanout) {
    case Fanout::batched:
      return agent.complete(make(seed, static_cast<int>(count))).choices;
    case Fanout::serial:
      for (std::size_t i = 0; i < count; ++i) out.push_back(agent.complete(make(derive_seed(seed, i + 1), 1)).choices[0]);
      return out;
    case Fanout::concurrent: {
      std::vector<std::future<llm::CompletionResult>> futs;
      for (std::size_t i = 0; i < count; ++i) futs.push_back(agent.submit(make(derive_seed(seed, i + 1), 1)));
      for (auto& f : futs) out.push_back(f.get().choices[0]);
      return out;
    }
  }
  return out;
}

bool mentions(std::string_view text, const std::string& marker) {
  return !marker.empty() && text.find(marker) != std::string_view::npos;
}

}  // namespace

std::vector<llm::Message> agent_messages(const sac::SacDialogue& history) {
  std::vector<llm::Message> msgs;
  for (const auto& ex : history.exchanges) {
    msgs.push_back({llm::Role::user, ex.user_text});
    msgs.push_back({llm::Role::assistant, sac::render_system_message(ex.system)});
  }
  if (history.open_user_turn) msgs.push_back({llm::Role::user, *history.open_user_turn});
  return msgs;
}

std::vector<llm::Message> user_messages(const sac::SacDialogue& history, const corpus::SeedSituation& seed,
                                        const std::string& end_marker) {
  std::string persona = "You are the user in this conversation, chatting casually with a companion chatbot. "
                        "Your situation: " + seed.statement + "\nReply with one short message as the user.";
  if (!end_marker.empty()) persona += " If you want to end the conversation, reply with " + end_marker + ".";
  std::vector<llm::Message> msgs{{llm::Role::system, persona}};
  for (const auto& ex : history.exchanges) {
    msgs.push_back({llm::Role::assistant, ex.user_text});
    msgs.push_back({llm::Role::user, ex.system.response});
  }
  return msgs;
}

std::string selector_prompt(const sac::SacDialogue& history, const std::vector<sac::SacSystemTurn>& candidates,
                            const std::vector<std::size_t>& order) {
  std::string out(kRubric);
  out.append("\nConversation so far:\n").append(transcript(history));
  out.append("\nCandidate responses:\n");
  for (std::size_t i = 0; i < order.size(); ++i)
    out.append("Candidate ").append(std::to_string(i + 1)).append(": ").append(candidates[order[i]].response).append("\n");
  out.append("\nReply with the number of the best candidate, for example \"Candidate 2\".");
  return out;
}

std::optional<std::size_t> parse_selector_reply(std::string_view reply, std::size_t count) {
  static const std::regex tagged(R"(candidate\s*#?\s*(\d+))", std::regex::icase);
  static const std::regex number(R"(\d+)");
  const std::string s(reply);
  std::smatch m;
  if (std::regex_search(s, m, tagged)) {
    const auto v = std::stoull(m[1].str());
    if (v >= 1 && v <= count) return v;
  }
  for (std::sregex_iterator it(s.begin(), s.end(), number), end; it != end; ++it) {
    const auto& tok = it->str();
    if (tok.size() > 6) continue;
    const auto v = std::stoull(tok);
    if (v >= 1 && v <= count) return v;
  }
  return std::nullopt;
}

std::uint64_t trajectory_key(const RolloutConfig& cfg, const std::string& trajectory_id) {
  return derive_seed(cfg.seed, fnv1a(trajectory_id));
}

CandidateSet generate_candidates(const sac::SacDialogue& history, const RolloutConfig& cfg, llm::Gateway& agent,
                                 std::uint64_t traj_key, std::size_t turn) {
  if (!history.open_user_turn) throw std::invalid_argument("history must end with a user message");
  const auto messages = agent_messages(history);
  const auto want = static_cast<std::size_t>(cfg.candidates_per_turn);
  CandidateSet set;
  set.turn_index = turn;
  set.requested = want;
  std::size_t generated = 0;
  for (int round = 0; round <= cfg.regeneration_budget && set.candidates.size() < want; ++round) {
    const auto missing = want - set.candidates.size();
    const auto seed = derive_seed(traj_key, kCandidateStream, turn, static_cast<std::uint64_t>(round));
    for (auto& raw : sample(messages, cfg, agent, seed, missing)) {
      ++generated;
      try {
        set.candidates.push_back(sac::parse_system_message(raw, turn));
      } catch (const sac::ParseError& e) {
        spdlog::debug("turn {} round {}: dropping malformed candidate ({})", turn, round, e.what());
      }
    }
  }
  set.dropped = want - set.candidates.size();
  if (set.candidates.empty()) throw AllCandidatesMalformed(turn, generated);
  return set;
}

Selection select_best(const sac::SacDialogue& history, const CandidateSet& cands, llm::Gateway& selector,
                      const RolloutConfig& cfg, std::uint64_t traj_key) {
  const auto n = cands.candidates.size();
  if (n < 2) throw std::invalid_argument("select_best needs at least two candidates");
  Rng rng(derive_seed(traj_key, kSelectorStream, cands.turn_index));
  Selection sel;
  sel.order = rng.permutation(n);
  llm::ChatRequest req;
  req.messages = {{llm::Role::user, selector_prompt(history, cands.candidates, sel.order)}};
  req.params = llm::deterministic_params();
  req.model_id = cfg.selector_model;
  req.purpose = llm::Purpose::selector;
  for (int attempt = 0; attempt < 2; ++attempt) {
    req.params.seed = derive_seed(traj_key, kSelectorStream, cands.turn_index, attempt + 1);
    auto raw = selector.complete(req).choices.at(0);
    sel.raw += attempt ? "\n---\n" + raw : raw;
    if (auto shown = parse_selector_reply(raw, n)) {
      sel.index = sel.order[*shown - 1];
      return sel;
    }
  }
  spdlog::warn("turn {}: selector reply unparseable twice, falling back to candidate 0", cands.turn_index);
  sel.index = 0;
  sel.fallback = true;
  return sel;
}

Trajectory simulate(const corpus::SeedSituation& seed, const RolloutConfig& cfg, Models models,
                    const std::string& trajectory_id) {
  cfg.validate();
  if (cfg.use_selector && !models.selector) throw std::invalid_argument("selector model required");
  const auto key = trajectory_key(cfg, trajectory_id);
  Trajectory t;
  t.id = trajectory_id;
  t.seed = seed;
  t.model_iteration_k = cfg.model_iteration;
  t.config = to_json(cfg);

  sac::SacDialogue history;
  std::string user_text = seed.statement;
  for (int turn = 0;; ++turn) {
    const auto tix = static_cast<std::size_t>(turn);
    history.open_user_turn = user_text;
    try {
      auto set = generate_candidates(history, cfg, models.agent, key, tix);
      if (cfg.use_selector && set.candidates.size() >= 2) {
        auto sel = select_best(history, set, *models.selector, cfg, key);
        set.selected = sel.index;
        set.selector_raw = std::move(sel.raw);
        set.presentation_order = std::move(sel.order);
        set.fallback = sel.fallback;
      }
      history.exchanges.push_back({user_text, set.chosen()});
      history.open_user_turn.reset();
      t.exchanges.push_back({user_text, std::move(set)});
    } catch (const AllCandidatesMalformed& e) {
      t.truncated = true;
      t.truncation_note = e.what();
      t.end_reason = EndReason::aborted;
      return t;
    } catch (const llm::GatewayError& e) {
      t.truncated = true;
      t.truncation_note = e.what();
      t.end_reason = EndReason::aborted;
      throw RolloutError(trajectory_id + ": " + e.what(), std::move(t));
    }

    if (mentions(t.exchanges.back().candidates.chosen().response, cfg.end_marker)) {
      t.end_reason = EndReason::end_marker;
      return t;
    }
    if (turn + 1 >= cfg.max_exchanges) return t;

    llm::ChatRequest ureq;
    ureq.messages = user_messages(history, seed, cfg.end_marker);
    ureq.params = cfg.user_params;
    ureq.params.n = 1;  // one user generation per turn
    ureq.params.seed = derive_seed(key, kUserStream, tix);
    ureq.model_id = cfg.user_model;
    ureq.purpose = llm::Purpose::user_sim;
    try {
      user_text = std::string(text::trim(sac::strip_blocks(models.user.complete(ureq).choices.at(0))));
    } catch (const llm::GatewayError& e) {
      t.truncated = true;
      t.truncation_note = e.what();
      t.end_reason = EndReason::aborted;
      throw RolloutError(trajectory_id + ": " + e.what(), std::move(t));
    }
    if (user_text.empty() || mentions(user_text, cfg.end_marker)) {
      t.end_reason = EndReason::end_marker;
      return t;
    }
  }
}

std::vector<Trajectory> simulate_all(const std::vector<corpus::SeedSituation>& seeds, const RolloutConfig& cfg,
                                     Models models, const std::string& id_prefix, int parallel) {
  std::vector<Trajectory> out(seeds.size());
  const std::size_t width = std::max(1, parallel);
  for (std::size_t base = 0; base < seeds.size(); base += width) {
    std::vector<std::future<Trajectory>> batch;
    for (std::size_t i = base; i < std::min(seeds.size(), base + width); ++i) {
      batch.push_back(std::async(std::launch::async, [&, i] {
        try {
          return simulate(seeds[i], cfg, models, id_prefix + std::to_string(i));
        } catch (const RolloutError& e) {
          spdlog::error("{}", e.what());
          return e.partial();
        }
      }));
    }
    for (std::size_t k = 0; k < batch.size(); ++k) out[base + k] = batch[k].get();
  }
  return out;
}

}  // namespace sage::selfplay
