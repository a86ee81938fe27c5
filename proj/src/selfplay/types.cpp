#include "sage/selfplay/types.hpp"

#include "sage/common/jsonl.hpp"

namespace sage::selfplay {

using nlohmann::json;

std::string_view to_string(Fanout f) {
  switch (f) {
    case Fanout::batched: return "batched";
    case Fanout::serial: return "serial";
    case Fanout::concurrent: return "concurrent";
  }
  return "batched";
}

Fanout fanout_from_string(std::string_view s) {
  for (auto f : {Fanout::batched, Fanout::serial, Fanout::concurrent})
    if (to_string(f) == s) return f;
  throw std::invalid_argument("unknown fanout '" + std::string(s) + "'");
}

std::string_view to_string(EndReason r) {
  switch (r) {
    case EndReason::max_exchanges: return "max_exchanges";
    case EndReason::end_marker: return "end_marker";
    case EndReason::aborted: return "aborted";
  }
  return "aborted";
}

namespace {

EndReason end_reason_from_string(std::string_view s) {
  for (auto r : {EndReason::max_exchanges, EndReason::end_marker, EndReason::aborted})
    if (to_string(r) == s) return r;
  throw std::invalid_argument("unknown end reason '" + std::string(s) + "'");
}

}  // namespace

RolloutConfig RolloutConfig::search() { return {}; }

RolloutConfig RolloutConfig::evaluation() {
  RolloutConfig c;
  c.max_exchanges = 8;
  c.candidates_per_turn = 1;
  c.use_selector = false;
  return c;
}

void RolloutConfig::validate() const {
  if (max_exchanges < 1) throw std::invalid_argument("max_exchanges must be >= 1");
  if (use_selector && candidates_per_turn < 2)
    throw std::invalid_argument("candidates_per_turn must be >= 2 when a selector is used");
  if (candidates_per_turn < 1) throw std::invalid_argument("candidates_per_turn must be >= 1");
  if (regeneration_budget < 0) throw std::invalid_argument("regeneration_budget must be >= 0");
  if (agent_model.empty()) throw std::invalid_argument("agent model id is required");
  if (user_model.empty()) throw std::invalid_argument("user model id is required");
  if (use_selector && selector_model.empty()) throw std::invalid_argument("selector model id is required");
  agent_params.validate();
  user_params.validate();
}

json to_json(const RolloutConfig& c) {
  return {{"max_exchanges", c.max_exchanges},
          {"candidates_per_turn", c.candidates_per_turn},
          {"agent_params", llm::to_json(c.agent_params)},
          {"user_params", llm::to_json(c.user_params)},
          {"agent_model", c.agent_model},
          {"user_model", c.user_model},
          {"selector_model", c.selector_model},
          {"seed", c.seed},
          {"end_marker", c.end_marker},
          {"regeneration_budget", c.regeneration_budget},
          {"fanout", to_string(c.fanout)},
          {"use_selector", c.use_selector},
          {"model_iteration", c.model_iteration}};
}

RolloutConfig rollout_config_from_json(const json& j, RolloutConfig c) {
  c.max_exchanges = j.value("max_exchanges", c.max_exchanges);
  c.candidates_per_turn = j.value("candidates_per_turn", c.candidates_per_turn);
  if (j.contains("agent_params")) c.agent_params = llm::sampling_params_from_json(j["agent_params"], c.agent_params);
  if (j.contains("user_params")) c.user_params = llm::sampling_params_from_json(j["user_params"], c.user_params);
  c.agent_model = j.value("agent_model", c.agent_model);
  c.user_model = j.value("user_model", c.user_model);
  c.selector_model = j.value("selector_model", c.selector_model);
  c.seed = j.value("seed", c.seed);
  c.end_marker = j.value("end_marker", c.end_marker);
  c.regeneration_budget = j.value("regeneration_budget", c.regeneration_budget);
  if (j.contains("fanout")) c.fanout = fanout_from_string(j["fanout"].get<std::string>());
  c.use_selector = j.value("use_selector", c.use_selector);
  c.model_iteration = j.value("model_iteration", c.model_iteration);
  c.validate();
  return c;
}

sac::SacDialogue Trajectory::selected_dialogue() const {
  sac::SacDialogue d;
  for (const auto& ex : exchanges) d.exchanges.push_back({ex.user_text, ex.candidates.chosen()});
  return d;
}

json to_json(const CandidateSet& c) {
  json cands = json::array();
  for (const auto& t : c.candidates) cands.push_back(sac::to_json(t));
  return {{"turn_index", c.turn_index},     {"candidates", cands},
          {"selected", c.selected},         {"selector_raw", c.selector_raw},
          {"presentation_order", c.presentation_order}, {"fallback", c.fallback},
          {"requested", c.requested},       {"dropped", c.dropped}};
}

CandidateSet candidate_set_from_json(const json& j) {
  CandidateSet c;
  c.turn_index = j.at("turn_index").get<std::size_t>();
  for (const auto& t : j.at("candidates")) c.candidates.push_back(sac::system_turn_from_json(t));
  c.selected = j.at("selected").get<std::size_t>();
  c.selector_raw = j.value("selector_raw", "");
  c.presentation_order = j.value("presentation_order", std::vector<std::size_t>{});
  c.fallback = j.value("fallback", false);
  c.requested = j.value("requested", c.candidates.size());
  c.dropped = j.value("dropped", std::size_t{0});
  if (c.selected >= c.candidates.size()) throw std::invalid_argument("selected index out of range");
  return c;
}

json to_json(const Trajectory& t) {
  json ex = json::array();
  for (const auto& e : t.exchanges) ex.push_back({{"user_text", e.user_text}, {"candidate_set", to_json(e.candidates)}});
  return {{"id", t.id},
          {"seed", {{"statement", t.seed.statement}, {"sentiment", t.seed.sentiment_label}}},
          {"model_iteration", t.model_iteration_k},
          {"end_reason", to_string(t.end_reason)},
          {"truncated", t.truncated},
          {"truncation_note", t.truncation_note},
          {"config", t.config},
          {"exchanges", ex}};
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  t.id = j.at("id").get<std::string>();
  t.seed.statement = j.at("seed").at("statement").get<std::string>();
  t.seed.sentiment_label = j.at("seed").value("sentiment", "");
  t.model_iteration_k = j.value("model_iteration", 1);
  t.end_reason = end_reason_from_string(j.value("end_reason", "max_exchanges"));
  t.truncated = j.value("truncated", false);
  t.truncation_note = j.value("truncation_note", "");
  t.config = j.value("config", json::object());
  for (const auto& e : j.at("exchanges"))
    t.exchanges.push_back({e.at("user_text").get<std::string>(), candidate_set_from_json(e.at("candidate_set"))});
  return t;
}

std::vector<Trajectory> read_trajectories(const std::filesystem::path& path) {
  std::vector<Trajectory> out;
  auto stats = jsonl::read_file(path, [&](const json& j) { out.push_back(trajectory_from_json(j)); });
  if (stats.corrupt)
    throw std::runtime_error(path.string() + ": " + std::to_string(stats.corrupt) + " unreadable trajectory lines");
  return out;
}

void write_trajectories(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
  std::vector<json> lines;
  lines.reserve(trajs.size());
  for (const auto& t : trajs) lines.push_back(to_json(t));
  jsonl::write_file(path, lines);
}

}  // namespace sage::selfplay
