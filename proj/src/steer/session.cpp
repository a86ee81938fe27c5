#include "sage/steer/session.hpp"

#include <fmt/format.h>

#include <fstream>
#include <random>

#include "sage/common/digest.hpp"
#include "sage/common/jsonl.hpp"
#include "sage/common/random.hpp"
#include "sage/sac/grammar.hpp"

namespace sage::steer {

using nlohmann::json;

sac::SacDialogue ChatSession::dialogue() const {
  sac::SacDialogue d;
  for (const auto& t : turns) d.exchanges.push_back({t.user_text, t.agent});
  return d;
}

json to_json(const SessionTurn& t) {
  return {{"user_text", t.user_text},
          {"agent", sac::to_json(t.agent)},
          {"steering", to_json(t.steering)},
          {"forced_fields", t.forced_fields}};
}

json to_json(const ChatSession& s) {
  json history = json::array();
  for (const auto& t : s.turns) {
    history.push_back({{"role", "user"}, {"content", t.user_text}});
    history.push_back({{"role", "assistant"},
                       {"content", t.agent.response},
                       {"sac", sac::render_system_message(t.agent)},
                       {"user_state", sac::block_to_json(t.agent.user_state)},
                       {"action", sac::block_to_json(t.agent.action)},
                       {"steering", to_json(t.steering)},
                       {"forced_fields", t.forced_fields}});
  }
  return {{"session_id", s.id},
          {"model_id", s.model_id},
          {"params", llm::to_json(s.params)},
          {"steering", to_json(s.active)},
          {"turn_count", s.turns.size()},
          {"history", std::move(history)},
          {"history_hash", history_hash(s)}};
}

std::string history_hash(const ChatSession& s) {
  json turns = json::array();
  for (const auto& t : s.turns) turns.push_back(to_json(t));
  return sha256_hex(turns.dump());
}

const SessionTurn& chat_step(llm::Gateway& gw, ChatSession& s, const std::string& user_text,
                             const std::optional<SteeringSpec>& override_steering) {
  const auto steering = override_steering.value_or(s.active);
  auto history = s.dialogue();
  history.open_user_turn = user_text;
  const auto trace = two_phase_generate(gw, history, steering, {s.model_id, s.params, s.seed});
  s.turns.push_back({user_text, trace.turn, steering, trace.forced});
  if (!override_steering && s.active.scope == Scope::next_turn) s.active = {};
  return s.turns.back();
}

EventLog::EventLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
}

void EventLog::append(const json& event) {
  std::lock_guard lk(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << jsonl::dump_line(event) << '\n';
  out.flush();
  if (!out) throw std::runtime_error("cannot append to " + path_.string());
}

json created_event(const ChatSession& s) {
  return {{"type", "session_created"},
          {"session_id", s.id},
          {"model_id", s.model_id},
          {"params", llm::to_json(s.params)},
          {"seed", s.seed ? json(*s.seed) : json(nullptr)},
          {"steering", to_json(s.active)}};
}

json user_msg_event(const std::string& text) { return {{"type", "user_msg"}, {"text", text}}; }

json steering_set_event(const SteeringSpec& spec) { return {{"type", "steering_set"}, {"steering", to_json(spec)}}; }

json agent_turn_event(const SessionTurn& t, const GenerationTrace& trace) {
  return {{"type", "agent_turn"},
          {"turn", sac::to_json(t.agent)},
          {"steering", to_json(t.steering)},
          {"forced_fields", t.forced_fields},
          {"phase1_raw", trace.phase1_raw},
          {"phase2_raw", trace.phase2_raw},
          {"phase1_attempts", trace.phase1_attempts}};
}

namespace {

json agent_turn_event(const SessionTurn& t, const GenerationTrace& trace, const SteeringSpec& active_after) {
  auto e = steer::agent_turn_event(t, trace);
  e["active_after"] = to_json(active_after);
  return e;
}

}  // namespace

ChatSession replay_session(const std::filesystem::path& log) {
  ChatSession s;
  bool created = false;
  std::optional<std::string> pending;
  std::ifstream in(log, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + log.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto e = json::parse(line);
    const auto type = e.at("type").get<std::string>();
    if (type == "session_created") {
      s.id = e.at("session_id").get<std::string>();
      s.model_id = e.at("model_id").get<std::string>();
      s.params = llm::sampling_params_from_json(e.at("params"));
      if (!e.at("seed").is_null()) s.seed = e.at("seed").get<std::uint64_t>();
      s.active = steering_from_json(e.at("steering"));
      created = true;
    } else if (!created) {
      throw std::runtime_error(fmt::format("{}:{}: event before session_created", log.string(), line_no));
    } else if (type == "steering_set") {
      s.active = steering_from_json(e.at("steering"));
    } else if (type == "user_msg") {
      pending = e.at("text").get<std::string>();
    } else if (type == "agent_turn") {
      if (!pending) throw std::runtime_error(fmt::format("{}:{}: agent_turn without user_msg", log.string(), line_no));
      s.turns.push_back({*pending, sac::system_turn_from_json(e.at("turn")), steering_from_json(e.at("steering")),
                         e.at("forced_fields").get<std::vector<std::string>>()});
      pending.reset();
      if (e.contains("active_after")) s.active = steering_from_json(e.at("active_after"));
    } else if (type == "generation_failed") {
      pending.reset();
    } else {
      throw std::runtime_error(fmt::format("{}:{}: unknown event '{}'", log.string(), line_no, type));
    }
  }
  if (!created) throw std::runtime_error(log.string() + ": no session_created event");
  return s;
}

SessionStore::SessionStore(llm::Gateway& gw, SessionDefaults defaults, std::optional<std::filesystem::path> log_dir)
    : gw_(gw), defaults_(std::move(defaults)), log_dir_(std::move(log_dir)), salt_(std::random_device{}()) {
  salt_ = (salt_ << 32) ^ std::random_device{}();
}

std::string SessionStore::next_id() { return fmt::format("s-{:016x}", mix64(salt_ + ++counter_)); }

std::string SessionStore::create(const json& overrides) {
  ChatSession s;
  s.model_id = overrides.value("model_id", defaults_.model_id);
  s.params = defaults_.params;
  if (auto it = overrides.find("params"); it != overrides.end())
    s.params = llm::sampling_params_from_json(*it, defaults_.params);
  s.params.validate();
  s.seed = defaults_.seed;
  if (auto it = overrides.find("seed"); it != overrides.end() && !it->is_null()) s.seed = it->get<std::uint64_t>();
  if (auto it = overrides.find("steering"); it != overrides.end() && !it->is_null()) s.active = steering_from_json(*it);

  auto slot = std::make_shared<Slot>();
  std::lock_guard lk(mu_);
  s.id = next_id();
  while (slots_.count(s.id)) s.id = next_id();
  if (log_dir_) {
    slot->log = std::make_unique<EventLog>(*log_dir_ / (s.id + ".jsonl"));
    slot->log->append(created_event(s));
  }
  slot->session = std::move(s);
  const auto id = slot->session.id;
  slots_.emplace(id, std::move(slot));
  return id;
}

std::shared_ptr<SessionStore::Slot> SessionStore::find(const std::string& id) const {
  std::lock_guard lk(mu_);
  auto it = slots_.find(id);
  if (it == slots_.end()) throw SessionNotFound("no session '" + id + "'");
  return it->second;
}

ChatSession SessionStore::snapshot(const std::string& id) const {
  auto slot = find(id);
  std::lock_guard lk(slot->state);
  return slot->session;
}

void SessionStore::set_steering(const std::string& id, const SteeringSpec& spec) {
  spec.validate();
  auto slot = find(id);
  std::unique_lock w(slot->write, std::try_to_lock);
  if (!w.owns_lock()) throw SessionBusy("session '" + id + "' has a request in flight");
  std::lock_guard lk(slot->state);
  slot->session.active = spec;
  if (slot->log) slot->log->append(steering_set_event(spec));
}

SessionTurn SessionStore::message(const std::string& id, const std::string& text,
                                  const std::optional<SteeringSpec>& steering) {
  if (steering) steering->validate();
  auto slot = find(id);
  std::unique_lock w(slot->write, std::try_to_lock);
  if (!w.owns_lock()) throw SessionBusy("session '" + id + "' has a request in flight");

  ChatSession work;
  {
    std::lock_guard lk(slot->state);
    work = slot->session;
  }
  if (slot->log) slot->log->append(user_msg_event(text));

  const auto used = steering.value_or(work.active);
  auto history = work.dialogue();
  history.open_user_turn = text;
  GenerationTrace trace;
  try {
    trace = two_phase_generate(gw_, history, used, {work.model_id, work.params, work.seed});
  } catch (const std::exception& e) {
    if (slot->log) slot->log->append({{"type", "generation_failed"}, {"error", e.what()}});
    throw;
  }
  SessionTurn turn{text, trace.turn, used, trace.forced};

  std::lock_guard lk(slot->state);
  auto& s = slot->session;
  s.turns.push_back(turn);
  if (!steering && s.active.scope == Scope::next_turn) s.active = {};
  if (slot->log) slot->log->append(agent_turn_event(turn, trace, s.active));
  return turn;
}

std::size_t SessionStore::size() const {
  std::lock_guard lk(mu_);
  return slots_.size();
}

std::optional<std::filesystem::path> SessionStore::log_path(const std::string& id) const {
  auto slot = find(id);
  if (!slot->log) return std::nullopt;
  return slot->log->path();
}

std::size_t SessionStore::load_logs() {
  if (!log_dir_ || !std::filesystem::is_directory(*log_dir_)) return 0;
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(*log_dir_)) {
    if (entry.path().extension() != ".jsonl") continue;
    auto slot = std::make_shared<Slot>();
    slot->session = replay_session(entry.path());
    slot->log = std::make_unique<EventLog>(entry.path());
    std::lock_guard lk(mu_);
    const auto id = slot->session.id;
    slots_[id] = std::move(slot);
    ++n;
  }
  return n;
}

}  // namespace sage::steer
