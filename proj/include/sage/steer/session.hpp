#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/steer/steering.hpp"

namespace sage::steer {

struct SessionTurn {
  std::string user_text;
  sac::SacSystemTurn agent;
  SteeringSpec steering;  ///< Steering in effect for this turn.
  std::vector<std::string> forced_fields;
};

struct ChatSession {
  std::string id;
  std::string model_id;
  llm::SamplingParams params;
  std::optional<std::uint64_t> seed;
  SteeringSpec active;
  std::vector<SessionTurn> turns;

  sac::SacDialogue dialogue() const;
};

nlohmann::json to_json(const SessionTurn& t);
/// Client view: turns as alternating user/assistant messages with parsed blocks.
nlohmann::json to_json(const ChatSession& s);

/// sha256 over the canonical serialization of the turn history.
std::string history_hash(const ChatSession& s);

/// One exchange. `override_steering` applies to this turn only and leaves the
/// session's active steering alone; otherwise the active steering is used and
/// cleared afterwards when its scope is next_turn. On error the session is
/// left unmodified.
const SessionTurn& chat_step(llm::Gateway& gw, ChatSession& s, const std::string& user_text,
                             const std::optional<SteeringSpec>& override_steering = std::nullopt);

/// Append-only JSONL log of session events.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path);
  void append(const nlohmann::json& event);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

nlohmann::json created_event(const ChatSession& s);
nlohmann::json user_msg_event(const std::string& text);
nlohmann::json steering_set_event(const SteeringSpec& spec);
nlohmann::json agent_turn_event(const SessionTurn& t, const GenerationTrace& trace);

/// Rebuilds a session from its event log without calling any model.
ChatSession replay_session(const std::filesystem::path& log);

class SessionNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class SessionBusy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SessionDefaults {
  std::string model_id = "SAGE_1";
  llm::SamplingParams params;
  std::optional<std::uint64_t> seed;
};

/// Sessions with a single writer each: a second message while one is in
/// flight raises SessionBusy.
class SessionStore {
 public:
  SessionStore(llm::Gateway& gw, SessionDefaults defaults, std::optional<std::filesystem::path> log_dir = {});

  std::string create(const nlohmann::json& overrides = nlohmann::json::object());
  ChatSession snapshot(const std::string& id) const;
  void set_steering(const std::string& id, const SteeringSpec& spec);
  SessionTurn message(const std::string& id, const std::string& text,
                      const std::optional<SteeringSpec>& steering = std::nullopt);
  std::size_t size() const;
  std::optional<std::filesystem::path> log_path(const std::string& id) const;

  /// Restores every session found in the log directory.
  std::size_t load_logs();

 private:
  struct Slot {
    std::mutex write;
    mutable std::mutex state;
    ChatSession session;
    std::unique_ptr<EventLog> log;
  };
  std::shared_ptr<Slot> find(const std::string& id) const;
  std::string next_id();

  llm::Gateway& gw_;
  SessionDefaults defaults_;
  std::optional<std::filesystem::path> log_dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::uint64_t counter_ = 0;
  std::uint64_t salt_;
};

}  // namespace sage::steer
