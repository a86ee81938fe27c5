#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sage/corpus/types.hpp"

namespace sage::sac {

enum class BlockKind { state, action };

/// Motivation / emotion / topics annotation. The state flavour annotates a
/// user utterance; the action flavour is the system's intended move.
template <BlockKind Kind>
struct Block {
  static constexpr BlockKind kind = Kind;

  std::optional<std::string> motivation;
  std::optional<std::string> emotion;
  std::vector<std::string> topics;

  friend bool operator==(const Block&, const Block&) = default;
};

using StateAssessment = Block<BlockKind::state>;
using DialogAction = Block<BlockKind::action>;

struct SacSystemTurn {
  StateAssessment user_state;
  DialogAction action;
  std::string response;

  friend bool operator==(const SacSystemTurn&, const SacSystemTurn&) = default;
};

struct SacExchange {
  std::string user_text;
  SacSystemTurn system;

  friend bool operator==(const SacExchange&, const SacExchange&) = default;
};

/// User turns interleaved with SAC system turns. `open_user_turn` holds a
/// final user message not yet answered (used for prompt contexts).
struct SacDialogue {
  std::vector<SacExchange> exchanges;
  std::optional<std::string> open_user_turn;

  friend bool operator==(const SacDialogue&, const SacDialogue&) = default;
};

struct AnnotatedTurn {
  corpus::Speaker speaker = corpus::Speaker::user;
  std::string text;
  std::variant<StateAssessment, DialogAction> annotation;

  friend bool operator==(const AnnotatedTurn&, const AnnotatedTurn&) = default;
};

struct AnnotatedDialogue {
  std::vector<AnnotatedTurn> turns;

  friend bool operator==(const AnnotatedDialogue&, const AnnotatedDialogue&) = default;
};

struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive

  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct TrainingExample {
  std::string text;
  std::vector<ByteSpan> mask;
};

/// Removes empty/blank topics and duplicates, keeping first occurrences.
std::vector<std::string> normalize_topics(std::vector<std::string> topics);

template <BlockKind K>
nlohmann::json block_to_json(const Block<K>& b) {
  nlohmann::json j;
  j["motivation"] = b.motivation ? nlohmann::json(*b.motivation) : nlohmann::json(nullptr);
  j["emotion"] = b.emotion ? nlohmann::json(*b.emotion) : nlohmann::json(nullptr);
  j["topics"] = b.topics;
  return j;
}

template <typename BlockT>
BlockT block_from_json(const nlohmann::json& j) {
  BlockT b;
  if (auto it = j.find("motivation"); it != j.end() && !it->is_null()) b.motivation = it->get<std::string>();
  if (auto it = j.find("emotion"); it != j.end() && !it->is_null()) b.emotion = it->get<std::string>();
  if (auto it = j.find("topics"); it != j.end() && it->is_array())
    b.topics = normalize_topics(it->get<std::vector<std::string>>());
  return b;
}

nlohmann::json to_json(const SacSystemTurn& t);
SacSystemTurn system_turn_from_json(const nlohmann::json& j);

}  // namespace sage::sac
