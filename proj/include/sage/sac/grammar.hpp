#pragma once

// Canonical SAC serialization.
//
//   sac_text      = { line "\n" }
//   line          = "<user> " text
//                 | "<system> " system_msg
//   system_msg    = state_block " " action_block [ " " text ]
//   state_block   = "[u_state] u_motivation: " value "; u_emotion: " value
//                   "; u_topics:" [ " " topics ] " [/u_state]"
//   action_block  = "[a_action] a_motivation: " value "; a_emotion: " value
//                   "; a_topics:" [ " " topics ] " [/a_action]"
//   value         = "null" | escaped
//   topics        = escaped { ", " escaped }
//
// Escapes: backslash precedes any of \ ; [ ] , and leading/trailing
// whitespace; newline, CR and tab are written \n \r \t. A literal value
// "null" is written nul\l. Utterance text escapes only \, newlines and
// leading/trailing whitespace. Unescaped whitespace around values is
// insignificant. Parsers also accept the unprefixed keys "motivation",
// "emotion", "topics".

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "sage/sac/types.hpp"

namespace sage::sac {

inline constexpr std::string_view kStateOpen = "[u_state]";
inline constexpr std::string_view kStateClose = "[/u_state]";
inline constexpr std::string_view kActionOpen = "[a_action]";
inline constexpr std::string_view kActionClose = "[/a_action]";
inline constexpr std::string_view kUserPrefix = "<user> ";
inline constexpr std::string_view kSystemPrefix = "<system> ";

enum class ParseErrorKind { missing_block, malformed_key, speaker_mismatch };

std::string_view to_string(ParseErrorKind k);

struct ParseIssue {
  ParseErrorKind kind = ParseErrorKind::missing_block;
  std::size_t turn_index = 0;
  std::size_t line = 0;  // 1-based; 0 when not line-oriented
  std::string expected;
  std::string detail;
};

class ParseError : public std::runtime_error {
 public:
  explicit ParseError(ParseIssue issue);
  const ParseIssue& issue() const { return issue_; }

 private:
  ParseIssue issue_;
};

std::string escape_value(std::string_view v);
std::string escape_text(std::string_view t);

template <BlockKind K>
std::string render_block(const Block<K>& b);

/// "[u_state] ... [/u_state] [a_action] ... [/a_action]"
std::string render_blocks(const StateAssessment& s, const DialogAction& a);
std::string render_system_message(const SacSystemTurn& t);
std::string render_sac(const SacDialogue& d);

/// Parses a single system message (optionally prefixed with "<system>").
/// Throws ParseError.
SacSystemTurn parse_system_message(std::string_view msg, std::size_t turn_index = 0);

/// Parses the leading state and action blocks of `msg`; returns them with the
/// byte offset just past the closing action delimiter.
struct BlockPrefix {
  StateAssessment state;
  DialogAction action;
  std::size_t consumed = 0;
};
BlockPrefix parse_block_prefix(std::string_view msg, std::size_t turn_index = 0);

SacDialogue parse_sac(std::string_view text);

/// Parses one block of type BlockT starting at `pos` (leading whitespace
/// skipped) and advances `pos` past its closing delimiter.
template <typename BlockT>
BlockT parse_block(std::string_view s, std::size_t& pos, std::size_t turn_index = 0);

/// Decodes escapes and trims unescaped surrounding whitespace.
std::string unescape_text(std::string_view raw);

/// Utterance text with SAC blocks removed: the response part of a system
/// message, or the input unchanged when it carries no blocks.
std::string strip_blocks(std::string_view msg);

}  // namespace sage::sac
