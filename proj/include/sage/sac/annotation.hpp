#pragma once

#include <string>
#include <string_view>

#include "sage/corpus/types.hpp"
#include "sage/sac/grammar.hpp"
#include "sage/sac/types.hpp"

namespace sage::sac {

/// "<user> text" / "<system> text" lines, one per turn.
std::string render_plain_dialogue(const corpus::Dialogue& d);

/// Annotation prompt with the in-context example and the full query dialogue
/// substituted. An empty example drops the example section.
std::string build_annotation_prompt(const corpus::Dialogue& d, std::string_view example);

/// Canonical annotated form: "<user> [u_state] ... [/u_state] text" and
/// "<system> [a_action] ... [/a_action] text" lines.
std::string serialize_annotated(const AnnotatedDialogue& a);

/// Parses annotator output. Each turn starts on a new line with an optional
/// speaker tag (<user>, <system>, user:, human:, system:, assistant:, gpt:)
/// followed by its annotation block and text. Lines with neither tag nor
/// block continue the previous turn's text. Throws ParseError.
AnnotatedDialogue parse_annotated(std::string_view llm_output);

/// Throws std::invalid_argument when turns do not alternate from the user or
/// an annotation kind does not match its speaker.
void validate(const AnnotatedDialogue& a);

struct RestructureResult {
  SacDialogue dialogue;
  std::size_t dropped_trailing_user = 0;
};

/// Moves each user turn's state assessment onto the following system turn.
RestructureResult restructure(const AnnotatedDialogue& a);

}  // namespace sage::sac
