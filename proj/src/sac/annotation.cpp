#include "sage/sac/annotation.hpp"

#include <spdlog/spdlog.h>

#include <stdexcept>

#include "sage/common/text.hpp"

namespace sage::sac {

namespace {

constexpr std::string_view kPromptHead =
    "Identify the motivation, emotion, and topics of the user utterance by annotating the dialog.\n"
    "In rare cases, if really cannot find appropriate motivation or emotion, put \"motivation: null\" "
    "or \"emotion: null\".\n"
    "Meanwhile, make the utterance more readable.\n"
    "For each utterance from \"gpt\", if it is not ending with a question, add a bridging question at "
    "the end to lead to the next user utterance if needed.\n"
    "Make no change if there is no need for adding a question.\n";

struct SpeakerTag {
  std::string_view tag;
  corpus::Speaker speaker;
};

constexpr SpeakerTag kTags[] = {
    {"<user>", corpus::Speaker::user},        {"<system>", corpus::Speaker::system},
    {"user:", corpus::Speaker::user},         {"human:", corpus::Speaker::user},
    {"system:", corpus::Speaker::system},     {"assistant:", corpus::Speaker::system},
    {"gpt:", corpus::Speaker::system},
};

}  // namespace

std::string render_plain_dialogue(const corpus::Dialogue& d) {
  std::string out;
  for (const auto& u : d.turns) {
    out.append(u.speaker == corpus::Speaker::user ? kUserPrefix : kSystemPrefix);
    out.append(escape_text(u.text)).append("\n");
  }
  return out;
}

std::string build_annotation_prompt(const corpus::Dialogue& d, std::string_view example) {
  std::string out(kPromptHead);
  auto ex = text::trim(example);
  if (!ex.empty()) out.append("For example,\n").append(ex).append("\n");
  out.append("Now do the following new input:\n");
  out.append(render_plain_dialogue(d));
  return out;
}

void validate(const AnnotatedDialogue& a) {
  for (std::size_t i = 0; i < a.turns.size(); ++i) {
    const auto& t = a.turns[i];
    const auto expected = i % 2 == 0 ? corpus::Speaker::user : corpus::Speaker::system;
    if (t.speaker != expected)
      throw std::invalid_argument("turn " + std::to_string(i) + ": speakers must alternate from user");
    const bool is_state = std::holds_alternative<StateAssessment>(t.annotation);
    if (is_state != (t.speaker == corpus::Speaker::user))
      throw std::invalid_argument("turn " + std::to_string(i) + ": annotation kind does not match speaker");
  }
}

std::string serialize_annotated(const AnnotatedDialogue& a) {
  std::string out;
  for (const auto& t : a.turns) {
    if (t.speaker == corpus::Speaker::user) {
      out.append(kUserPrefix).append(render_block(std::get<StateAssessment>(t.annotation)));
    } else {
      out.append(kSystemPrefix).append(render_block(std::get<DialogAction>(t.annotation)));
    }
    if (!t.text.empty()) out.append(" ").append(escape_text(t.text));
    out.append("\n");
  }
  return out;
}

AnnotatedDialogue parse_annotated(std::string_view output) {
  AnnotatedDialogue a;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < output.size()) {
    auto nl = output.find('\n', pos);
    if (nl == std::string_view::npos) nl = output.size();
    const auto line = output.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    // Only the left edge is trimmed here: a trailing "\ " is an escaped space.
    auto body = line.substr(line.find_first_not_of(" \t\r\f\v"));

    const std::size_t turn = a.turns.size();
    std::optional<corpus::Speaker> tagged;
    const auto lower = text::to_lower_ascii(body.substr(0, 12));
    for (const auto& t : kTags) {
      if (lower.rfind(t.tag, 0) == 0) {
        tagged = t.speaker;
        body.remove_prefix(t.tag.size());
        body.remove_prefix(std::min(body.size(), body.find_first_not_of(" \t")));
        break;
      }
    }
    const bool has_state = body.rfind(kStateOpen, 0) == 0;
    const bool has_action = body.rfind(kActionOpen, 0) == 0;

    if (!has_state && !has_action) {
      if (!tagged && !a.turns.empty()) {
        auto& prev = a.turns.back().text;
        const auto cont = unescape_text(body);
        prev += prev.empty() ? cont : "\n" + cont;
        continue;
      }
      throw ParseError({ParseErrorKind::missing_block, turn, line_no,
                        tagged == corpus::Speaker::system ? std::string(kActionOpen) : std::string(kStateOpen),
                        "turn has no annotation block"});
    }
    const auto block_speaker = has_state ? corpus::Speaker::user : corpus::Speaker::system;
    const auto expected = turn % 2 == 0 ? corpus::Speaker::user : corpus::Speaker::system;
    if ((tagged && *tagged != block_speaker) || block_speaker != expected) {
      throw ParseError({ParseErrorKind::speaker_mismatch, turn, line_no,
                        expected == corpus::Speaker::user ? "user turn with [u_state]" : "system turn with [a_action]",
                        "got " + std::string(corpus::to_string(tagged.value_or(block_speaker))) + " turn with " +
                            std::string(has_state ? kStateOpen : kActionOpen)});
    }

    AnnotatedTurn t;
    t.speaker = block_speaker;
    try {
      std::size_t at = 0;
      if (has_state) t.annotation = parse_block<StateAssessment>(body, at, turn);
      else t.annotation = parse_block<DialogAction>(body, at, turn);
      t.text = unescape_text(body.substr(at));
    } catch (const ParseError& e) {
      auto issue = e.issue();
      issue.line = line_no;
      throw ParseError(std::move(issue));
    }
    a.turns.push_back(std::move(t));
  }
  return a;
}

RestructureResult restructure(const AnnotatedDialogue& a) {
  validate(a);
  RestructureResult out;
  for (std::size_t i = 0; i + 1 < a.turns.size(); i += 2) {
    const auto& user = a.turns[i];
    const auto& sys = a.turns[i + 1];
    out.dialogue.exchanges.push_back(
        {user.text,
         {std::get<StateAssessment>(user.annotation), std::get<DialogAction>(sys.annotation), sys.text}});
  }
  if (a.turns.size() % 2 == 1) {
    out.dropped_trailing_user = 1;
    spdlog::debug("restructure: dropped trailing user turn {}", a.turns.size() - 1);
  }
  return out;
}

}  // namespace sage::sac
