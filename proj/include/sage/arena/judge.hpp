#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "sage/llm/gateway.hpp"
#include "sage/sac/types.hpp"

namespace sage::arena {

enum class Label { A, B, unparseable };
enum class Ordering { AB, BA };
enum class Winner { A, B, tie_inconsistent };

std::string_view to_string(Label l);
std::string_view to_string(Ordering o);
std::string_view to_string(Winner w);

/// Case-insensitive "Dialog(ue) A|B is better". Mentions of both labels, or
/// none, are unparseable.
Label parse_verdict(std::string_view raw);

struct JudgeVerdict {
  Ordering ordering = Ordering::AB;
  std::string raw;
  Label parsed = Label::unparseable;
};

struct ConsistentVerdict {
  Winner winner = Winner::tie_inconsistent;
  JudgeVerdict verdict_ab;
  JudgeVerdict verdict_ba;
  std::string error;  // set when a judge call failed
};

/// Winner in terms of the original A/B from the two orderings' labels.
Winner combine(Label ab, Label ba);

nlohmann::json to_json(const ConsistentVerdict& v);

/// "User: ..." / "Assistant: ..." lines; SAC blocks never reach the judge.
std::string render_for_judge(const sac::SacDialogue& d);

/// The judge prompt with the in-context example (omitted when empty).
std::string judge_prompt(std::string_view example, std::string_view dialog_a, std::string_view dialog_b);

struct JudgeSpec {
  llm::Gateway* gateway = nullptr;
  std::string model_id = "judge";
  std::string example;
};

/// Judges (dA, dB) and (dB, dA) concurrently and keeps only a consistent
/// preference.
ConsistentVerdict compare_pair(const std::string& dialog_a, const std::string& dialog_b, const JudgeSpec& judge);

}  // namespace sage::arena
