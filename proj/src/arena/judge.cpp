#include "sage/arena/judge.hpp"

#include <regex>

#include "sage/common/text.hpp"

namespace sage::arena {

using nlohmann::json;

std::string_view to_string(Label l) {
  switch (l) {
    case Label::A: return "A";
    case Label::B: return "B";
    case Label::unparseable: return "unparseable";
  }
  return "unparseable";
}

std::string_view to_string(Ordering o) { return o == Ordering::AB ? "AB" : "BA"; }

std::string_view to_string(Winner w) {
  switch (w) {
    case Winner::A: return "A";
    case Winner::B: return "B";
    case Winner::tie_inconsistent: return "tie_inconsistent";
  }
  return "tie_inconsistent";
}

Label parse_verdict(std::string_view raw) {
  static const std::regex re(R"(dialog(ue)?\s+([ab])\s+is\s+better)", std::regex::icase);
  bool a = false, b = false;
  const std::string s(raw);
  for (std::sregex_iterator it(s.begin(), s.end(), re), end; it != end; ++it) {
    const char c = (*it)[2].str()[0];
    (c == 'a' || c == 'A' ? a : b) = true;
  }
  if (a == b) return Label::unparseable;
  return a ? Label::A : Label::B;
}

Winner combine(Label ab, Label ba) {
  // In the swapped call, label A names the original B.
  if (ab == Label::A && ba == Label::B) return Winner::A;
  if (ab == Label::B && ba == Label::A) return Winner::B;
  return Winner::tie_inconsistent;
}

json to_json(const ConsistentVerdict& v) {
  auto verdict = [](const JudgeVerdict& j) {
    return json{{"ordering", to_string(j.ordering)}, {"raw", j.raw}, {"parsed", to_string(j.parsed)}};
  };
  json out = {{"winner", to_string(v.winner)}, {"verdict_ab", verdict(v.verdict_ab)}, {"verdict_ba", verdict(v.verdict_ba)}};
  if (!v.error.empty()) out["error"] = v.error;
  return out;
}

std::string render_for_judge(const sac::SacDialogue& d) {
  std::string out;
  for (const auto& ex : d.exchanges) {
    out.append("User: ").append(ex.user_text).append("\n");
    out.append("Assistant: ").append(ex.system.response).append("\n");
  }
  if (d.open_user_turn) out.append("User: ").append(*d.open_user_turn).append("\n");
  return out;
}

std::string judge_prompt(std::string_view example, std::string_view dialog_a, std::string_view dialog_b) {
  std::string out =
      "You are given a transcript of dialogue between a user and an assistant. You need to judge which "
      "assistant is better as a social chatbot. A good chatbot should sound like a real human, being "
      "colloquial, humorous, funny, intriguing, sympathetic, natural and not overly verbose. Judge by only "
      "stating \"Dialog X is better\", where X is either A or B. Do not provide rationale.";
  const auto ex = text::trim(example);
  if (!ex.empty()) out.append(" For example,\n").append(ex).append(".");
  out.append(" Now do the following:\n");
  auto block = [&](std::string_view label, std::string_view d) {
    out.append(label).append("\n").append(d);
    if (!d.empty() && d.back() != '\n') out += '\n';
  };
  block("Dialog A:", dialog_a);
  block("Dialog B:", dialog_b);
  out.append("Conclusion:");
  return out;
}

ConsistentVerdict compare_pair(const std::string& dialog_a, const std::string& dialog_b, const JudgeSpec& judge) {
  if (text::trim(dialog_a).empty() || text::trim(dialog_b).empty())
    throw std::invalid_argument("compare_pair needs two non-empty dialogues");
  if (!judge.gateway) throw std::invalid_argument("judge gateway not configured");
  auto request = [&](const std::string& first, const std::string& second) {
    llm::ChatRequest r;
    r.messages = {{llm::Role::user, judge_prompt(judge.example, first, second)}};
    r.params = llm::deterministic_params();
    r.params.max_tokens = 16;
    r.model_id = judge.model_id;
    r.purpose = llm::Purpose::judge;
    return r;
  };
  auto ab = judge.gateway->submit(request(dialog_a, dialog_b));
  auto ba = judge.gateway->submit(request(dialog_b, dialog_a));

  ConsistentVerdict v;
  v.verdict_ab.ordering = Ordering::AB;
  v.verdict_ba.ordering = Ordering::BA;
  for (auto [fut, verdict] : {std::pair{&ab, &v.verdict_ab}, std::pair{&ba, &v.verdict_ba}}) {
    try {
      verdict->raw = fut->get().choices.at(0);
      verdict->parsed = parse_verdict(verdict->raw);
    } catch (const llm::GatewayError& e) {
      v.error += (v.error.empty() ? "" : "; ") + std::string(to_string(verdict->ordering)) + ": " + e.what();
    }
  }
  v.winner = v.error.empty() ? combine(v.verdict_ab.parsed, v.verdict_ba.parsed) : Winner::tie_inconsistent;
  return v;
}

}  // namespace sage::arena
