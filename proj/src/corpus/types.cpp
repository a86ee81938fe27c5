#include "sage/corpus/types.hpp"

#include "sage/common/text.hpp"

namespace sage::corpus {

std::string_view to_string(Speaker s) { return s == Speaker::user ? "user" : "system"; }

Speaker speaker_from_string(std::string_view s) {
  const auto lower = text::to_lower_ascii(text::trim(s));
  if (lower == "user" || lower == "human") return Speaker::user;
  if (lower == "system" || lower == "assistant" || lower == "gpt") return Speaker::system;
  throw InvalidDialogue("unknown speaker '" + std::string(s) + "'");
}

void validate(const Dialogue& d) {
  if (d.turns.empty()) throw InvalidDialogue("dialogue '" + d.id + "' has no turns");
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const auto expected = i % 2 == 0 ? Speaker::user : Speaker::system;
    if (d.turns[i].speaker != expected)
      throw InvalidDialogue("dialogue '" + d.id + "' turn " + std::to_string(i) +
                            ": speakers must alternate starting with user");
    if (text::trim(d.turns[i].text).empty())
      throw InvalidDialogue("dialogue '" + d.id + "' turn " + std::to_string(i) + " is blank");
  }
}

Dialogue dialogue_from_json(const nlohmann::json& j) {
  Dialogue d;
  d.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
  for (const auto& t : j.at("turns")) {
    d.turns.push_back({speaker_from_string(t.at("speaker").get<std::string>()),
                       t.at("text").get<std::string>()});
  }
  if (auto it = j.find("meta"); it != j.end() && it->is_object()) {
    for (const auto& [k, v] : it->items())
      d.source_meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
  }
  validate(d);
  return d;
}

nlohmann::json to_json(const Dialogue& d) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& u : d.turns) turns.push_back({{"speaker", to_string(u.speaker)}, {"text", u.text}});
  nlohmann::json meta = nlohmann::json::object();
  for (const auto& [k, v] : d.source_meta) meta[k] = v;
  return {{"id", d.id}, {"turns", std::move(turns)}, {"meta", std::move(meta)}};
}

}  // namespace sage::corpus
