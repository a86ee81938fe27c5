#include "sage/sac/training.hpp"

#include "sage/sac/grammar.hpp"

namespace sage::sac {

TrainingExample emit_training_example(const SacDialogue& s) {
  TrainingExample ex;
  for (const auto& e : s.exchanges) {
    ex.text.append(kUserPrefix).append(escape_text(e.user_text)).append("\n");
    ex.text.append(kSystemPrefix);
    const auto begin = ex.text.size();
    ex.text.append(render_system_message(e.system));
    ex.mask.push_back({begin, ex.text.size()});
    ex.text.append("\n");
  }
  if (s.open_user_turn) ex.text.append(kUserPrefix).append(escape_text(*s.open_user_turn)).append("\n");
  return ex;
}

nlohmann::json dataset_record(const std::string& id, const TrainingExample& ex) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& sp : ex.mask) spans.push_back({sp.begin, sp.end});
  return {{"id", id}, {"sac_text", ex.text}, {"mask_spans", std::move(spans)}};
}

DatasetRecord dataset_record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.id = j.at("id").get<std::string>();
  r.example.text = j.at("sac_text").get<std::string>();
  for (const auto& sp : j.at("mask_spans")) r.example.mask.push_back({sp.at(0).get<std::size_t>(), sp.at(1).get<std::size_t>()});
  return r;
}

}  // namespace sage::sac
