#pragma once

#include <string>

#include "json.hpp"
#include "sage/sac/types.hpp"

namespace sage::sac {

/// Serializes `s` with render_sac and marks, per system turn, the span from
/// the "[u_state]" delimiter through the end of the response. Speaker tags,
/// newlines and user lines are outside every span.
TrainingExample emit_training_example(const SacDialogue& s);

/// {"id","sac_text","mask_spans":[[s,e],...]}
nlohmann::json dataset_record(const std::string& id, const TrainingExample& ex);

struct DatasetRecord {
  std::string id;
  TrainingExample example;
};
DatasetRecord dataset_record_from_json(const nlohmann::json& j);

}  // namespace sage::sac
