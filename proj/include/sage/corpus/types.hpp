#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace sage::corpus {

enum class Speaker { user, system };

std::string_view to_string(Speaker s);
Speaker speaker_from_string(std::string_view s);

struct Utterance {
  Speaker speaker = Speaker::user;
  std::string text;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> turns;
  std::map<std::string, std::string> source_meta;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

class InvalidDialogue : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Throws InvalidDialogue unless turns are non-empty, texts are non-blank and
/// speakers alternate starting with the user.
void validate(const Dialogue& d);

/// Decodes {"id","turns":[{"speaker","text"}],"meta"} and validates it.
Dialogue dialogue_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Dialogue& d);

}  // namespace sage::corpus
