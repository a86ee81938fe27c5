#include "sage/steer/steering.hpp"

#include <cmath>

#include "sage/common/random.hpp"
#include "sage/common/text.hpp"
#include "sage/sac/grammar.hpp"
#include "sage/selfplay/rollout.hpp"

namespace sage::steer {

using nlohmann::json;

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::none: return "none";
    case Mode::bias: return "bias";
    case Mode::force: return "force";
  }
  return "none";
}

std::string_view to_string(Scope s) { return s == Scope::session ? "session" : "next_turn"; }

void SteeringSpec::validate() const {
  for (const auto& [k, v] : bias_keywords) {
    if (text::trim(k).empty()) throw InvalidSteering("bias keyword must not be blank");
    if (!std::isfinite(v)) throw InvalidSteering("bias for '" + k + "' is not finite");
  }
  if (mode == Mode::bias && bias_keywords.empty()) throw InvalidSteering("bias mode needs at least one keyword");
  if (mode == Mode::force && forced_action.empty()) throw InvalidSteering("force mode needs at least one forced field");
}

SteeringSpec steering_from_json(const json& j) {
  if (!j.is_object()) throw InvalidSteering("steering must be an object");
  SteeringSpec s;
  try {
    const auto mode = j.value("mode", std::string("none"));
    if (mode == "none") s.mode = Mode::none;
    else if (mode == "bias") s.mode = Mode::bias;
    else if (mode == "force") s.mode = Mode::force;
    else throw InvalidSteering("unknown mode '" + mode + "'");

    const auto scope = j.value("scope", std::string("next_turn"));
    if (scope == "next_turn") s.scope = Scope::next_turn;
    else if (scope == "session") s.scope = Scope::session;
    else throw InvalidSteering("unknown scope '" + scope + "'");

    if (j.contains("bias_keywords")) {
      const auto& b = j.at("bias_keywords");
      if (b.is_array()) {
        const double strength = j.value("bias_strength", kDefaultBias);
        for (const auto& k : b) s.bias_keywords[k.get<std::string>()] = strength;
      } else {
        s.bias_keywords = b.get<std::map<std::string, double>>();
      }
    }
    if (j.contains("forced_action") && !j.at("forced_action").is_null()) {
      const auto& f = j.at("forced_action");
      if (!f.is_object()) throw InvalidSteering("forced_action must be an object");
      for (const auto& [key, _] : f.items())
        if (key != "motivation" && key != "emotion" && key != "topics")
          throw InvalidSteering("unknown forced_action field '" + key + "'");
      if (f.contains("motivation") && !f["motivation"].is_null()) s.forced_action.motivation = f["motivation"].get<std::string>();
      if (f.contains("emotion") && !f["emotion"].is_null()) s.forced_action.emotion = f["emotion"].get<std::string>();
      if (f.contains("topics") && !f["topics"].is_null())
        s.forced_action.topics = sac::normalize_topics(f["topics"].get<std::vector<std::string>>());
    }
  } catch (const json::exception& e) {
    throw InvalidSteering(std::string("malformed steering: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const ActionOverride& o) {
  json j = json::object();
  if (o.motivation) j["motivation"] = *o.motivation;
  if (o.emotion) j["emotion"] = *o.emotion;
  if (o.topics) j["topics"] = *o.topics;
  return j;
}

json to_json(const SteeringSpec& s) {
  return {{"mode", to_string(s.mode)},
          {"scope", to_string(s.scope)},
          {"bias_keywords", s.bias_keywords},
          {"forced_action", to_json(s.forced_action)}};
}

sac::DialogAction apply_override(const sac::DialogAction& predicted, const ActionOverride& forced) {
  auto out = predicted;
  if (forced.motivation) out.motivation = forced.motivation;
  if (forced.emotion) out.emotion = forced.emotion;
  if (forced.topics) out.topics = *forced.topics;
  return out;
}

std::vector<std::string> forced_fields(const ActionOverride& forced) {
  std::vector<std::string> out;
  if (forced.motivation) out.emplace_back("motivation");
  if (forced.emotion) out.emplace_back("emotion");
  if (forced.topics) out.emplace_back("topics");
  return out;
}

GenerationTrace two_phase_generate(llm::Gateway& gw, const sac::SacDialogue& history, const SteeringSpec& steering,
                                   const GenerateOptions& opts) {
  steering.validate();
  if (!history.open_user_turn) throw std::invalid_argument("history must end with a user message");
  const auto messages = selfplay::agent_messages(history);
  const auto turn = history.exchanges.size();
  auto seed_for = [&](std::uint64_t phase, std::uint64_t attempt) -> std::optional<std::uint64_t> {
    if (!opts.seed) return std::nullopt;
    return derive_seed(*opts.seed, turn, phase, attempt);
  };

  GenerationTrace trace;
  llm::ChatRequest p1;
  p1.messages = messages;
  p1.params = opts.params;
  p1.params.n = 1;
  p1.params.stop_sequences = {std::string(sac::kActionClose)};
  p1.model_id = opts.model_id;
  p1.purpose = llm::Purpose::agent;
  if (steering.mode == Mode::bias) p1.logit_bias = steering.bias_keywords;

  std::optional<sac::BlockPrefix> blocks;
  for (int attempt = 0; attempt <= opts.phase1_retries && !blocks; ++attempt) {
    p1.params.seed = seed_for(1, static_cast<std::uint64_t>(attempt));
    trace.phase1_raw = gw.complete(p1).choices.at(0);
    ++trace.phase1_attempts;
    auto text = trace.phase1_raw;
    // The stop sequence itself is not returned.
    if (text.find(sac::kActionClose) == std::string::npos) text += std::string(sac::kActionClose);
    try {
      blocks = sac::parse_block_prefix(text, turn);
    } catch (const sac::ParseError&) {
    }
  }
  if (!blocks) {
    throw GenerationError("phase 1 output unparseable after " + std::to_string(trace.phase1_attempts) + " attempts",
                          trace.phase1_raw);
  }

  auto action = blocks->action;
  if (steering.mode == Mode::force) {
    action = apply_override(action, steering.forced_action);
    trace.forced = forced_fields(steering.forced_action);
  }
  const auto prefix = sac::render_blocks(blocks->state, action);

  llm::ChatRequest p2;
  p2.messages = messages;
  p2.messages.push_back({llm::Role::assistant, prefix});
  p2.params = opts.params;
  p2.params.n = 1;
  p2.params.stop_sequences = {std::string(sac::kUserPrefix)};
  p2.params.seed = seed_for(2, 0);
  p2.model_id = opts.model_id;
  p2.purpose = llm::Purpose::agent;
  trace.phase2_raw = gw.complete(p2).choices.at(0);

  std::string response = trace.phase2_raw;
  // A model that re-emits the blocks anyway: keep only what follows them.
  if (auto close = response.find(sac::kActionClose); close != std::string::npos)
    response = response.substr(close + sac::kActionClose.size());
  trace.turn = {blocks->state, action, sac::unescape_text(response)};
  return trace;
}

}  // namespace sage::steer
