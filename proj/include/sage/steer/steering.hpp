#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/llm/gateway.hpp"
#include "sage/sac/types.hpp"

namespace sage::steer {

enum class Mode { none, bias, force };
enum class Scope { next_turn, session };

std::string_view to_string(Mode m);
std::string_view to_string(Scope s);

/// Partial action: unset fields are left to the model.
struct ActionOverride {
  std::optional<std::string> motivation;
  std::optional<std::string> emotion;
  std::optional<std::vector<std::string>> topics;

  bool empty() const { return !motivation && !emotion && !topics; }
  friend bool operator==(const ActionOverride&, const ActionOverride&) = default;
};

struct SteeringSpec {
  Mode mode = Mode::none;
  std::map<std::string, double> bias_keywords;
  ActionOverride forced_action;
  Scope scope = Scope::next_turn;

  /// Throws InvalidSteering.
  void validate() const;
  friend bool operator==(const SteeringSpec&, const SteeringSpec&) = default;
};

class InvalidSteering : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

constexpr double kDefaultBias = 1.0;

/// Accepts {"mode","scope","bias_keywords","forced_action"}. bias_keywords
/// may be a map or a list (each gets "bias_strength", default 1.0). Throws
/// InvalidSteering.
SteeringSpec steering_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SteeringSpec& s);
nlohmann::json to_json(const ActionOverride& o);

/// Field-wise: set override fields replace the prediction, others are kept.
sac::DialogAction apply_override(const sac::DialogAction& predicted, const ActionOverride& forced);

/// Names of the fields an override sets ("motivation", "emotion", "topics").
std::vector<std::string> forced_fields(const ActionOverride& forced);

/// Phase-1 output could not be parsed within the retry budget.
class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, std::string raw) : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

struct GenerateOptions {
  std::string model_id;
  llm::SamplingParams params;
  /// Base for per-phase seeds; unset leaves sampling unseeded.
  std::optional<std::uint64_t> seed;
  int phase1_retries = 2;
};

struct GenerationTrace {
  sac::SacSystemTurn turn;
  std::string phase1_raw;
  std::string phase2_raw;
  int phase1_attempts = 0;
  std::vector<std::string> forced;
};

/// Phase 1 samples through "[/a_action]" (carrying the keyword bias in bias
/// mode); in force mode the action block is overridden; phase 2 continues
/// the assistant prefix to produce the response. `history` must end with
/// the open user turn.
GenerationTrace two_phase_generate(llm::Gateway& gw, const sac::SacDialogue& history, const SteeringSpec& steering,
                                   const GenerateOptions& opts);

}  // namespace sage::steer
