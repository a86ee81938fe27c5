#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace sage::llm {

enum class Role { system, user, assistant };

std::string_view to_string(Role r);
Role role_from_string(std::string_view s);

struct Message {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct SamplingParams {
  int top_k = 100;
  double temperature = 1.1;
  double repetition_penalty = 1.1;
  int n = 1;
  int max_tokens = 512;
  std::vector<std::string> stop_sequences;
  std::optional<std::uint64_t> seed;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;
};

/// Greedy-ish settings for annotation and judging.
SamplingParams deterministic_params();

nlohmann::json to_json(const SamplingParams& p);
SamplingParams sampling_params_from_json(const nlohmann::json& j, SamplingParams base = {});

/// What a request is for. Informational for real backends; the scripted
/// backend uses it to pick a template family.
enum class Purpose { unspecified, agent, user_sim, selector, judge, annotator };

std::string_view to_string(Purpose p);
Purpose purpose_from_string(std::string_view s);

struct ChatRequest {
  std::vector<Message> messages;
  SamplingParams params;
  /// Keyword (not token id) -> additive logit bias.
  std::map<std::string, double> logit_bias;
  std::string model_id;
  Purpose purpose = Purpose::unspecified;

  /// True when the final message is an assistant prefix to be continued.
  bool continues_assistant() const { return !messages.empty() && messages.back().role == Role::assistant; }

  void validate() const;

  friend bool operator==(const ChatRequest&, const ChatRequest&) = default;
};

nlohmann::json to_json(const ChatRequest& r);
ChatRequest chat_request_from_json(const nlohmann::json& j);

/// Stable 64-bit hash of the canonical JSON form.
std::uint64_t fingerprint(const ChatRequest& r);

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;

  friend bool operator==(const Usage&, const Usage&) = default;
};

struct CompletionResult {
  std::vector<std::string> choices;
  Usage usage;
  nlohmann::json backend_meta = nlohmann::json::object();
};

nlohmann::json to_json(const CompletionResult& r);
CompletionResult completion_result_from_json(const nlohmann::json& j);

enum class ErrorKind { timeout, rate_limited, server, transport, client, malformed_response, replay_miss };

std::string_view to_string(ErrorKind k);

class GatewayError : public std::runtime_error {
 public:
  GatewayError(ErrorKind kind, const std::string& what, int status = 0)
      : std::runtime_error(what), kind_(kind), status_(status) {}

  ErrorKind kind() const { return kind_; }
  int status() const { return status_; }
  bool retryable() const;

 private:
  ErrorKind kind_;
  int status_;
};

}  // namespace sage::llm
