#include "sage/llm/types.hpp"

#include <cmath>

#include "sage/common/random.hpp"

namespace sage::llm {

using nlohmann::json;

std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw std::invalid_argument("unknown role '" + std::string(s) + "'");
}

void SamplingParams::validate() const {
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (max_tokens < 1) throw std::invalid_argument("max_tokens must be >= 1");
  if (!(repetition_penalty > 0.0)) throw std::invalid_argument("repetition_penalty must be > 0");
}

SamplingParams deterministic_params() {
  SamplingParams p;
  p.top_k = 1;
  p.temperature = 1e-6;  // some servers reject exactly 0; top_k=1 makes it greedy anyway
  p.repetition_penalty = 1.0;
  p.max_tokens = 2048;
  return p;
}

json to_json(const SamplingParams& p) {
  json j = {{"top_k", p.top_k},
            {"temperature", p.temperature},
            {"repetition_penalty", p.repetition_penalty},
            {"n", p.n},
            {"max_tokens", p.max_tokens},
            {"stop_sequences", p.stop_sequences}};
  j["seed"] = p.seed ? json(*p.seed) : json(nullptr);
  return j;
}

SamplingParams sampling_params_from_json(const json& j, SamplingParams p) {
  if (j.contains("top_k")) p.top_k = j.at("top_k").get<int>();
  if (j.contains("temperature")) p.temperature = j.at("temperature").get<double>();
  if (j.contains("repetition_penalty")) p.repetition_penalty = j.at("repetition_penalty").get<double>();
  if (j.contains("n")) p.n = j.at("n").get<int>();
  if (j.contains("max_tokens")) p.max_tokens = j.at("max_tokens").get<int>();
  if (j.contains("stop_sequences")) p.stop_sequences = j.at("stop_sequences").get<std::vector<std::string>>();
  if (j.contains("seed")) {
    if (j.at("seed").is_null()) p.seed.reset();
    else p.seed = j.at("seed").get<std::uint64_t>();
  }
  p.validate();
  return p;
}

std::string_view to_string(Purpose p) {
  switch (p) {
    case Purpose::unspecified: return "unspecified";
    case Purpose::agent: return "agent";
    case Purpose::user_sim: return "user_sim";
    case Purpose::selector: return "selector";
    case Purpose::judge: return "judge";
    case Purpose::annotator: return "annotator";
  }
  return "unspecified";
}

Purpose purpose_from_string(std::string_view s) {
  for (auto p : {Purpose::agent, Purpose::user_sim, Purpose::selector, Purpose::judge, Purpose::annotator})
    if (to_string(p) == s) return p;
  return Purpose::unspecified;
}

void ChatRequest::validate() const {
  if (messages.empty()) throw std::invalid_argument("request has no messages");
  for (const auto& [k, v] : logit_bias)
    if (!std::isfinite(v)) throw std::invalid_argument("logit bias for '" + k + "' is not finite");
  params.validate();
}

json to_json(const ChatRequest& r) {
  json msgs = json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  return {{"model", r.model_id},
          {"purpose", to_string(r.purpose)},
          {"messages", msgs},
          {"params", to_json(r.params)},
          {"logit_bias", r.logit_bias}};
}

ChatRequest chat_request_from_json(const json& j) {
  ChatRequest r;
  r.model_id = j.value("model", "");
  r.purpose = purpose_from_string(j.value("purpose", "unspecified"));
  for (const auto& m : j.at("messages"))
    r.messages.push_back({role_from_string(m.at("role").get<std::string>()), m.at("content").get<std::string>()});
  if (j.contains("params")) r.params = sampling_params_from_json(j.at("params"));
  if (j.contains("logit_bias")) r.logit_bias = j.at("logit_bias").get<std::map<std::string, double>>();
  return r;
}

std::uint64_t fingerprint(const ChatRequest& r) { return fnv1a(to_json(r).dump()); }

json to_json(const CompletionResult& r) {
  return {{"choices", r.choices},
          {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}},
          {"backend_meta", r.backend_meta}};
}

CompletionResult completion_result_from_json(const json& j) {
  CompletionResult r;
  r.choices = j.at("choices").get<std::vector<std::string>>();
  if (j.contains("usage")) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
    r.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
  }
  if (j.contains("backend_meta")) r.backend_meta = j.at("backend_meta");
  return r;
}

std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::timeout: return "Timeout";
    case ErrorKind::rate_limited: return "RateLimited";
    case ErrorKind::server: return "ServerError";
    case ErrorKind::transport: return "TransportError";
    case ErrorKind::client: return "ClientError";
    case ErrorKind::malformed_response: return "MalformedResponse";
    case ErrorKind::replay_miss: return "ReplayMiss";
  }
  return "?";
}

bool GatewayError::retryable() const {
  switch (kind_) {
    case ErrorKind::timeout:
    case ErrorKind::rate_limited:
    case ErrorKind::server:
    case ErrorKind::transport: return true;
    default: return false;
  }
}

}  // namespace sage::llm
