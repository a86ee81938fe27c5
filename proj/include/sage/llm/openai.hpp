#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "sage/llm/backend.hpp"

namespace sage::llm {

struct OpenAIConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";  // chat path is appended
  std::string api_key;
  std::string default_model;
  std::chrono::seconds timeout{120};
  /// When set, bias keywords are resolved to token ids via POST
  /// {base_url}{tokenize_path} ({"model","prompt"} -> {"tokens": [...]}).
  std::optional<std::string> tokenize_path;
};

/// Chat-completions client. top_k and repetition_penalty travel as extension
/// fields; an assistant-final message is sent with continue_final_message.
class OpenAIBackend : public Backend {
 public:
  explicit OpenAIBackend(OpenAIConfig cfg);
  ~OpenAIBackend() override;

  CompletionResult complete(const ChatRequest& req) override;
  std::string name() const override { return "openai:" + cfg_.base_url; }

  /// Request body as sent on the wire (token-id resolution applied).
  nlohmann::json build_body(const ChatRequest& req);

 private:
  std::vector<long long> token_ids(const std::string& model, const std::string& keyword);

  OpenAIConfig cfg_;
  std::string origin_;       // scheme://host:port
  std::string path_prefix_;  // e.g. /v1
  std::mutex cache_mu_;
  std::map<std::pair<std::string, std::string>, std::vector<long long>> token_cache_;
};

/// Parses {"choices": [{"index", "message": {"content"}}], "usage"}; throws
/// GatewayError(malformed_response).
CompletionResult parse_chat_response(const std::string& body);

}  // namespace sage::llm
