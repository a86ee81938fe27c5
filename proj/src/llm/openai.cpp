#include "sage/llm/openai.hpp"

#include <httplib.h>

#include <algorithm>
#include <regex>

namespace sage::llm {

using nlohmann::json;

namespace {

GatewayError classify(int status, const std::string& body) {
  const auto msg = "HTTP " + std::to_string(status) + ": " + body.substr(0, 300);
  if (status == 429) return {ErrorKind::rate_limited, msg, status};
  if (status == 408 || status == 504) return {ErrorKind::timeout, msg, status};
  if (status >= 500) return {ErrorKind::server, msg, status};
  return {ErrorKind::client, msg, status};
}

GatewayError classify(httplib::Error err) {
  if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
    return {ErrorKind::timeout, "request timed out (" + httplib::to_string(err) + ")"};
  return {ErrorKind::transport, httplib::to_string(err)};
}

std::unique_ptr<httplib::Client> make_client(const std::string& origin, const OpenAIConfig& cfg) {
  auto c = std::make_unique<httplib::Client>(origin);
  c->set_connection_timeout(cfg.timeout);
  c->set_read_timeout(cfg.timeout);
  c->set_write_timeout(cfg.timeout);
  if (!cfg.api_key.empty()) c->set_bearer_token_auth(cfg.api_key);
  return c;
}

json post(const std::string& origin, const OpenAIConfig& cfg, const std::string& path, const json& body) {
  auto client = make_client(origin, cfg);
  auto res = client->Post(path, body.dump(), "application/json");
  if (!res) throw classify(res.error());
  if (res->status != 200) throw classify(res->status, res->body);
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw GatewayError(ErrorKind::malformed_response, std::string("invalid JSON: ") + e.what(), res->status);
  }
}

}  // namespace

CompletionResult parse_chat_response(const std::string& body) {
  try {
    auto j = json::parse(body);
    const auto& choices = j.at("choices");
    if (!choices.is_array() || choices.empty()) throw GatewayError(ErrorKind::malformed_response, "no choices");
    std::vector<std::pair<std::size_t, std::string>> indexed;
    for (std::size_t i = 0; i < choices.size(); ++i) {
      const auto& c = choices[i];
      const auto& content = c.at("message").at("content");
      indexed.emplace_back(c.value("index", i), content.is_null() ? "" : content.get<std::string>());
    }
    std::stable_sort(indexed.begin(), indexed.end(), [](auto& a, auto& b) { return a.first < b.first; });
    CompletionResult r;
    for (auto& [_, s] : indexed) r.choices.push_back(std::move(s));
    if (j.contains("usage") && j["usage"].is_object()) {
      r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
      r.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
    }
    r.backend_meta = {{"backend", "openai"}, {"model", j.value("model", "")}, {"id", j.value("id", "")}};
    return r;
  } catch (const json::exception& e) {
    throw GatewayError(ErrorKind::malformed_response, std::string("unexpected response shape: ") + e.what());
  }
}

OpenAIBackend::OpenAIBackend(OpenAIConfig cfg) : cfg_(std::move(cfg)) {
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(cfg_.base_url, m, url)) throw std::invalid_argument("bad base_url '" + cfg_.base_url + "'");
  origin_ = m[1].str();
  path_prefix_ = m[2].str();
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

OpenAIBackend::~OpenAIBackend() = default;

std::vector<long long> OpenAIBackend::token_ids(const std::string& model, const std::string& keyword) {
  const auto key = std::make_pair(model, keyword);
  {
    std::lock_guard lock(cache_mu_);
    if (auto it = token_cache_.find(key); it != token_cache_.end()) return it->second;
  }
  std::vector<long long> ids;
  // Both the bare and the space-prefixed spelling, since BPE vocabularies
  // usually tokenize mid-sentence words with a leading space.
  for (const auto& form : {keyword, " " + keyword}) {
    auto j = post(origin_, cfg_, path_prefix_ + *cfg_.tokenize_path,
                  {{"model", model}, {"prompt", form}, {"add_special_tokens", false}});
    const auto& toks = j.contains("tokens") ? j.at("tokens") : j.at("token_ids");
    // Only the first sub-token is boosted: that is the decision point.
    if (!toks.empty()) ids.push_back(toks.front().get<long long>());
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::lock_guard lock(cache_mu_);
  token_cache_[key] = ids;
  return ids;
}

json OpenAIBackend::build_body(const ChatRequest& req) {
  const auto model = req.model_id.empty() ? cfg_.default_model : req.model_id;
  json msgs = json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  json body = {{"model", model},
               {"messages", msgs},
               {"temperature", req.params.temperature},
               {"n", req.params.n},
               {"max_tokens", req.params.max_tokens},
               {"top_k", req.params.top_k},
               {"repetition_penalty", req.params.repetition_penalty}};
  if (!req.params.stop_sequences.empty()) body["stop"] = req.params.stop_sequences;
  if (req.params.seed) body["seed"] = *req.params.seed;
  if (req.continues_assistant()) {
    body["continue_final_message"] = true;
    body["add_generation_prompt"] = false;
  }
  if (!req.logit_bias.empty()) {
    json bias = json::object();
    for (const auto& [kw, v] : req.logit_bias) {
      if (cfg_.tokenize_path) {
        for (auto id : token_ids(model, kw)) bias[std::to_string(id)] = v;
      } else {
        bias[kw] = v;
      }
    }
    body["logit_bias"] = bias;
  }
  return body;
}

CompletionResult OpenAIBackend::complete(const ChatRequest& req) {
  auto body = build_body(req);
  auto client = make_client(origin_, cfg_);
  auto res = client->Post(path_prefix_ + "/chat/completions", body.dump(), "application/json");
  if (!res) throw classify(res.error());
  if (res->status != 200) throw classify(res->status, res->body);
  return parse_chat_response(res->body);
}

}  // namespace sage::llm
