#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/arena/matchup.hpp"
#include "sage/corpus/filter.hpp"
#include "sage/llm/gateway.hpp"
#include "sage/llm/openai.hpp"
#include "sage/llm/scripted.hpp"
#include "sage/selfplay/types.hpp"

namespace sage::shell {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

struct BackendConfig {
  std::string type = "scripted";  // scripted | openai
  std::uint64_t seed = 0;
  nlohmann::ordered_json rules = nlohmann::ordered_json::array();
  llm::OpenAIConfig openai;
};

struct RoleBinding {
  std::string backend;
  std::string model;
};

struct JudgeBinding {
  std::string name;
  RoleBinding role;
  std::string example;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string bearer_token;
};

/// The annotator, agent, user and selector roles plus one or more judges,
/// each bound to a named backend.
struct PipelineConfig {
  std::map<std::string, BackendConfig> backends;
  std::map<std::string, RoleBinding> roles;
  std::vector<JudgeBinding> judges;
  llm::GatewayOptions gateway;
  corpus::FilterConfig filter;
  selfplay::RolloutConfig rollout;
  llm::SamplingParams sampling;  // chat sessions
  std::optional<std::uint64_t> seed;
  std::string annotation_example;
  std::optional<std::filesystem::path> sessions_dir;
  ServeConfig serve;
  int parallel = 4;

  void validate() const;
};

inline const std::vector<std::string> kRoles{"annotator", "agent", "user", "selector"};

/// Every role on one offline scripted backend.
PipelineConfig default_config();

/// Throws ConfigError. Secrets come from the environment: each openai
/// backend reads its key from `api_key_env` (default SAGE_API_KEY), and
/// SAGE_SERVE_TOKEN sets the service bearer token.
PipelineConfig config_from_json(const nlohmann::ordered_json& j, const EnvLookup& env = process_env(),
                                const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env());

/// Throws ConfigError on a bad script.
std::shared_ptr<llm::ScriptedBackend> make_scripted(const std::string& name, const BackendConfig& b);

/// Builds one gateway per backend on first use.
class Backends {
 public:
  explicit Backends(PipelineConfig cfg);

  llm::Gateway& gateway_for(const std::string& role);
  const std::string& model_for(const std::string& role) const;
  std::vector<arena::NamedJudge> judges();
  const PipelineConfig& config() const { return cfg_; }

 private:
  llm::Gateway& backend(const std::string& name);

  PipelineConfig cfg_;
  std::map<std::string, std::unique_ptr<llm::Gateway>> gateways_;
};

}  // namespace sage::shell
