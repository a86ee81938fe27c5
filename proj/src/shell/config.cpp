#include "sage/shell/config.hpp"

#include <cstdlib>
#include <fstream>

#include "sage/common/text.hpp"
#include "sage/corpus/sentiment.hpp"
#include "sage/llm/scripted.hpp"

namespace sage::shell {

using nlohmann::json;
using nlohmann::ordered_json;

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
    return std::nullopt;
  };
}

namespace {

std::string bundled_prompt(const std::string& name) {
  std::ifstream in(corpus::default_data_dir() / "prompts" / name, std::ios::binary);
  if (!in) return {};
  std::string s{std::istreambuf_iterator<char>(in), {}};
  return std::string(text::trim(s));
}

}  // namespace

PipelineConfig default_config() {
  PipelineConfig c;
  c.annotation_example = bundled_prompt("annotation_example.txt");
  c.backends["mock"] = {};
  c.roles = {{"annotator", {"mock", "annotator"}},
             {"agent", {"mock", "SAGE_1"}},
             {"user", {"mock", "SAGE_1"}},
             {"selector", {"mock", "selector"}}};
  c.judges = {{"mock-judge", {"mock", "judge"}, bundled_prompt("judge_example.txt")}};
  return c;
}

void PipelineConfig::validate() const {
  auto check = [&](const std::string& what, const RoleBinding& r) {
    if (!backends.count(r.backend))
      throw ConfigError(what + " refers to unknown backend '" + r.backend + "'");
    if (r.model.empty()) throw ConfigError(what + " has no model id");
  };
  for (const auto& [name, r] : roles) check("role '" + name + "'", r);
  for (const auto& role : kRoles)
    if (!roles.count(role)) throw ConfigError("role '" + role + "' is not bound");
  if (judges.empty()) throw ConfigError("at least one judge must be configured");
  for (const auto& j : judges) check("judge '" + j.name + "'", j.role);
  for (const auto& [name, b] : backends) {
    if (b.type != "scripted" && b.type != "openai")
      throw ConfigError("backend '" + name + "': unknown type '" + b.type + "'");
  }
  if (parallel < 1) throw ConfigError("parallel must be >= 1");
  try {
    filter.validate();
    rollout.validate();
    sampling.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

namespace {

RoleBinding role_from_json(const ordered_json& j, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be an object");
  return {j.value("backend", std::string()), j.value("model", std::string())};
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

BackendConfig backend_from_json(const std::string& name, const ordered_json& j, const EnvLookup& env,
                                std::optional<std::uint64_t> global_seed) {
  if (!j.is_object()) throw ConfigError("backend '" + name + "' must be an object");
  BackendConfig b;
  b.type = j.value("type", std::string("scripted"));
  if (b.type == "scripted") {
    b.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : global_seed.value_or(0);
    if (j.contains("rules")) b.rules = j.at("rules");
  } else if (b.type == "openai") {
    auto& o = b.openai;
    o.base_url = j.value("base_url", o.base_url);
    if (auto url_env = j.value("base_url_env", std::string()); !url_env.empty())
      if (auto v = env(url_env)) o.base_url = *v;
    o.api_key = j.value("api_key", std::string());
    if (auto v = env(j.value("api_key_env", std::string("SAGE_API_KEY")))) o.api_key = *v;
    o.default_model = j.value("model", std::string());
    o.timeout = std::chrono::seconds(j.value("timeout_s", 120));
    if (j.contains("tokenize_path") && !j.at("tokenize_path").is_null())
      o.tokenize_path = j.at("tokenize_path").get<std::string>();
  }
  return b;
}

}  // namespace

std::shared_ptr<llm::ScriptedBackend> make_scripted(const std::string& name, const BackendConfig& b) {
  try {
    if (b.rules.is_object()) return llm::ScriptedBackend::from_json(b.rules, b.seed);
    return llm::ScriptedBackend::from_json(ordered_json{{"seed", b.seed}, {"rules", b.rules}}, b.seed);
  } catch (const std::exception& e) {
    throw ConfigError("backend '" + name + "': bad script: " + e.what());
  }
}

PipelineConfig config_from_json(const ordered_json& j, const EnvLookup& env, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c = default_config();
  try {
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("backends")) {
      c.backends.clear();
      for (const auto& [name, b] : j.at("backends").items()) c.backends[name] = backend_from_json(name, b, env, c.seed);
    } else if (c.seed) {
      c.backends["mock"].seed = *c.seed;
    }
    if (j.contains("roles")) {
      for (const auto& [name, r] : j.at("roles").items()) {
        if (name == "judge" || name == "judges") {
          const auto bundled = c.judges.front().example;
          c.judges.clear();
          auto add = [&](const ordered_json& e, std::size_t i) {
            JudgeBinding jb;
            jb.role = role_from_json(e, "judge");
            jb.example = bundled;
            jb.name = e.value("name", jb.role.model.empty() ? "judge-" + std::to_string(i) : jb.role.model);
            if (e.contains("example_file"))
              jb.example = read_text(resolve(base_dir, e.at("example_file").get<std::string>()));
            jb.example = e.value("example", jb.example);
            c.judges.push_back(std::move(jb));
          };
          if (r.is_array()) {
            for (std::size_t i = 0; i < r.size(); ++i) add(r[i], i);
          } else {
            add(r, 0);
          }
        } else if (std::find(kRoles.begin(), kRoles.end(), name) != kRoles.end()) {
          c.roles[name] = role_from_json(r, "role '" + name + "'");
        } else {
          throw ConfigError("unknown role '" + name + "'");
        }
      }
    }
    if (j.contains("gateway")) {
      const auto& g = j.at("gateway");
      c.gateway.max_in_flight = g.value("max_in_flight", c.gateway.max_in_flight);
      c.gateway.retry.max_attempts = g.value("max_attempts", c.gateway.retry.max_attempts);
      c.gateway.retry.base_delay = std::chrono::milliseconds(g.value("base_delay_ms", 250));
      c.gateway.retry.max_delay = std::chrono::milliseconds(g.value("max_delay_ms", 8000));
      c.gateway.retry.multiplier = g.value("multiplier", 2.0);
    }
    if (j.contains("filter")) c.filter = corpus::filter_config_from_json(json::parse(j.at("filter").dump()));
    if (j.contains("rollout")) c.rollout = selfplay::rollout_config_from_json(json::parse(j.at("rollout").dump()));
    if (c.seed && !(j.contains("rollout") && j.at("rollout").contains("seed"))) c.rollout.seed = *c.seed;
    c.rollout.agent_model = c.roles.at("agent").model;
    c.rollout.user_model = c.roles.at("user").model;
    c.rollout.selector_model = c.roles.at("selector").model;
    if (j.contains("sampling")) c.sampling = llm::sampling_params_from_json(json::parse(j.at("sampling").dump()));
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      if (p.contains("annotation_example"))
        c.annotation_example = read_text(resolve(base_dir, p.at("annotation_example").get<std::string>()));
      if (p.contains("sessions_dir")) c.sessions_dir = resolve(base_dir, p.at("sessions_dir").get<std::string>());
    }
    if (j.contains("serve")) {
      const auto& s = j.at("serve");
      c.serve.host = s.value("host", c.serve.host);
      c.serve.port = s.value("port", c.serve.port);
      c.serve.bearer_token = s.value("bearer_token", std::string());
    }
    c.parallel = j.value("parallel", c.parallel);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (auto t = env("SAGE_SERVE_TOKEN")) c.serve.bearer_token = *t;
  c.validate();
  for (const auto& [name, b] : c.backends)
    if (b.type == "scripted") make_scripted(name, b);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return config_from_json(j, env, path.parent_path());
}

Backends::Backends(PipelineConfig cfg) : cfg_(std::move(cfg)) {}

llm::Gateway& Backends::backend(const std::string& name) {
  if (auto it = gateways_.find(name); it != gateways_.end()) return *it->second;
  const auto it = cfg_.backends.find(name);
  if (it == cfg_.backends.end()) throw ConfigError("unknown backend '" + name + "'");
  std::shared_ptr<llm::Backend> impl;
  if (it->second.type == "openai") {
    impl = std::make_shared<llm::OpenAIBackend>(it->second.openai);
  } else {
    impl = make_scripted(name, it->second);
  }
  auto& gw = gateways_[name];
  gw = std::make_unique<llm::Gateway>(std::move(impl), cfg_.gateway);
  return *gw;
}

llm::Gateway& Backends::gateway_for(const std::string& role) {
  const auto it = cfg_.roles.find(role);
  if (it == cfg_.roles.end()) throw ConfigError("role '" + role + "' is not bound");
  return backend(it->second.backend);
}

const std::string& Backends::model_for(const std::string& role) const {
  const auto it = cfg_.roles.find(role);
  if (it == cfg_.roles.end()) throw ConfigError("role '" + role + "' is not bound");
  return it->second.model;
}

std::vector<arena::NamedJudge> Backends::judges() {
  std::vector<arena::NamedJudge> out;
  for (const auto& j : cfg_.judges) out.push_back({j.name, {&backend(j.role.backend), j.role.model, j.example}});
  return out;
}

}  // namespace sage::shell
