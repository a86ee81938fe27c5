#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <regex>

#include "sage/llm/backend.hpp"

namespace sage::llm {

/// Matches the last message (or, for assistant-prefix continuations, the
/// message before it). `match` is "*" for anything, "re:<pattern>" for a
/// case-insensitive regex search, otherwise a plain substring.
struct ScriptRule {
  std::string match;
  std::vector<std::string> responses;
};

/// Deterministic offline backend.
///
/// Handlers run first, then rules in order; a matching rule hands out its
/// responses in script order (one per choice, cycling). Anything unmatched
/// is answered from a seeded template pool whose output depends only on the
/// backend seed, the request and the choice index, so it is independent of
/// call order and concurrency.
class ScriptedBackend : public Backend {
 public:
  using Handler = std::function<std::optional<std::string>(const ChatRequest&, std::size_t choice)>;

  explicit ScriptedBackend(std::uint64_t seed = 0, std::vector<ScriptRule> rules = {});

  /// Accepts {"seed": n, "rules": [{"match", "responses"}]} or a bare
  /// {match: [responses]} object; rule priority follows key order.
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::ordered_json& j, std::uint64_t seed = 0);

  void add_rule(ScriptRule rule);
  void add_handler(Handler h);

  CompletionResult complete(const ChatRequest& req) override;
  std::string name() const override { return "scripted"; }

  std::size_t calls() const;

 private:
  struct CompiledRule {
    ScriptRule rule;
    std::optional<std::regex> re;
    std::size_t cursor = 0;
  };

  std::string pool_choice(const ChatRequest& req, std::uint64_t req_hash, std::size_t choice) const;

  std::uint64_t seed_;
  mutable std::mutex mu_;
  std::vector<CompiledRule> rules_;
  std::vector<Handler> handlers_;
  std::size_t calls_ = 0;
};

/// Applies stop sequences the way chat-completions servers do: output ends
/// before the earliest stop string.
std::string truncate_at_stop(std::string text, const std::vector<std::string>& stops);

/// For assistant-prefix continuations: the part of `full` that follows
/// `prefix`, or the part after the action block when `full` diverges.
std::string continuation_of(const std::string& full, const std::string& prefix);

}  // namespace sage::llm
