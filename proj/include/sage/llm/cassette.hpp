#pragma once

#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include "sage/llm/backend.hpp"

namespace sage::llm {

/// One line of a cassette file: the request and either its response or the
/// error it raised.
struct CassetteEntry {
  ChatRequest request;
  std::optional<CompletionResult> response;
  nlohmann::json error;  // {"kind","message"} when response is empty
};

std::vector<CassetteEntry> read_cassette(const std::filesystem::path& path);

/// Forwards to `inner` and appends every exchange to a JSONL cassette.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& path);

  CompletionResult complete(const ChatRequest& req) override;
  std::string name() const override { return inner_->name(); }

 private:
  void append(const nlohmann::json& line);

  std::shared_ptr<Backend> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

/// Serves responses from a cassette. Requests are matched by fingerprint;
/// repeated identical requests are answered in recorded order.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::filesystem::path& path);

  CompletionResult complete(const ChatRequest& req) override;
  std::string name() const override { return "replay"; }

 private:
  std::mutex mu_;
  std::map<std::uint64_t, std::deque<CassetteEntry>> entries_;
};

}  // namespace sage::llm
