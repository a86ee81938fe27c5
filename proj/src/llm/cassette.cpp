#include "sage/llm/cassette.hpp"

#include "sage/common/jsonl.hpp"

namespace sage::llm {

using nlohmann::json;

namespace {

ErrorKind error_kind_from_string(std::string_view s) {
  for (auto k : {ErrorKind::timeout, ErrorKind::rate_limited, ErrorKind::server, ErrorKind::transport,
                 ErrorKind::client, ErrorKind::malformed_response, ErrorKind::replay_miss})
    if (to_string(k) == s) return k;
  return ErrorKind::malformed_response;
}

}  // namespace

std::vector<CassetteEntry> read_cassette(const std::filesystem::path& path) {
  std::vector<CassetteEntry> out;
  auto stats = jsonl::read_file(path, [&](const json& j) {
    CassetteEntry e;
    e.request = chat_request_from_json(j.at("request"));
    if (j.contains("response")) e.response = completion_result_from_json(j.at("response"));
    else e.error = j.at("error");
    out.push_back(std::move(e));
  });
  if (stats.corrupt) {
    throw std::runtime_error(path.string() + ": " + std::to_string(stats.corrupt) + " corrupt cassette lines");
  }
  return out;
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, const std::filesystem::path& path)
    : inner_(std::move(inner)) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw std::runtime_error("cannot open cassette " + path.string());
}

void RecordingBackend::append(const json& line) {
  std::lock_guard lock(mu_);
  out_ << jsonl::dump_line(line) << '\n';
  out_.flush();
}

CompletionResult RecordingBackend::complete(const ChatRequest& req) {
  try {
    auto res = inner_->complete(req);
    append({{"request", to_json(req)}, {"response", to_json(res)}});
    return res;
  } catch (const GatewayError& e) {
    append({{"request", to_json(req)},
            {"error", {{"kind", to_string(e.kind())}, {"message", e.what()}, {"status", e.status()}}}});
    throw;
  }
}

ReplayBackend::ReplayBackend(const std::filesystem::path& path) {
  for (auto& e : read_cassette(path)) {
    const auto key = fingerprint(e.request);
    entries_[key].push_back(std::move(e));
  }
}

CompletionResult ReplayBackend::complete(const ChatRequest& req) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(fingerprint(req));
  if (it == entries_.end() || it->second.empty()) {
    throw GatewayError(ErrorKind::replay_miss, "no recorded response for request");
  }
  auto e = std::move(it->second.front());
  it->second.pop_front();
  if (e.response) return *e.response;
  throw GatewayError(error_kind_from_string(e.error.value("kind", "")), e.error.value("message", "recorded error"),
                     e.error.value("status", 0));
}

}  // namespace sage::llm
