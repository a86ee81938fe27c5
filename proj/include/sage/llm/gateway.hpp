#pragma once

#include <chrono>
#include <functional>
#include <future>
#include <memory>
#include <semaphore>

#include "sage/llm/backend.hpp"

namespace sage::llm {

struct RetryPolicy {
  int max_attempts = 4;  // total, including the first
  std::chrono::milliseconds base_delay{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{8000};

  std::chrono::milliseconds delay_for(int retry) const;
};

struct GatewayOptions {
  RetryPolicy retry;
  int max_in_flight = 8;
  /// Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Validates requests, bounds concurrency, retries transient failures and
/// guarantees exactly `params.n` choices (or an error).
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend, GatewayOptions opts = {});

  /// backend_meta gains "retry_count" (retries across all backend calls).
  CompletionResult complete(const ChatRequest& req);
  std::future<CompletionResult> submit(ChatRequest req);

  Backend& backend() { return *backend_; }
  const GatewayOptions& options() const { return opts_; }

 private:
  CompletionResult call_with_retry(const ChatRequest& req, int& retries);

  std::shared_ptr<Backend> backend_;
  GatewayOptions opts_;
  std::counting_semaphore<> slots_;
};

}  // namespace sage::llm
