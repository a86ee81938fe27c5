#include "sage/llm/gateway.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <thread>

#include "sage/common/random.hpp"

namespace sage::llm {

std::chrono::milliseconds RetryPolicy::delay_for(int retry) const {
  const double ms = static_cast<double>(base_delay.count()) * std::pow(multiplier, retry);
  return std::min(max_delay, std::chrono::milliseconds(static_cast<long long>(ms)));
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions opts)
    : backend_(std::move(backend)), opts_(std::move(opts)), slots_(std::max(1, opts_.max_in_flight)) {
  if (!backend_) throw std::invalid_argument("gateway needs a backend");
  if (opts_.retry.max_attempts < 1) throw std::invalid_argument("retry.max_attempts must be >= 1");
  if (!opts_.sleep) opts_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

CompletionResult Gateway::call_with_retry(const ChatRequest& req, int& retries) {
  for (int attempt = 1;; ++attempt) {
    try {
      slots_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{slots_};
      return backend_->complete(req);
    } catch (const GatewayError& e) {
      if (!e.retryable() || attempt >= opts_.retry.max_attempts) throw;
      const auto delay = opts_.retry.delay_for(attempt - 1);
      spdlog::warn("{}: {} ({}), retry {} in {} ms", backend_->name(), to_string(e.kind()), e.what(), attempt,
                   delay.count());
      ++retries;
      opts_.sleep(delay);
    }
  }
}

CompletionResult Gateway::complete(const ChatRequest& req) {
  req.validate();
  int retries = 0;
  auto result = call_with_retry(req, retries);
  const auto want = static_cast<std::size_t>(req.params.n);

  // Some servers cap or ignore n; top up with follow-up requests.
  for (int round = 1; result.choices.size() < want; ++round) {
    auto more = req;
    more.params.n = static_cast<int>(want - result.choices.size());
    if (req.params.seed) more.params.seed = derive_seed(*req.params.seed, static_cast<std::uint64_t>(round));
    auto extra = call_with_retry(more, retries);
    if (extra.choices.empty()) {
      throw GatewayError(ErrorKind::malformed_response, "backend returned " + std::to_string(result.choices.size()) +
                                                            " of " + std::to_string(want) + " choices");
    }
    for (auto& c : extra.choices) result.choices.push_back(std::move(c));
    result.usage.prompt_tokens += extra.usage.prompt_tokens;
    result.usage.completion_tokens += extra.usage.completion_tokens;
  }
  result.choices.resize(want);
  result.backend_meta["retry_count"] = retries;
  return result;
}

std::future<CompletionResult> Gateway::submit(ChatRequest req) {
  return std::async(std::launch::async, [this, req = std::move(req)] { return complete(req); });
}

}  // namespace sage::llm
