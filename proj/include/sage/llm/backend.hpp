#pragma once

#include <string>

#include "sage/llm/types.hpp"

namespace sage::llm {

/// One model endpoint. Implementations must be safe to call concurrently and
/// report failures as GatewayError.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual CompletionResult complete(const ChatRequest& req) = 0;
  virtual std::string name() const = 0;
};

}  // namespace sage::llm
