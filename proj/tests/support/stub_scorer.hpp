#pragma once

#include <functional>
#include <string_view>

#include "sage/corpus/sentiment.hpp"

namespace sage::testing {

class StubScorer final : public corpus::SentimentScorer {
 public:
  explicit StubScorer(std::function<double(std::string_view)> fn) : fn_(std::move(fn)) {}
  explicit StubScorer(double constant) : fn_([constant](std::string_view) { return constant; }) {}
  double score(std::string_view text) const override { return fn_(text); }

 private:
  std::function<double(std::string_view)> fn_;
};

}  // namespace sage::testing
