#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <vector>

#include "sage/common/random.hpp"
#include "sage/sac/types.hpp"

namespace sage::testing {

/// Random SAC content covering nulls, unicode, grammar metacharacters and
/// awkward whitespace.
class SacGenerator {
 public:
  explicit SacGenerator(std::uint64_t seed) : rng_(seed) {}

  std::string fragment() {
    static const std::vector<std::string> pieces = {
        "hello", "world", "caf\xC3\xA9", "\xE6\x97\xA5\xE6\x9C\xAC\xE8\xAA\x9E", "\xF0\x9F\x98\x80",
        ";", "]", "[", ",", "\\", ":", "null", "[u_state]", "[/a_action]", "<user>", "<system>",
        " ", "  ", "\t", "\n", "\r\n", "a\\nb", "\"quoted\"", "x", "Nothing", "emoji\xF0\x9F\x8E\x89",
        "-", "!", "?", "seeking sympathy", "optimism"};
    return rng_.pick(pieces);
  }

  std::string text(std::size_t max_pieces = 6) {
    std::string s;
    const auto n = rng_.below(max_pieces + 1);
    for (std::size_t i = 0; i < n; ++i) s += fragment();
    return s;
  }

  std::string nonblank_text() {
    std::string s;
    do {
      s = text();
    } while (trimmed_empty(s));
    return s;
  }

  std::optional<std::string> value() {
    switch (rng_.below(5)) {
      case 0: return std::nullopt;
      case 1: return std::string("null");
      case 2: return std::string();
      default: return text();
    }
  }

  std::vector<std::string> topics() {
    std::vector<std::string> out;
    const auto n = rng_.below(4);
    for (std::size_t i = 0; i < n; ++i) {
      auto t = nonblank_text();
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    }
    return out;
  }

  template <typename BlockT>
  BlockT block() {
    BlockT b;
    b.motivation = value();
    b.emotion = value();
    b.topics = topics();
    return b;
  }

  sac::SacSystemTurn system_turn() {
    return {block<sac::StateAssessment>(), block<sac::DialogAction>(), text()};
  }

  sac::SacDialogue dialogue(std::size_t max_exchanges = 12) {
    sac::SacDialogue d;
    const auto n = rng_.below(max_exchanges + 1);
    for (std::size_t i = 0; i < n; ++i) d.exchanges.push_back({nonblank_text(), system_turn()});
    return d;
  }

  Rng& rng() { return rng_; }

 private:
  static bool trimmed_empty(const std::string& s) {
    for (char c : s)
      if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
  }

  Rng rng_;
};

}  // namespace sage::testing
