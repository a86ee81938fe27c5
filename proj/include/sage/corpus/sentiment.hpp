#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

namespace sage::corpus {

/// Polarity scorer returning a compound score in [-1, 1].
class SentimentScorer {
 public:
  virtual ~SentimentScorer() = default;
  virtual double score(std::string_view text) const = 0;
};

/// Rule-based lexicon scorer (VADER). Behaviour follows the reference
/// vaderSentiment 3.3.2 implementation rule for rule, including its
/// contrastive-"but" and idiom handling; the compound score is returned
/// without the reference's 4-decimal rounding.
class VaderScorer final : public SentimentScorer {
 public:
  /// Loads `vader_lexicon.txt` and `emoji_utf8_lexicon.txt` from `data_dir`.
  explicit VaderScorer(const std::filesystem::path& data_dir);

  double score(std::string_view text) const override;

  std::size_t lexicon_size() const { return lexicon_.size(); }

 private:
  std::unordered_map<std::string, double> lexicon_;
  std::unordered_map<std::string, std::string> emojis_;
};

/// Bundled data directory: $SAGE_DATA_DIR if set, otherwise the build-time default.
std::filesystem::path default_data_dir();

/// Process-wide scorer over the bundled lexicon, loaded on first use.
const SentimentScorer& default_scorer();

/// Compound polarity of `text` under the default scorer. Empty text scores 0.
double sentiment_score(std::string_view text);

}  // namespace sage::corpus
