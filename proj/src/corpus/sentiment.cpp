#include "sage/corpus/sentiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "sage/common/text.hpp"

#ifndef SAGE_DEFAULT_DATA_DIR
#define SAGE_DEFAULT_DATA_DIR "data"
#endif

namespace sage::corpus {

namespace {

constexpr double kBoostIncr = 0.293;
constexpr double kBoostDecr = -0.293;
constexpr double kCapsIncr = 0.733;
constexpr double kNegScalar = -0.74;

const std::vector<std::string_view> kNegate = {
    "aint",    "arent",   "cannot",   "cant",    "couldnt", "darent",   "didnt",   "doesnt",
    "ain't",   "aren't",  "can't",    "couldn't", "daren't", "didn't",  "doesn't", "dont",
    "hadnt",   "hasnt",   "havent",   "isnt",    "mightnt", "mustnt",   "neither", "don't",
    "hadn't",  "hasn't",  "haven't",  "isn't",   "mightn't", "mustn't", "neednt",  "needn't",
    "never",   "none",    "nope",     "nor",     "not",     "nothing",  "nowhere", "oughtnt",
    "shant",   "shouldnt", "uhuh",    "wasnt",   "werent",  "oughtn't", "shan't",  "shouldn't",
    "uh-uh",   "wasn't",  "weren't",  "without", "wont",    "wouldnt",  "won't",   "wouldn't",
    "rarely",  "seldom",  "despite"};

const std::unordered_map<std::string, double>& booster_dict() {
  static const std::unordered_map<std::string, double> dict = [] {
    std::unordered_map<std::string, double> d;
    for (const char* w :
         {"absolutely", "amazingly", "awfully", "completely", "considerable", "considerably",
          "decidedly", "deeply", "effing", "enormous", "enormously", "entirely", "especially",
          "exceptional", "exceptionally", "extreme", "extremely", "fabulously", "flipping",
          "flippin", "frackin", "fracking", "fricking", "frickin", "frigging", "friggin", "fully",
          "fuckin", "fucking", "fuggin", "fugging", "greatly", "hella", "highly", "hugely",
          "incredible", "incredibly", "intensely", "major", "majorly", "more", "most",
          "particularly", "purely", "quite", "really", "remarkably", "so", "substantially",
          "thoroughly", "total", "totally", "tremendous", "tremendously", "uber", "unbelievably",
          "unusually", "utter", "utterly", "very"})
      d.emplace(w, kBoostIncr);
    for (const char* w :
         {"almost", "barely", "hardly", "just enough", "kind of", "kinda", "kindof", "kind-of",
          "less", "little", "marginal", "marginally", "occasional", "occasionally", "partly",
          "scarce", "scarcely", "slight", "slightly", "somewhat", "sort of", "sorta", "sortof",
          "sort-of"})
      d.emplace(w, kBoostDecr);
    return d;
  }();
  return dict;
}

const std::unordered_map<std::string, double>& special_cases() {
  static const std::unordered_map<std::string, double> d = {
      {"the shit", 3},       {"the bomb", 3},     {"bad ass", 1.5},
      {"badass", 1.5},       {"bus stop", 0.0},   {"yeah right", -2},
      {"kiss of death", -1.5}, {"to die for", 3}, {"beating heart", 3.5}};
  return d;
}

constexpr std::string_view kPunctuation = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~";

std::size_t codepoint_count(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

// Python str.isupper() restricted to ASCII letters.
bool is_upper(std::string_view s) {
  bool has_upper = false;
  for (char c : s) {
    if (c >= 'a' && c <= 'z') return false;
    if (c >= 'A' && c <= 'Z') has_upper = true;
  }
  return has_upper;
}

std::string strip_punc_if_word(std::string_view token) {
  auto first = token.find_first_not_of(kPunctuation);
  if (first == std::string_view::npos) return std::string(token);
  auto last = token.find_last_not_of(kPunctuation);
  auto stripped = token.substr(first, last - first + 1);
  if (codepoint_count(stripped) <= 2) return std::string(token);
  return std::string(stripped);
}

bool negated_word(std::string_view lower_word) {
  if (std::find(kNegate.begin(), kNegate.end(), lower_word) != kNegate.end()) return true;
  return lower_word.find("n't") != std::string_view::npos;
}

double normalize(double score, double alpha = 15.0) {
  double n = score / std::sqrt(score * score + alpha);
  return std::clamp(n, -1.0, 1.0);
}

double scalar_inc_dec(const std::string& word, const std::string& lower, double valence,
                      bool is_cap_diff) {
  double scalar = 0.0;
  const auto& boosters = booster_dict();
  if (auto it = boosters.find(lower); it != boosters.end()) {
    scalar = it->second;
    if (valence < 0) scalar *= -1;
    if (is_upper(word) && is_cap_diff) scalar += valence > 0 ? kCapsIncr : -kCapsIncr;
  }
  return scalar;
}

// Splits UTF-8 into code points (invalid bytes pass through singly).
std::vector<std::string_view> codepoints(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + len > s.size()) len = 1;
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

struct Tokens {
  std::vector<std::string> words;
  std::vector<std::string> lower;
  bool is_cap_diff = false;
};

Tokens tokenize(std::string_view text) {
  Tokens t;
  for (auto w : text::split_whitespace(text)) {
    t.words.push_back(strip_punc_if_word(w));
    t.lower.push_back(text::to_lower_ascii(t.words.back()));
  }
  std::size_t allcaps = 0;
  for (const auto& w : t.words)
    if (is_upper(w)) ++allcaps;
  const std::size_t diff = t.words.size() - allcaps;
  t.is_cap_diff = diff > 0 && diff < t.words.size();
  return t;
}

}  // namespace

VaderScorer::VaderScorer(const std::filesystem::path& data_dir) {
  std::ifstream lex(data_dir / "vader_lexicon.txt");
  if (!lex) throw std::runtime_error("missing sentiment lexicon in " + data_dir.string());
  std::string line;
  while (std::getline(lex, line)) {
    auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    auto tab = trimmed.find('\t');
    if (tab == std::string_view::npos) continue;
    auto rest = trimmed.substr(tab + 1);
    auto tab2 = rest.find('\t');
    lexicon_[std::string(trimmed.substr(0, tab))] = std::stod(std::string(rest.substr(0, tab2)));
  }
  std::ifstream emo(data_dir / "emoji_utf8_lexicon.txt");
  if (!emo) throw std::runtime_error("missing emoji lexicon in " + data_dir.string());
  while (std::getline(emo, line)) {
    auto trimmed = text::trim(line);
    auto tab = trimmed.find('\t');
    if (tab == std::string_view::npos) continue;
    auto rest = trimmed.substr(tab + 1);
    emojis_[std::string(trimmed.substr(0, tab))] = std::string(rest.substr(0, rest.find('\t')));
  }
}

double VaderScorer::score(std::string_view raw) const {
  // Replace single-codepoint emoji with their textual description.
  std::string no_emoji;
  bool prev_space = true;
  for (auto cp : codepoints(raw)) {
    if (auto it = emojis_.find(std::string(cp)); it != emojis_.end()) {
      if (!prev_space) no_emoji += ' ';
      no_emoji += it->second;
      prev_space = false;
    } else {
      no_emoji += cp;
      prev_space = cp == " ";
    }
  }
  const std::string_view text = text::trim(no_emoji);
  const Tokens tok = tokenize(text);
  const auto& words = tok.words;
  const auto& lw = tok.lower;
  const auto& boosters = booster_dict();
  const auto in_lexicon = [&](const std::string& w) { return lexicon_.count(w) > 0; };

  std::vector<double> sentiments;
  sentiments.reserve(words.size());
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (boosters.count(lw[i]) ||
        (i + 1 < words.size() && lw[i] == "kind" && lw[i + 1] == "of")) {
      sentiments.push_back(0.0);
      continue;
    }
    double valence = 0.0;
    if (auto it = lexicon_.find(lw[i]); it != lexicon_.end()) {
      valence = it->second;
      if (lw[i] == "no" && i != words.size() - 1 && in_lexicon(lw[i + 1])) valence = 0.0;
      if ((i > 0 && lw[i - 1] == "no") || (i > 1 && lw[i - 2] == "no") ||
          (i > 2 && lw[i - 3] == "no" && (lw[i - 1] == "or" || lw[i - 1] == "nor")))
        valence = it->second * kNegScalar;
      if (is_upper(words[i]) && tok.is_cap_diff) valence += valence > 0 ? kCapsIncr : -kCapsIncr;

      for (std::size_t start = 0; start < 3; ++start) {
        if (i > start && !in_lexicon(lw[i - (start + 1)])) {
          double s = scalar_inc_dec(words[i - (start + 1)], lw[i - (start + 1)], valence, tok.is_cap_diff);
          if (start == 1 && s != 0) s *= 0.95;
          if (start == 2 && s != 0) s *= 0.9;
          valence += s;

          // negation check
          if (start == 0) {
            if (negated_word(lw[i - 1])) valence *= kNegScalar;
          } else if (start == 1) {
            if (lw[i - 2] == "never" && (lw[i - 1] == "so" || lw[i - 1] == "this")) {
              valence *= 1.25;
            } else if (lw[i - 2] == "without" && lw[i - 1] == "doubt") {
            } else if (negated_word(lw[i - 2])) {
              valence *= kNegScalar;
            }
          } else {
            // Operator precedence mirrors the reference: (never && so/this) || so/this.
            if ((lw[i - 3] == "never" && (lw[i - 2] == "so" || lw[i - 2] == "this")) ||
                (lw[i - 1] == "so" || lw[i - 1] == "this")) {
              valence *= 1.25;
            } else if (lw[i - 3] == "without" && (lw[i - 2] == "doubt" || lw[i - 1] == "doubt")) {
            } else if (negated_word(lw[i - 3])) {
              valence *= kNegScalar;
            }

            // special idioms
            const auto& sc = special_cases();
            const std::array<std::string, 5> seqs = {
                lw[i - 1] + " " + lw[i], lw[i - 2] + " " + lw[i - 1] + " " + lw[i],
                lw[i - 2] + " " + lw[i - 1], lw[i - 3] + " " + lw[i - 2] + " " + lw[i - 1],
                lw[i - 3] + " " + lw[i - 2]};
            for (const auto& seq : seqs) {
              if (auto f = sc.find(seq); f != sc.end()) {
                valence = f->second;
                break;
              }
            }
            if (words.size() - 1 > i) {
              if (auto f = sc.find(lw[i] + " " + lw[i + 1]); f != sc.end()) valence = f->second;
            }
            if (words.size() - 1 > i + 1) {
              if (auto f = sc.find(lw[i] + " " + lw[i + 1] + " " + lw[i + 2]); f != sc.end())
                valence = f->second;
            }
            for (const auto* ngram : {&seqs[3], &seqs[4], &seqs[2]}) {
              if (auto b = boosters.find(*ngram); b != boosters.end()) valence += b->second;
            }
          }
        }
      }

      // "least" check
      if (i > 1 && !in_lexicon(lw[i - 1]) && lw[i - 1] == "least") {
        if (lw[i - 2] != "at" && lw[i - 2] != "very") valence *= kNegScalar;
      } else if (i > 0 && !in_lexicon(lw[i - 1]) && lw[i - 1] == "least") {
        valence *= kNegScalar;
      }
    }
    sentiments.push_back(valence);
  }

  // Contrastive "but": dampen before, amplify after. The value lookup uses the
  // first equal element, as the reference does.
  if (auto bit = std::find(lw.begin(), lw.end(), "but"); bit != lw.end()) {
    const auto bi = static_cast<std::size_t>(bit - lw.begin());
    for (std::size_t p = 0; p < sentiments.size(); ++p) {
      const double v = sentiments[p];
      const auto si = static_cast<std::size_t>(
          std::find(sentiments.begin(), sentiments.end(), v) - sentiments.begin());
      if (si < bi) sentiments[si] = v * 0.5;
      else if (si > bi) sentiments[si] = v * 1.5;
    }
  }

  if (sentiments.empty()) return 0.0;
  double sum = 0.0;
  for (double s : sentiments) sum += s;
  const auto exclaim = std::min<std::size_t>(std::count(text.begin(), text.end(), '!'), 4);
  const auto questions = static_cast<std::size_t>(std::count(text.begin(), text.end(), '?'));
  double amplifier = static_cast<double>(exclaim) * 0.292;
  if (questions > 1) amplifier += questions <= 3 ? static_cast<double>(questions) * 0.18 : 0.96;
  if (sum > 0) sum += amplifier;
  else if (sum < 0) sum -= amplifier;
  return normalize(sum);
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("SAGE_DATA_DIR"); env && *env) return env;
  return SAGE_DEFAULT_DATA_DIR;
}

const SentimentScorer& default_scorer() {
  static const VaderScorer scorer(default_data_dir() / "vader");
  return scorer;
}

double sentiment_score(std::string_view text) { return default_scorer().score(text); }

}  // namespace sage::corpus
