#include <catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "sage/common/random.hpp"
#include "sage/corpus/filter.hpp"
#include "sage/corpus/seeds.hpp"
#include "sage/corpus/sentiment.hpp"
#include "support/stub_scorer.hpp"

using namespace sage;
using namespace sage::corpus;
using Catch::Matchers::WithinAbs;

namespace {

// Compound scores produced by tests/oracles/vader_oracle.py against the
// upstream vaderSentiment 3.3.2 package with rounding disabled.
struct OracleRow {
  const char* text;
  double compound;
};
const OracleRow kVaderOracle[] = {
    {"", 0},
    {"I love this wonderful sunny day!", 0.91298932834761026},
    {"This is terrible and I hate it.", -0.77825332215062593},
    {"VADER is smart, handsome, and funny.", 0.83163203528078644},
    {"VADER is VERY SMART, uber handsome, and FRIGGIN FUNNY!!!", 0.94693835213854805},
    {"VADER is not smart, handsome, nor funny.", -0.74241763237326863},
    {"At least it isn't a horrible book.", 0.43102002306105164},
    {"The book was only kind of good.", 0.38324473176419577},
    {"The plot was good, but the characters are uncompelling and the dialog is not great.", -0.70416895659943024},
    {"Today only kinda sux! But I'll get by, lol", 0.52491422086422646},
    {"Make sure you :) or :D today!", 0.86330210702367083},
    {"Catch utf-8 emoji such as \U0001F498 and \U0001F48B and \U0001F601", 0.875},
    {"Not bad at all", 0.43102002306105164},
    {"Sentiment analysis has never been this good!", 0.56715305103783986},
    {"With VADER, sentiment analysis is the shit!", 0.64764432618530288},
    {"On the other hand, VADER is quite bad ass", 0.80199560801832637},
    {"Without a doubt, excellent idea.", 0.70128651692614574},
    {"Roger Dodger is one of the least compelling variations on this theme.", -0.16947302270321746},
    {"Roger Dodger is at least compelling as a variation on the theme.", 0.22634795467253557},
    {"No problem, happy to help??", 0.32260052838988218},
    {"Really?", 0},
    {"That sounds great, I am so happy for you! What are you going to do next?", 0.87881997464752082},
    {"My friend got tickets to the Superbowl and not me.", 0.49391458057363097},
    {"good good good but bad bad", -0.76838514303443128},
};

std::string words(int n, const std::string& w = "lovely") {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + w;
  return s;
}

Dialogue make_dialogue(std::vector<std::string> texts, std::string id = "d") {
  Dialogue d;
  d.id = std::move(id);
  for (std::size_t i = 0; i < texts.size(); ++i)
    d.turns.push_back({i % 2 == 0 ? Speaker::user : Speaker::system, std::move(texts[i])});
  return d;
}

std::string to_jsonl(const std::vector<Dialogue>& ds) {
  std::string out;
  for (const auto& d : ds) out += to_json(d).dump() + "\n";
  return out;
}

}  // namespace

TEST_CASE("sentiment_score matches the reference lexicon scorer", "[corpus][sentiment]") {
  for (const auto& row : kVaderOracle) {
    INFO(row.text);
    CHECK_THAT(sentiment_score(row.text), WithinAbs(row.compound, 1e-12));
  }
}

TEST_CASE("sentiment_score edge cases", "[corpus][sentiment]") {
  CHECK(sentiment_score("") == 0.0);
  CHECK(sentiment_score("   ") == 0.0);
  CHECK(sentiment_score("I love this wonderful sunny day!") > 0.4);
  CHECK(sentiment_score("This is terrible and I hate it.") < 0.0);
  const std::string s = "What a fantastic, thoughtful gift. Thank you so much!";
  const double first = sentiment_score(s);
  for (int i = 0; i < 5; ++i) CHECK(sentiment_score(s) == first);
  CHECK(sentiment_score(s) >= -1.0);
  CHECK(sentiment_score(s) <= 1.0);
}

TEST_CASE("filter_dialogue applies strict thresholds", "[corpus][filter]") {
  const testing::StubScorer positive(0.9);
  FilterConfig cfg;

  SECTION("four turns is not more than four") {
    auto d = make_dialogue({words(20) + "?", words(20), words(20), words(20)});
    auto dec = filter_dialogue(d, cfg, positive);
    CHECK_FALSE(dec.passed);
    CHECK(dec.failed_rules == std::vector{FilterRule::turns});
  }
  SECTION("five well-formed turns pass") {
    auto d = make_dialogue({words(24), words(20), "Really?", words(28), words(27)});
    auto dec = filter_dialogue(d, cfg, positive);
    CHECK(dec.passed);
    CHECK(dec.failed_rules.empty());
  }
  SECTION("no question mark anywhere") {
    auto d = make_dialogue({words(20), words(20), words(20), words(20), words(20), words(20)});
    auto dec = filter_dialogue(d, cfg, positive);
    CHECK_FALSE(dec.passed);
    CHECK(dec.failed_rules == std::vector{FilterRule::question});
  }
  SECTION("average length must exceed the threshold") {
    auto d = make_dialogue({words(15) + "?", words(15), words(15), words(15), words(15)});
    CHECK(filter_dialogue(d, cfg, positive).failed_rules == std::vector{FilterRule::avg_length});
  }
  SECTION("a single utterance at the sentiment threshold fails") {
    const testing::StubScorer edge([](std::string_view t) { return t.find("meh") != std::string_view::npos ? 0.4 : 0.9; });
    auto d = make_dialogue({words(20) + "?", words(20), words(19) + " meh", words(20), words(20)});
    CHECK(filter_dialogue(d, cfg, edge).failed_rules == std::vector{FilterRule::sentiment});
  }
  SECTION("question mark must be the final character after trimming") {
    auto d = make_dialogue({words(20) + "?  \n", words(20), words(20), words(20), words(20)});
    CHECK(filter_dialogue(d, cfg, positive).passed);
    auto e = make_dialogue({"is it? " + words(20), words(20), words(20), words(20), words(20)});
    CHECK(filter_dialogue(e, cfg, positive).failed_rules == std::vector{FilterRule::question});
  }
  SECTION("real scorer on an upbeat dialogue") {
    auto d = make_dialogue({
        "I just got accepted into the graduate program I wanted so badly and I am thrilled, happy and grateful beyond words!",
        "That is wonderful news, congratulations! You worked so hard and you truly deserve this amazing success and joy.",
        "Thank you so much, it really means a lot to me and my family, we are all so proud and excited together.",
        "What a lovely celebration that must be, I love hearing about such happy moments, what will you study there?",
        "I will study marine biology, my dream since childhood, and I am excited to learn and grow with great people.",
    });
    CHECK(filter_dialogue(d, cfg).passed);
  }
}

TEST_CASE("filter_dialogue properties", "[corpus][filter][property]") {
  Rng rng(20240601);
  const testing::StubScorer hashed([](std::string_view t) {
    return static_cast<double>(fnv1a(t) % 1999 + 1) / 1000.0 - 1.0;
  });
  const std::vector<std::string> vocab = {"sun", "happy", "ok", "dog", "why", "great", "fine", "yes"};
  for (int iter = 0; iter < 500; ++iter) {
    const auto n = 1 + rng.below(9);
    std::vector<std::string> texts;
    for (std::size_t i = 0; i < n; ++i) {
      std::string t;
      const auto len = 1 + rng.below(30);
      for (std::size_t w = 0; w < len; ++w) t += (w ? " " : "") + rng.pick(vocab);
      if (rng.below(4) == 0) t += "?";
      texts.push_back(t);
    }
    auto d = make_dialogue(texts);

    FilterConfig base;
    base.min_turns_exclusive = static_cast<int>(rng.below(8));
    base.min_avg_words = static_cast<double>(rng.below(25));
    base.min_sentiment = rng.unit() * 2.0 - 1.0;
    base.require_question = rng.below(2) == 0;

    FilterConfig raised = base;
    raised.min_turns_exclusive += static_cast<int>(rng.below(3));
    raised.min_avg_words += rng.unit() * 5.0;
    raised.min_sentiment = std::min(1.0, raised.min_sentiment + rng.unit() * 0.5);
    raised.require_question = base.require_question || rng.below(2) == 0;

    const auto before = filter_dialogue(d, base, hashed);
    const auto after = filter_dialogue(d, raised, hashed);
    if (!before.passed) CHECK_FALSE(after.passed);
    CHECK(before.passed == before.failed_rules.empty());

    FilterConfig minimal{0, 0.0, -1.0, false};
    CHECK(filter_dialogue(d, minimal, hashed).passed);
  }
}

TEST_CASE("filter_corpus streams and counts", "[corpus][filter]") {
  const testing::StubScorer scorer([](std::string_view t) { return t.find("grim") != std::string_view::npos ? -0.5 : 0.9; });
  FilterConfig cfg;

  SECTION("empty input") {
    std::istringstream in("");
    std::size_t emitted = 0;
    auto stats = filter_corpus(in, cfg, [&](const Dialogue&) { ++emitted; }, scorer);
    CHECK(stats.seen == 0);
    CHECK(stats.passed == 0);
    CHECK(emitted == 0);
  }

  SECTION("ten hand-built dialogues, three pass") {
    const auto ok = words(20);
    std::vector<Dialogue> ds = {
        make_dialogue({ok + "?", ok, ok, ok, ok}, "pass-1"),                  // pass
        make_dialogue({ok + "?", ok, ok, ok}, "short"),                       // turns
        make_dialogue({ok, ok, ok, ok, ok}, "no-question"),                   // question
        make_dialogue({words(3) + "?", words(3), ok, ok, ok}, "terse"),       // avg_length (mean 13.2)
        make_dialogue({ok + "?", ok, "grim " + ok, ok, ok}, "gloomy"),        // sentiment
        make_dialogue({ok, ok, ok, ok, ok, ok, "so?"}, "pass-2"),             // pass (mean 17.3)
        make_dialogue({"grim?", "grim"}, "everything-wrong"),                 // turns, avg, sentiment
        make_dialogue({ok, ok, ok, ok, ok, ok, ok + " right?"}, "pass-3"),    // pass
        make_dialogue({ok + "?", ok, ok, "hm", "hm", "hm"}, "thin"),          // avg_length (mean 10.5)
        make_dialogue({ok, ok, ok, ok, ok, "grim"}, "grim-no-q"),             // sentiment, question
    };
    std::istringstream in(to_jsonl(ds));
    std::vector<std::string> kept;
    auto stats = filter_corpus(in, cfg, [&](const Dialogue& d) { kept.push_back(d.id); }, scorer);
    CHECK(stats.seen == 10);
    CHECK(stats.passed == 3);
    CHECK(stats.failed == 7);
    CHECK(stats.corrupt == 0);
    CHECK(kept == std::vector<std::string>{"pass-1", "pass-2", "pass-3"});
    CHECK(stats.failures_for(FilterRule::turns) == 2);
    CHECK(stats.failures_for(FilterRule::avg_length) == 3);
    CHECK(stats.failures_for(FilterRule::sentiment) == 3);
    CHECK(stats.failures_for(FilterRule::question) == 2);
    CHECK(stats.passed + stats.failed == stats.seen - stats.corrupt);
  }

  SECTION("corrupt records are skipped") {
    const auto ok = words(20);
    std::string jsonl = to_jsonl({make_dialogue({ok + "?", ok, ok, ok, ok}, "a")});
    jsonl += "{not json\n";
    jsonl += R"({"id":"bad","turns":[{"speaker":"system","text":"starts wrong"}]})" "\n";
    jsonl += to_jsonl({make_dialogue({ok + "?", ok, ok, ok, ok}, "b")});
    std::istringstream in(jsonl);
    std::size_t emitted = 0;
    auto stats = filter_corpus(in, cfg, [&](const Dialogue&) { ++emitted; }, scorer);
    CHECK(stats.seen == 4);
    CHECK(stats.corrupt == 2);
    CHECK(stats.passed == 2);
    CHECK(emitted == 2);
    CHECK(stats.passed + stats.failed == stats.seen - stats.corrupt);
  }
}

TEST_CASE("load_seed_situations", "[corpus][seeds]") {
  SECTION("small fixture") {
    auto seeds = load_seed_situations(std::filesystem::path(SAGE_FIXTURE_DIR) / "seeds_small.csv");
    REQUIRE(seeds.size() == 3);
    CHECK(seeds[0].statement == "My friend got tickets to the Superbowl and not me.");
    CHECK(seeds[0].sentiment_label == "jealous");
    CHECK(seeds[1].statement == "I finally finished my first marathon, and my legs are still shaking!");
  }
  SECTION("test-split sized file") {
    std::ostringstream csv;
    csv << "sentiment,situation,extra\n";
    for (int i = 0; i < 2547; ++i) csv << "label" << i % 32 << ",\"Situation number " << i << ", told plainly\",x\n";
    csv << "label0,\"Situation number 0, told plainly\",dup\n";
    std::istringstream in(csv.str());
    CHECK(load_seed_situations(in).size() == 2547);
  }
  SECTION("dataset export aliases") {
    std::istringstream in("conv_id,utterance_idx,context,prompt\nhit:0,1,jealous,My friend got tickets_comma_ not me.\n");
    auto seeds = load_seed_situations(in);
    REQUIRE(seeds.size() == 1);
    CHECK(seeds[0].statement == "My friend got tickets, not me.");
    CHECK(seeds[0].sentiment_label == "jealous");
  }
  SECTION("missing column names the column") {
    std::istringstream in("situation,label\nhello,happy\n");
    try {
      load_seed_situations(in);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.column() == "sentiment");
      CHECK(std::string(e.what()).find("sentiment") != std::string::npos);
    }
  }
}
