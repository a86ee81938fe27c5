#include "sage/llm/scripted.hpp"

#include <cmath>
#include <set>

#include "sage/common/random.hpp"
#include "sage/common/text.hpp"
#include "sage/sac/grammar.hpp"

namespace sage::llm {

using nlohmann::json;

namespace {

const std::vector<std::string> kUserMotivations = {
    "seeking sympathy", "sharing news", "seeking advice", "venting", "curiosity",
    "small talk", "sharing memories", "seeking reassurance"};
const std::vector<std::string> kUserEmotions = {"sad", "anxious", "excited", "lonely",
                                                "proud", "nostalgic", "frustrated", "hopeful"};
const std::vector<std::string> kTopics = {"work", "family", "pets", "travel", "music", "health",
                                          "school", "friends", "food", "the future", "sports"};
const std::vector<std::string> kActionMotivations = {"agreement", "sympathy", "reassurance", "humor",
                                                     "curiosity", "suggestion", "sharing joy", "encouragement"};
const std::vector<std::string> kActionEmotions = {"supportive", "caring", "playful", "optimism",
                                                  "warm", "calm", "excited", "empathetic"};

const std::vector<std::string> kOpeners = {
    "I hear you.", "That sounds tough.", "Oh wow!", "Ha, I love that.", "That makes sense.",
    "I'm sorry to hear that.", "Honestly, same.", "That's a big deal.", "Aw, that's sweet.", "No way!"};
const std::vector<std::string> kMiddles = {
    "It takes courage to talk about {t}.", "{T} can be a lot sometimes.",
    "I'd probably feel the same about {t}.", "Sounds like {t} has been on your mind.",
    "Nothing beats a good story about {t}.", "I've heard {t} gets easier with time.",
    "You clearly care about {t}.", "Some days {t} is just like that."};
const std::vector<std::string> kClosers = {
    "What happened next?", "How are you feeling about it now?", "Do you want to talk more about {t}?",
    "What would make today better?", "Have you told anyone else?", "", "Want to hear a silly idea?",
    "What's the best part so far?"};

const std::vector<std::string> kUserReactions = {
    "Yeah, exactly.", "I guess so.", "Haha, maybe.", "Not really, to be honest.", "Thanks, that helps.",
    "Hmm, I don't know.", "Totally.", "You think so?"};
const std::vector<std::string> kUserFollowups = {
    "I keep thinking about {t}.", "It's mostly about {t} right now.", "My friend says I worry too much about {t}.",
    "I just wish {t} was simpler.", "Do you ever think about {t}?", "Anyway, how do you handle {t}?",
    "I started a new plan for {t} today.", "It reminded me of {t} back home."};

std::string fill(std::string tmpl, const std::string& topic) {
  std::string cap = topic;
  if (!cap.empty()) cap[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(cap[0])));
  for (auto [key, val] : {std::pair<std::string, std::string>{"{t}", topic}, {"{T}", cap}}) {
    for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key, pos + val.size()))
      tmpl.replace(pos, key.size(), val);
  }
  return tmpl;
}

std::vector<std::string> pick_topics(Rng& rng) {
  std::vector<std::string> out;
  const auto k = 1 + rng.below(2);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& t = rng.pick(kTopics);
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
  }
  return out;
}

std::string response_text(Rng& rng, const std::string& topic) {
  std::string out = rng.pick(kOpeners);
  out += " " + fill(rng.pick(kMiddles), topic);
  auto closer = fill(rng.pick(kClosers), topic);
  if (!closer.empty()) out += " " + closer;
  return out;
}

std::string sac_turn(Rng& rng, const std::map<std::string, double>& bias) {
  sac::StateAssessment state{rng.pick(kUserMotivations), rng.pick(kUserEmotions), pick_topics(rng)};
  sac::DialogAction action{rng.pick(kActionMotivations), rng.pick(kActionEmotions), pick_topics(rng)};
  // Positive keyword bias nudges the action motivation towards a keyword.
  std::vector<std::string> boosted;
  double total = 0.0;
  for (const auto& [k, v] : bias)
    if (v > 0) {
      boosted.push_back(k);
      total += v;
    }
  const double u = rng.unit();
  if (!boosted.empty() && u < 1.0 - std::exp(-total)) action.motivation = rng.pick(boosted);
  const auto& topic = action.topics.empty() ? state.topics.front() : action.topics.front();
  return sac::render_system_message({std::move(state), std::move(action), response_text(rng, topic)});
}

std::string user_utterance(Rng& rng) {
  return rng.pick(kUserReactions) + " " + fill(rng.pick(kUserFollowups), rng.pick(kTopics));
}

std::size_t count_candidates(std::string_view prompt) {
  static const std::regex re(R"(Candidate (\d+):)");
  std::size_t n = 0;
  for (std::cregex_iterator it(prompt.data(), prompt.data() + prompt.size(), re), end; it != end; ++it)
    n = std::max<std::size_t>(n, std::stoul((*it)[1].str()));
  return n;
}

std::string_view section_between(std::string_view s, std::string_view from, std::string_view to) {
  const auto b = s.find(from);
  if (b == std::string_view::npos) return {};
  const auto start = b + from.size();
  const auto e = s.find(to, start);
  return s.substr(start, e == std::string_view::npos ? std::string_view::npos : e - start);
}

/// Order-invariant judge: the less verbose dialogue wins; hash breaks ties.
std::string judge_verdict(std::string_view prompt) {
  const auto tail_pos = prompt.rfind("Now do the following:");
  const auto tail = tail_pos == std::string_view::npos ? prompt : prompt.substr(tail_pos);
  const auto a = text::trim(section_between(tail, "Dialog A:", "Dialog B:"));
  const auto b = text::trim(section_between(tail, "Dialog B:", "Conclusion:"));
  const auto wa = text::word_count(a), wb = text::word_count(b);
  bool a_wins;
  if (wa != wb) a_wins = wa < wb;
  else a_wins = fnv1a(a) <= fnv1a(b);
  return a_wins ? "Dialog A is better" : "Dialog B is better";
}

std::string annotate(Rng& rng, std::string_view prompt) {
  const auto marker = prompt.rfind("Now do the following new input:");
  if (marker == std::string_view::npos) return {};
  auto body = prompt.substr(prompt.find('\n', marker) + 1);
  std::string out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto nl = body.find('\n', pos);
    if (nl == std::string_view::npos) nl = body.size();
    auto line = text::trim(body.substr(pos, nl - pos));
    pos = nl + 1;
    const bool user = line.rfind(sac::kUserPrefix, 0) == 0;
    const bool system = line.rfind(sac::kSystemPrefix, 0) == 0;
    if (!user && !system) continue;
    auto utterance = std::string(line.substr(user ? sac::kUserPrefix.size() : sac::kSystemPrefix.size()));
    if (user) {
      sac::StateAssessment s{rng.pick(kUserMotivations), rng.pick(kUserEmotions), pick_topics(rng)};
      out.append(sac::kUserPrefix).append(sac::render_block(s)).append(" ").append(utterance).append("\n");
    } else {
      sac::DialogAction a{rng.pick(kActionMotivations), rng.pick(kActionEmotions), pick_topics(rng)};
      if (!utterance.empty() && utterance.back() != '?') utterance += " How about you?";
      out.append(sac::kSystemPrefix).append(sac::render_block(a)).append(" ").append(utterance).append("\n");
    }
  }
  return out;
}

Purpose infer_purpose(const ChatRequest& req) {
  if (req.purpose != Purpose::unspecified) return req.purpose;
  std::string all;
  for (const auto& m : req.messages) all += m.content + "\n";
  if (all.find("Dialog A:") != std::string::npos && all.find("Dialog B:") != std::string::npos) return Purpose::judge;
  if (all.find("Identify the motivation, emotion, and topics") != std::string::npos) return Purpose::annotator;
  if (count_candidates(all) > 0) return Purpose::selector;
  return Purpose::agent;
}

const std::string& match_target(const ChatRequest& req) {
  if (req.continues_assistant() && req.messages.size() >= 2) return req.messages[req.messages.size() - 2].content;
  return req.messages.back().content;
}

std::size_t prompt_words(const ChatRequest& req) {
  std::size_t n = 0;
  for (const auto& m : req.messages) n += text::word_count(m.content);
  return n;
}

}  // namespace

std::string truncate_at_stop(std::string text, const std::vector<std::string>& stops) {
  auto cut = std::string::npos;
  for (const auto& s : stops)
    if (!s.empty()) cut = std::min(cut, text.find(s));
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

std::string continuation_of(const std::string& full, const std::string& prefix) {
  if (full.rfind(prefix, 0) == 0) return full.substr(prefix.size());
  const auto close = full.find(sac::kActionClose);
  if (close != std::string::npos) return full.substr(close + sac::kActionClose.size());
  return full;
}

ScriptedBackend::ScriptedBackend(std::uint64_t seed, std::vector<ScriptRule> rules) : seed_(seed) {
  for (auto& r : rules) add_rule(std::move(r));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const nlohmann::ordered_json& j, std::uint64_t seed) {
  if (j.contains("rules")) {
    auto b = std::make_shared<ScriptedBackend>(j.value("seed", seed));
    if (!j.at("rules").is_array()) throw std::invalid_argument("script 'rules' must be an array");
    for (const auto& r : j.at("rules"))
      b->add_rule({r.at("match").get<std::string>(), r.at("responses").get<std::vector<std::string>>()});
    return b;
  }
  auto b = std::make_shared<ScriptedBackend>(seed);
  for (const auto& [k, v] : j.items())
    b->add_rule({k, v.get<std::vector<std::string>>()});
  return b;
}

void ScriptedBackend::add_rule(ScriptRule rule) {
  if (rule.responses.empty()) throw std::invalid_argument("script rule '" + rule.match + "' has no responses");
  CompiledRule c{std::move(rule), std::nullopt, 0};
  if (c.rule.match.rfind("re:", 0) == 0)
    c.re.emplace(c.rule.match.substr(3), std::regex::ECMAScript | std::regex::icase);
  std::lock_guard lock(mu_);
  rules_.push_back(std::move(c));
}

void ScriptedBackend::add_handler(Handler h) {
  std::lock_guard lock(mu_);
  handlers_.push_back(std::move(h));
}

std::size_t ScriptedBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string ScriptedBackend::pool_choice(const ChatRequest& req, std::uint64_t req_hash, std::size_t choice) const {
  Rng rng(derive_seed(seed_, req_hash, choice));
  switch (infer_purpose(req)) {
    case Purpose::judge: return judge_verdict(req.messages.back().content);
    case Purpose::annotator: return annotate(rng, req.messages.back().content);
    case Purpose::selector: {
      std::string all;
      for (const auto& m : req.messages) all += m.content + "\n";
      const auto n = std::max<std::size_t>(1, count_candidates(all));
      return "Candidate " + std::to_string(1 + rng.below(n)) + " is the best choice.";
    }
    case Purpose::user_sim: return user_utterance(rng);
    case Purpose::agent:
    case Purpose::unspecified: break;
  }
  if (req.continues_assistant()) {
    const auto& prefix = req.messages.back().content;
    // A complete block prefix only needs a response.
    try {
      auto parsed = sac::parse_block_prefix(prefix);
      if (text::trim(prefix.substr(parsed.consumed)).empty()) {
        const auto& topics = parsed.action.topics.empty() ? parsed.state.topics : parsed.action.topics;
        return " " + response_text(rng, topics.empty() ? rng.pick(kTopics) : topics.front());
      }
    } catch (const sac::ParseError&) {
    }
    return continuation_of(sac_turn(rng, req.logit_bias), prefix);
  }
  return sac_turn(rng, req.logit_bias);
}

CompletionResult ScriptedBackend::complete(const ChatRequest& req) {
  if (req.messages.empty()) throw GatewayError(ErrorKind::client, "request has no messages", 400);
  auto canonical = req;
  canonical.params.n = 1;
  const auto req_hash = fingerprint(canonical);
  const auto n = static_cast<std::size_t>(std::max(1, req.params.n));

  CompletionResult out;
  json sources = json::array();
  std::set<std::string> seen;
  std::unique_lock lock(mu_);
  ++calls_;
  const auto handlers = handlers_;
  lock.unlock();

  for (std::size_t i = 0; i < n; ++i) {
    std::optional<std::string> text;
    for (const auto& h : handlers)
      if ((text = h(req, i))) {
        sources.push_back("handler");
        break;
      }
    if (!text) {
      lock.lock();
      const auto& target = match_target(req);
      for (auto& r : rules_) {
        const bool hit = r.rule.match == "*" || (r.re ? std::regex_search(target, *r.re)
                                                      : target.find(r.rule.match) != std::string::npos);
        if (!hit) continue;
        text = r.rule.responses[r.cursor++ % r.rule.responses.size()];
        if (req.continues_assistant()) text = continuation_of(*text, req.messages.back().content);
        sources.push_back("rule:" + r.rule.match);
        break;
      }
      lock.unlock();
    }
    if (!text) {
      // Distinct choices within one request; re-roll on collision.
      std::uint64_t salt = 0;
      do {
        text = pool_choice(req, req_hash, i + salt * n);
        ++salt;
      } while (!seen.insert(*text).second && salt < 8);
      sources.push_back(std::string("pool:") + std::string(to_string(infer_purpose(req))));
    }
    out.choices.push_back(truncate_at_stop(std::move(*text), req.params.stop_sequences));
    out.usage.completion_tokens += text::word_count(out.choices.back());
  }
  out.usage.prompt_tokens = prompt_words(req);
  out.backend_meta = {{"backend", "scripted"}, {"sources", sources}};
  return out;
}

}  // namespace sage::llm
