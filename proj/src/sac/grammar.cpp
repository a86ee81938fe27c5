#include "sage/sac/grammar.hpp"

#include <cctype>
#include <unordered_set>

#include "sage/common/text.hpp"

namespace sage::sac {

std::string_view to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::missing_block: return "MissingBlock";
    case ParseErrorKind::malformed_key: return "MalformedKey";
    case ParseErrorKind::speaker_mismatch: return "SpeakerMismatch";
  }
  return "?";
}

namespace {

std::string describe(const ParseIssue& i) {
  std::string s = std::string(to_string(i.kind)) + " at turn " + std::to_string(i.turn_index);
  if (i.line) s += " (line " + std::to_string(i.line) + ")";
  if (!i.expected.empty()) s += ": expected " + i.expected;
  if (!i.detail.empty()) s += "; " + i.detail;
  return s;
}

}  // namespace

ParseError::ParseError(ParseIssue issue) : std::runtime_error(describe(issue)), issue_(std::move(issue)) {}

std::vector<std::string> normalize_topics(std::vector<std::string> topics) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (auto& t : topics) {
    if (text::trim(t).empty()) continue;
    if (seen.insert(t).second) out.push_back(std::move(t));
  }
  return out;
}

nlohmann::json to_json(const SacSystemTurn& t) {
  return {{"user_state", block_to_json(t.user_state)},
          {"action", block_to_json(t.action)},
          {"response", t.response}};
}

SacSystemTurn system_turn_from_json(const nlohmann::json& j) {
  return {block_from_json<StateAssessment>(j.at("user_state")),
          block_from_json<DialogAction>(j.at("action")), j.at("response").get<std::string>()};
}

// ---------------------------------------------------------------------------
// Escaping

namespace {

bool is_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

void append_escaped_ws(std::string& out, char c) {
  out += '\\';
  switch (c) {
    case '\n': out += 'n'; break;
    case '\r': out += 'r'; break;
    case '\t': out += 't'; break;
    default: out += c;
  }
}

std::string escape_impl(std::string_view v, std::string_view specials) {
  std::string out;
  out.reserve(v.size() + 4);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const char c = v[i];
    if (c == '\n' || c == '\r') {
      append_escaped_ws(out, c);
    } else if (is_ws(c) && (i == 0 || i + 1 == v.size())) {
      append_escaped_ws(out, c);
    } else if (c == '\\' || specials.find(c) != std::string_view::npos) {
      out += '\\';
      out += c;
    } else {
      out += c;
    }
  }
  return out;
}

struct Decoded {
  std::string value;
  bool escaped = false;  // any escape survived trimming
};

// Decodes escapes and trims unescaped ASCII whitespace at both ends.
Decoded decode_trim(std::string_view raw) {
  struct DChar {
    char c;
    bool esc;
  };
  std::vector<DChar> chars;
  chars.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 1 < raw.size()) {
      const char n = raw[++i];
      chars.push_back({n == 'n' ? '\n' : n == 'r' ? '\r' : n == 't' ? '\t' : n, true});
    } else {
      chars.push_back({raw[i], false});
    }
  }
  std::size_t b = 0, e = chars.size();
  while (b < e && !chars[b].esc && is_ws(chars[b].c)) ++b;
  while (e > b && !chars[e - 1].esc && is_ws(chars[e - 1].c)) --e;
  Decoded d;
  for (std::size_t i = b; i < e; ++i) {
    d.value += chars[i].c;
    d.escaped = d.escaped || chars[i].esc;
  }
  return d;
}

std::size_t find_unescaped(std::string_view raw, std::size_t from, std::string_view needle) {
  for (std::size_t i = from; i < raw.size(); ++i) {
    if (raw[i] == '\\') {
      ++i;
      continue;
    }
    if (raw.substr(i, needle.size()) == needle) return i;
  }
  return std::string_view::npos;
}

std::vector<std::string_view> split_unescaped(std::string_view raw, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\') {
      ++i;
      continue;
    }
    if (raw[i] == sep) {
      out.push_back(raw.substr(start, i - start));
      start = i + 1;
    }
  }
  out.push_back(raw.substr(start));
  return out;
}

std::size_t skip_ws(std::string_view s, std::size_t pos) {
  while (pos < s.size() && is_ws(s[pos])) ++pos;
  return pos;
}

std::string render_value(const std::optional<std::string>& v) {
  if (!v) return "null";
  if (*v == "null") return "nul\\l";
  return escape_value(*v);
}

std::string render_topics(const std::vector<std::string>& topics) {
  std::string out;
  for (std::size_t i = 0; i < topics.size(); ++i) {
    if (i) out += ", ";
    out += topics[i] == "null" ? std::string("nul\\l") : escape_value(topics[i]);
  }
  return out;
}

}  // namespace

std::string escape_value(std::string_view v) { return escape_impl(v, ";[],"); }
std::string escape_text(std::string_view t) { return escape_impl(t, ""); }

// ---------------------------------------------------------------------------
// Rendering

template <BlockKind K>
std::string render_block(const Block<K>& b) {
  constexpr bool state = K == BlockKind::state;
  const std::string_view open = state ? kStateOpen : kActionOpen;
  const std::string_view close = state ? kStateClose : kActionClose;
  const std::string_view p = state ? "u_" : "a_";
  std::string out(open);
  out += ' ';
  out.append(p).append("motivation: ").append(render_value(b.motivation));
  out.append("; ").append(p).append("emotion: ").append(render_value(b.emotion));
  out.append("; ").append(p).append("topics:");
  if (!b.topics.empty()) out.append(" ").append(render_topics(b.topics));
  out += ' ';
  out += close;
  return out;
}

template std::string render_block(const StateAssessment&);
template std::string render_block(const DialogAction&);

std::string render_blocks(const StateAssessment& s, const DialogAction& a) {
  return render_block(s) + " " + render_block(a);
}

std::string render_system_message(const SacSystemTurn& t) {
  std::string out = render_blocks(t.user_state, t.action);
  if (!t.response.empty()) out.append(" ").append(escape_text(t.response));
  return out;
}

std::string render_sac(const SacDialogue& d) {
  std::string out;
  for (const auto& ex : d.exchanges) {
    out.append(kUserPrefix).append(escape_text(ex.user_text)).append("\n");
    out.append(kSystemPrefix).append(render_system_message(ex.system)).append("\n");
  }
  if (d.open_user_turn) out.append(kUserPrefix).append(escape_text(*d.open_user_turn)).append("\n");
  return out;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

enum class Field { motivation, emotion, topics };

template <typename BlockT>
BlockT parse_block_content(std::string_view content, std::size_t turn_index) {
  constexpr bool state = BlockT::kind == BlockKind::state;
  const std::string_view own = state ? "u_" : "a_";
  BlockT block;
  bool seen[3] = {false, false, false};
  for (auto raw_field : split_unescaped(content, ';')) {
    if (text::trim(raw_field).empty()) continue;
    const auto colon = find_unescaped(raw_field, 0, ":");
    if (colon == std::string_view::npos) {
      throw ParseError({ParseErrorKind::malformed_key, turn_index, 0, "'key: value'",
                        "field '" + std::string(text::trim(raw_field)) + "' has no ':'"});
    }
    auto key = text::to_lower_ascii(text::trim(raw_field.substr(0, colon)));
    std::string_view bare = key;
    if (bare.rfind(own, 0) == 0) bare.remove_prefix(2);
    Field f;
    if (bare == "motivation") f = Field::motivation;
    else if (bare == "emotion") f = Field::emotion;
    else if (bare == "topics" || bare == "topic") f = Field::topics;
    else {
      throw ParseError({ParseErrorKind::malformed_key, turn_index, 0,
                        std::string(own) + "motivation|" + std::string(own) + "emotion|" +
                            std::string(own) + "topics",
                        "unknown key '" + key + "'"});
    }
    auto& flag = seen[static_cast<int>(f)];
    if (flag) {
      throw ParseError({ParseErrorKind::malformed_key, turn_index, 0, "each key once",
                        "duplicate key '" + key + "'"});
    }
    flag = true;
    const auto raw_value = raw_field.substr(colon + 1);
    if (f == Field::topics) {
      auto whole = decode_trim(raw_value);
      if (!whole.escaped && whole.value == "null") continue;
      std::vector<std::string> topics;
      for (auto part : split_unescaped(raw_value, ',')) topics.push_back(decode_trim(part).value);
      block.topics = normalize_topics(std::move(topics));
    } else {
      auto d = decode_trim(raw_value);
      std::optional<std::string> v;
      if (d.escaped || d.value != "null") v = std::move(d.value);
      (f == Field::motivation ? block.motivation : block.emotion) = std::move(v);
    }
  }
  return block;
}

}  // namespace

template <typename BlockT>
BlockT parse_block(std::string_view s, std::size_t& pos, std::size_t turn_index) {
  constexpr bool state = BlockT::kind == BlockKind::state;
  const std::string_view open = state ? kStateOpen : kActionOpen;
  const std::string_view close = state ? kStateClose : kActionClose;
  pos = skip_ws(s, pos);
  if (s.substr(pos, open.size()) != open) {
    throw ParseError({ParseErrorKind::missing_block, turn_index, 0, std::string(open),
                      "found '" + std::string(s.substr(pos, 24)) + "'"});
  }
  const auto body = pos + open.size();
  const auto end = find_unescaped(s, body, close);
  if (end == std::string_view::npos) {
    throw ParseError({ParseErrorKind::missing_block, turn_index, 0, std::string(close),
                      "unterminated " + std::string(open) + " block"});
  }
  auto block = parse_block_content<BlockT>(s.substr(body, end - body), turn_index);
  pos = end + close.size();
  return block;
}

template StateAssessment parse_block(std::string_view, std::size_t&, std::size_t);
template DialogAction parse_block(std::string_view, std::size_t&, std::size_t);

std::string unescape_text(std::string_view raw) { return decode_trim(raw).value; }

namespace {

std::size_t skip_system_prefix(std::string_view s) {
  auto pos = skip_ws(s, 0);
  const std::string_view tag = text::trim(kSystemPrefix);
  if (s.substr(pos, tag.size()) == tag) pos += tag.size();
  return pos;
}

void rethrow_with_line(const ParseError& e, std::size_t turn_index, std::size_t line) {
  auto issue = e.issue();
  issue.turn_index = turn_index;
  issue.line = line;
  throw ParseError(std::move(issue));
}

}  // namespace

BlockPrefix parse_block_prefix(std::string_view msg, std::size_t turn_index) {
  BlockPrefix out;
  std::size_t pos = skip_system_prefix(msg);
  out.state = parse_block<StateAssessment>(msg, pos, turn_index);
  out.action = parse_block<DialogAction>(msg, pos, turn_index);
  out.consumed = pos;
  return out;
}

SacSystemTurn parse_system_message(std::string_view msg, std::size_t turn_index) {
  auto prefix = parse_block_prefix(msg, turn_index);
  return {std::move(prefix.state), std::move(prefix.action),
          decode_trim(msg.substr(prefix.consumed)).value};
}

std::string strip_blocks(std::string_view msg) {
  try {
    auto prefix = parse_block_prefix(msg);
    return decode_trim(msg.substr(prefix.consumed)).value;
  } catch (const ParseError&) {
    return std::string(text::trim(msg));
  }
}

SacDialogue parse_sac(std::string_view text) {
  SacDialogue d;
  std::size_t line_no = 0;
  std::size_t turn = 0;
  std::size_t pos = 0;
  const std::string_view user_tag = text::trim(kUserPrefix);
  const std::string_view system_tag = text::trim(kSystemPrefix);
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;

    if (line.substr(0, user_tag.size()) == user_tag) {
      if (d.open_user_turn) {
        throw ParseError({ParseErrorKind::speaker_mismatch, turn, line_no, "<system>",
                          "two consecutive user turns"});
      }
      d.open_user_turn = decode_trim(line.substr(user_tag.size())).value;
    } else if (line.substr(0, system_tag.size()) == system_tag) {
      if (!d.open_user_turn) {
        throw ParseError({ParseErrorKind::speaker_mismatch, turn, line_no, "<user>",
                          "system turn without a preceding user turn"});
      }
      try {
        auto sys = parse_system_message(line.substr(system_tag.size()), turn);
        d.exchanges.push_back({std::move(*d.open_user_turn), std::move(sys)});
        d.open_user_turn.reset();
      } catch (const ParseError& e) {
        rethrow_with_line(e, turn, line_no);
      }
    } else {
      throw ParseError({ParseErrorKind::missing_block, turn, line_no, "<user> or <system>",
                        "line has no speaker tag"});
    }
    ++turn;
  }
  return d;
}

}  // namespace sage::sac
