#include "sage/shell/cli.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>

#include "sage/arena/stats.hpp"
#include "sage/common/jsonl.hpp"
#include "sage/common/random.hpp"
#include "sage/common/text.hpp"
#include "sage/corpus/seeds.hpp"
#include "sage/preference/pairs.hpp"
#include "sage/sac/annotation.hpp"
#include "sage/sac/grammar.hpp"
#include "sage/sac/training.hpp"
#include "sage/selfplay/dataset.hpp"
#include "sage/selfplay/rollout.hpp"
#include "sage/shell/config.hpp"
#include "sage/shell/service.hpp"
#include "sage/steer/session.hpp"

namespace sage::shell {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallel;
  std::string log_level = "warn";
};

struct Io {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

PipelineConfig resolve_config(const Globals& g) {
  auto cfg = g.config.empty() ? default_config() : load_config(g.config);
  if (g.seed) {
    cfg.seed = g.seed;
    cfg.rollout.seed = *g.seed;
    if (g.config.empty()) cfg.backends["mock"].seed = *g.seed;
  }
  if (g.parallel) cfg.parallel = *g.parallel;
  cfg.validate();
  return cfg;
}

std::uint64_t require_seed(const PipelineConfig& cfg, std::string_view stage) {
  if (!cfg.seed) throw ConfigError(std::string(stage) + " needs a seed (--seed or \"seed\" in the config)");
  return *cfg.seed;
}

std::vector<json> read_records(const fs::path& path, std::size_t& corrupt) {
  if (!fs::exists(path)) throw std::runtime_error("no such file: " + path.string());
  std::vector<json> out;
  const auto stats = jsonl::read_file(path, [&](const json& j) { out.push_back(j); });
  corrupt += stats.corrupt;
  return out;
}

/// Order-preserving map with at most `parallel` calls in flight.
template <typename T, typename F>
std::vector<T> parallel_map(std::size_t n, int parallel, F&& fn) {
  std::vector<T> out(n);
  for (std::size_t base = 0; base < n; base += static_cast<std::size_t>(parallel)) {
    std::vector<std::future<T>> window;
    const auto end = std::min(n, base + static_cast<std::size_t>(parallel));
    for (std::size_t i = base; i < end; ++i) window.push_back(std::async(std::launch::async, fn, i));
    for (std::size_t i = base; i < end; ++i) out[i] = window[i - base].get();
  }
  return out;
}

int finish(Io& io, const json& summary, std::size_t failures) {
  io.out << summary.dump(2) << "\n";
  if (failures > 0) {
    io.err << "partial failure: " << failures << " record(s) failed\n";
    return 1;
  }
  return 0;
}

// filter -------------------------------------------------------------------

int cmd_filter(const Globals& g, Io& io, const std::string& in_path, const std::string& out_path) {
  const auto cfg = resolve_config(g);
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + in_path);
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  const auto stats = corpus::filter_corpus(in, cfg.filter, [&](const corpus::Dialogue& d) {
    out << jsonl::dump_line(corpus::to_json(d)) << '\n';
  });
  return finish(io, stats.to_json(), stats.corrupt);
}

// annotate / augment / emit-train -----------------------------------------

int cmd_annotate(const Globals& g, Io& io, const std::string& in_path, const std::string& out_path,
                 const std::string& example_path) {
  const auto cfg = resolve_config(g);
  Backends backends(cfg);
  auto& gw = backends.gateway_for("annotator");
  const auto model = backends.model_for("annotator");
  std::string example = cfg.annotation_example;
  if (!example_path.empty()) {
    std::ifstream ex(example_path, std::ios::binary);
    if (!ex) throw ConfigError("cannot read example " + example_path);
    example.assign(std::istreambuf_iterator<char>(ex), {});
  }

  std::size_t corrupt = 0;
  const auto records = read_records(in_path, corrupt);
  struct Outcome {
    std::optional<json> record;
    std::string error;
  };
  const auto base_seed = cfg.seed.value_or(0);
  const auto outcomes = parallel_map<Outcome>(records.size(), cfg.parallel, [&](std::size_t i) -> Outcome {
    std::string id = records[i].value("id", "#" + std::to_string(i));
    try {
      const auto d = corpus::dialogue_from_json(records[i]);
      id = d.id;
      llm::ChatRequest req;
      req.messages = {{llm::Role::user, sac::build_annotation_prompt(d, example)}};
      req.params = llm::deterministic_params();
      req.params.seed = derive_seed(base_seed, fnv1a(d.id));
      req.model_id = model;
      req.purpose = llm::Purpose::annotator;
      const auto raw = gw.complete(req).choices.at(0);
      const auto annotated = sac::parse_annotated(raw);
      sac::validate(annotated);
      return {json{{"id", d.id}, {"annotated", sac::serialize_annotated(annotated)}}, {}};
    } catch (const std::exception& e) {
      return {std::nullopt, id + ": " + e.what()};
    }
  });

  std::vector<json> kept;
  std::size_t failed = corrupt;
  for (const auto& o : outcomes) {
    if (o.record) kept.push_back(*o.record);
    else {
      ++failed;
      io.err << o.error << "\n";
    }
  }
  jsonl::write_file(out_path, kept);
  return finish(io, {{"read", records.size()}, {"annotated", kept.size()}, {"failed", failed}}, failed);
}

int cmd_augment(const Globals&, Io& io, const std::string& in_path, const std::string& out_path) {
  std::size_t corrupt = 0;
  const auto records = read_records(in_path, corrupt);
  std::vector<json> kept;
  std::size_t failed = corrupt, empty = 0, dropped = 0;
  for (const auto& r : records) {
    const auto id = r.value("id", std::string());
    try {
      const auto res = sac::restructure(sac::parse_annotated(r.at("annotated").get<std::string>()));
      dropped += res.dropped_trailing_user;
      if (res.dialogue.exchanges.empty()) {
        ++empty;
        continue;
      }
      kept.push_back({{"id", id},
                      {"sac_text", sac::render_sac(res.dialogue)},
                      {"exchanges", res.dialogue.exchanges.size()},
                      {"dropped_trailing_user", res.dropped_trailing_user}});
    } catch (const std::exception& e) {
      ++failed;
      io.err << id << ": " << e.what() << "\n";
    }
  }
  jsonl::write_file(out_path, kept);
  return finish(io,
                {{"read", records.size()}, {"written", kept.size()}, {"empty", empty},
                 {"dropped_trailing_user", dropped}, {"failed", failed}},
                failed);
}

int cmd_emit_train(const Globals&, Io& io, const std::string& in_path, const std::string& out_path) {
  std::size_t corrupt = 0;
  const auto records = read_records(in_path, corrupt);
  std::vector<json> kept;
  std::size_t failed = corrupt, spans = 0;
  for (const auto& r : records) {
    const auto id = r.value("id", std::string());
    try {
      const auto ex = sac::emit_training_example(sac::parse_sac(r.at("sac_text").get<std::string>()));
      spans += ex.mask.size();
      kept.push_back(sac::dataset_record(id, ex));
    } catch (const std::exception& e) {
      ++failed;
      io.err << id << ": " << e.what() << "\n";
    }
  }
  jsonl::write_file(out_path, kept);
  return finish(io, {{"read", records.size()}, {"written", kept.size()}, {"mask_spans", spans}, {"failed", failed}},
                failed);
}

// rollout ------------------------------------------------------------------

struct RolloutFlags {
  std::string seeds;
  std::string out;
  std::string out_dir;
  std::optional<int> round;
  std::optional<int> max_exchanges;
  std::optional<int> candidates;
  std::optional<std::string> fanout;
  bool no_selector = false;
  bool evaluation = false;
  std::optional<std::size_t> limit;
};

int cmd_rollout(const Globals& g, Io& io, const RolloutFlags& f) {
  auto cfg = resolve_config(g);
  require_seed(cfg, "rollout");
  auto rc = cfg.rollout;
  if (f.evaluation) {
    auto ev = selfplay::RolloutConfig::evaluation();
    ev.seed = rc.seed;
    ev.agent_model = rc.agent_model;
    ev.user_model = rc.user_model;
    ev.selector_model = rc.selector_model;
    ev.agent_params = rc.agent_params;
    ev.user_params = rc.user_params;
    ev.end_marker = rc.end_marker;
    rc = ev;
  }
  if (f.max_exchanges) rc.max_exchanges = *f.max_exchanges;
  if (f.candidates) rc.candidates_per_turn = *f.candidates;
  if (f.no_selector) rc.use_selector = false;
  try {
    if (f.fanout) rc.fanout = selfplay::fanout_from_string(*f.fanout);
    rc.validate();
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }

  auto seeds = corpus::load_seed_situations(fs::path(f.seeds));
  if (f.limit && *f.limit < seeds.size()) seeds.resize(*f.limit);

  Backends backends(cfg);
  selfplay::Models models{backends.gateway_for("agent"), backends.gateway_for("user"),
                          rc.use_selector ? &backends.gateway_for("selector") : nullptr};

  if (f.round) {
    if (f.out_dir.empty()) throw ConfigError("--round needs --out-dir");
    selfplay::IterateOptions opts;
    opts.k = *f.round;
    opts.agent_model = rc.agent_model;
    opts.user_model = rc.user_model;
    opts.out_dir = f.out_dir;
    const auto art = selfplay::iterate(opts, rc, seeds, models, cfg.parallel);
    const auto truncated = art.manifest.at("counts").value("excluded_truncated", 0);
    return finish(io, art.manifest, static_cast<std::size_t>(truncated));
  }
  if (f.out.empty()) throw ConfigError("rollout needs --out (or --round with --out-dir)");
  const auto trajs = selfplay::simulate_all(seeds, rc, models, "traj-", cfg.parallel);
  selfplay::write_trajectories(f.out, trajs);
  std::size_t truncated = 0, exchanges = 0;
  for (const auto& t : trajs) {
    truncated += t.truncated;
    exchanges += t.exchanges.size();
    if (t.truncated) io.err << t.id << ": " << t.truncation_note << "\n";
  }
  return finish(io, {{"trajectories", trajs.size()}, {"exchanges", exchanges}, {"truncated", truncated}}, truncated);
}

// judge --------------------------------------------------------------------

struct JudgeFlags {
  std::string a, b;
  std::string name_a, name_b;
  std::string out;
  std::string pairs_out;
};

int cmd_judge(const Globals& g, Io& io, const JudgeFlags& f) {
  const auto cfg = resolve_config(g);
  const auto ta = selfplay::read_trajectories(f.a);
  const auto tb = selfplay::read_trajectories(f.b);
  const auto name_a = f.name_a.empty() ? fs::path(f.a).stem().string() : f.name_a;
  const auto name_b = f.name_b.empty() ? fs::path(f.b).stem().string() : f.name_b;

  std::vector<arena::PairRecord> pairs;
  for (std::size_t i = 0; i < std::max(ta.size(), tb.size()); ++i) {
    arena::PairRecord p;
    p.seed_index = i;
    if (i >= ta.size() || i >= tb.size()) p.failure = "unpaired trajectory";
    else if (ta[i].seed != tb[i].seed) p.failure = "seed mismatch";
    else if (ta[i].truncated || tb[i].truncated) p.failure = "truncated trajectory";
    else {
      p.dialog_a = arena::render_for_judge(ta[i].selected_dialogue());
      p.dialog_b = arena::render_for_judge(tb[i].selected_dialogue());
    }
    pairs.push_back(std::move(p));
  }

  Backends backends(cfg);
  const auto reports = arena::judge_pairs(pairs, backends.judges(), name_a, name_b, cfg.parallel);
  io.out << arena::format_table(reports);

  std::size_t failures = 0;
  for (const auto& p : pairs) failures += !p.failure.empty();
  if (!f.out.empty()) {
    json j = json::array();
    for (const auto& r : reports) j.push_back(arena::to_json(r));
    std::ofstream out(f.out, std::ios::binary | std::ios::trunc);
    out << json{{"reports", j}}.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + f.out);
  }
  if (!f.pairs_out.empty()) {
    std::vector<json> lines;
    for (const auto& p : pairs) {
      json v = json::array();
      for (const auto& cv : p.verdicts) v.push_back(arena::to_json(cv));
      lines.push_back({{"seed_index", p.seed_index}, {"verdicts", v}, {"failure", p.failure}});
    }
    jsonl::write_file(f.pairs_out, lines);
  }
  if (failures > 0) {
    io.err << "partial failure: " << failures << " pair(s) excluded\n";
    return 1;
  }
  return 0;
}

// dpo-pairs / stats ----------------------------------------------------------

int cmd_dpo(const Globals& g, Io& io, const std::vector<std::string>& inputs, const std::string& out_path) {
  const auto cfg = resolve_config(g);
  const auto seed = require_seed(cfg, "dpo-pairs");
  std::vector<selfplay::Trajectory> trajs;
  for (const auto& p : inputs) {
    auto t = selfplay::read_trajectories(p);
    trajs.insert(trajs.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  const auto set = preference::make_pairs(trajs, seed);
  preference::export_dpo(set.pairs, out_path);
  return finish(io, {{"trajectories", trajs.size()}, {"pairs", set.pairs.size()}, {"skipped", set.skip_count}}, 0);
}

int cmd_stats(const Globals&, Io& io, const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<selfplay::Trajectory> trajs;
  for (const auto& p : inputs) {
    auto t = selfplay::read_trajectories(p);
    trajs.insert(trajs.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  std::map<std::string, std::size_t> reasons;
  std::size_t exchanges = 0, truncated = 0, fallbacks = 0;
  for (const auto& t : trajs) {
    ++reasons[std::string(selfplay::to_string(t.end_reason))];
    exchanges += t.exchanges.size();
    truncated += t.truncated;
    for (const auto& e : t.exchanges) fallbacks += e.candidates.fallback;
  }
  json j{{"trajectories", trajs.size()},
         {"exchanges", exchanges},
         {"mean_exchanges", trajs.empty() ? 0.0 : static_cast<double>(exchanges) / trajs.size()},
         {"truncated", truncated},
         {"selector_fallbacks", fallbacks},
         {"end_reasons", reasons},
         {"actions", arena::to_json(arena::action_distribution(trajs))}};
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
  }
  io.out << j.dump(2) << "\n";
  return 0;
}

// serve / chat -------------------------------------------------------------

struct ServeFlags {
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::string> sessions_dir;
  std::optional<std::string> token;
};

steer::SessionDefaults session_defaults(const PipelineConfig& cfg) {
  return {cfg.roles.at("agent").model, cfg.sampling, cfg.seed};
}

int cmd_serve(const Globals& g, Io& io, const ServeFlags& f) {
  auto cfg = resolve_config(g);
  if (f.host) cfg.serve.host = *f.host;
  if (f.port) cfg.serve.port = *f.port;
  if (f.token) cfg.serve.bearer_token = *f.token;
  if (f.sessions_dir) cfg.sessions_dir = *f.sessions_dir;

  Backends backends(cfg);
  steer::SessionStore store(backends.gateway_for("agent"), session_defaults(cfg), cfg.sessions_dir);
  if (const auto n = store.load_logs(); n > 0) spdlog::info("restored {} session(s)", n);
  httplib::Server srv;
  install_routes(srv, store, {cfg.serve.bearer_token});
  if (!srv.bind_to_port(cfg.serve.host, cfg.serve.port))
    throw std::runtime_error("cannot bind " + cfg.serve.host + ":" + std::to_string(cfg.serve.port));
  io.out << "listening on http://" << cfg.serve.host << ":" << cfg.serve.port << std::endl;
  srv.listen_after_bind();
  return 0;
}

constexpr std::string_view kChatHelp =
    "commands:\n"
    "  /force key=value[; key=value]   force action fields (motivation, emotion, topics=a,b)\n"
    "  /bias word[=strength] ...       bias the action toward keywords (default strength 1.0)\n"
    "  /scope next|session             how long the steering lasts\n"
    "  /clear                          drop steering\n"
    "  /show                           print the session as JSON\n"
    "  /quit\n";

std::string describe(std::string_view label, const sac::DialogAction& b) {
  std::string s(label);
  s += " motivation=" + b.motivation.value_or("null");
  s += " emotion=" + b.emotion.value_or("null");
  s += " topics=" + text::join(b.topics, ",");
  return s;
}

void set_steering_cmd(steer::ChatSession& s, std::string_view cmd, std::string_view args) {
  auto next = s.active;
  if (cmd == "/force") {
    next.mode = steer::Mode::force;
    next.forced_action = {};
    next.bias_keywords.clear();
    for (const auto& part : text::split(args, ';')) {
      const auto kv = text::trim(part);
      if (kv.empty()) continue;
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos) throw steer::InvalidSteering("expected key=value, got '" + std::string(kv) + "'");
      const auto key = std::string(text::trim(kv.substr(0, eq)));
      const auto value = std::string(text::trim(kv.substr(eq + 1)));
      if (key == "motivation") next.forced_action.motivation = value;
      else if (key == "emotion") next.forced_action.emotion = value;
      else if (key == "topics") {
        std::vector<std::string> topics;
        for (const auto& t : text::split(value, ',')) topics.emplace_back(text::trim(t));
        next.forced_action.topics = sac::normalize_topics(topics);
      } else throw steer::InvalidSteering("unknown field '" + key + "'");
    }
  } else if (cmd == "/bias") {
    next.mode = steer::Mode::bias;
    next.forced_action = {};
    next.bias_keywords.clear();
    std::istringstream words{std::string(args)};
    for (std::string w; words >> w;) {
      const auto eq = w.find('=');
      double v = steer::kDefaultBias;
      if (eq != std::string::npos) {
        try {
          v = std::stod(w.substr(eq + 1));
        } catch (const std::exception&) {
          throw steer::InvalidSteering("bad strength in '" + w + "'");
        }
      }
      next.bias_keywords[w.substr(0, eq)] = v;
    }
  } else if (cmd == "/scope") {
    const auto a = text::trim(args);
    if (a == "session") next.scope = steer::Scope::session;
    else if (a == "next" || a == "next_turn") next.scope = steer::Scope::next_turn;
    else throw steer::InvalidSteering("scope is 'next' or 'session'");
  }
  next.validate();
  s.active = next;
}

int cmd_chat(const Globals& g, Io& io, std::optional<std::string> transcript) {
  const auto cfg = resolve_config(g);
  Backends backends(cfg);
  auto& gw = backends.gateway_for("agent");
  steer::ChatSession s;
  s.id = "repl";
  s.model_id = backends.model_for("agent");
  s.params = cfg.sampling;
  s.seed = cfg.seed;

  std::size_t errors = 0;
  io.out << "type a message, /help for commands\n";
  for (std::string line; std::getline(io.in, line);) {
    const auto trimmed = std::string(text::trim(line));
    if (trimmed.empty()) continue;
    if (trimmed[0] == '/') {
      const auto sp = trimmed.find(' ');
      const auto cmd = trimmed.substr(0, sp);
      const auto args = sp == std::string::npos ? std::string() : trimmed.substr(sp + 1);
      if (cmd == "/quit" || cmd == "/exit") break;
      if (cmd == "/help") {
        io.out << kChatHelp;
      } else if (cmd == "/show") {
        io.out << steer::to_json(s).dump(2) << "\n";
      } else if (cmd == "/clear") {
        s.active = {};
        io.out << "steering cleared\n";
      } else if (cmd == "/force" || cmd == "/bias" || cmd == "/scope") {
        try {
          set_steering_cmd(s, cmd, args);
          io.out << "steering " << steer::to_json(s.active).dump() << "\n";
        } catch (const steer::InvalidSteering& e) {
          io.err << "invalid steering: " << e.what() << "\n";
        }
      } else {
        io.err << "unknown command " << cmd << "\n";
      }
      continue;
    }
    try {
      const auto& t = steer::chat_step(gw, s, trimmed);
      io.out << describe("[state]", sac::DialogAction{t.agent.user_state.motivation, t.agent.user_state.emotion,
                                                      t.agent.user_state.topics})
             << "\n";
      io.out << describe("[action]", t.agent.action);
      if (!t.forced_fields.empty()) io.out << " (forced: " << text::join(t.forced_fields, ",") << ")";
      io.out << "\nagent: " << t.agent.response << "\n";
    } catch (const std::exception& e) {
      ++errors;
      io.err << "error: " << e.what() << "\n";
    }
  }
  if (transcript) {
    std::ofstream out(*transcript, std::ios::binary | std::ios::trunc);
    out << steer::to_json(s).dump(2) << "\n";
  }
  return errors > 0 ? 1 : 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"SAGE dialogue pipeline"};
  app.name("sage");
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "pipeline config (JSON)");
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--parallel", g.parallel, "concurrent requests/trajectories")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off");

  std::string in_path, out_path, example;
  std::vector<std::string> inputs;
  RolloutFlags rf;
  JudgeFlags jf;
  ServeFlags sf;
  std::optional<std::string> transcript;

  auto* filter = app.add_subcommand("filter", "keep dialogues that pass the corpus filter");
  filter->add_option("--in", in_path, "dialogues JSONL")->required();
  filter->add_option("--out", out_path, "kept dialogues JSONL")->required();

  auto* annotate = app.add_subcommand("annotate", "annotate dialogues with state/action blocks");
  annotate->add_option("--in", in_path, "dialogues JSONL")->required();
  annotate->add_option("--out", out_path, "annotated JSONL")->required();
  annotate->add_option("--example", example, "in-context example file");

  auto* augment = app.add_subcommand("augment", "restructure annotated dialogues into SAC dialogues");
  augment->add_option("--in", in_path, "annotated JSONL")->required();
  augment->add_option("--out", out_path, "SAC JSONL")->required();

  auto* emit = app.add_subcommand("emit-train", "emit loss-masked training records");
  emit->add_option("--in", in_path, "SAC JSONL")->required();
  emit->add_option("--out", out_path, "dataset JSONL")->required();

  auto* rollout = app.add_subcommand("rollout", "self-play rollouts from seed situations");
  rollout->add_option("--seeds", rf.seeds, "seed situations CSV")->required();
  rollout->add_option("--out", rf.out, "trajectories JSONL");
  rollout->add_option("--round", rf.round, "write round artifacts for iteration k")->check(CLI::PositiveNumber);
  rollout->add_option("--out-dir", rf.out_dir, "directory for round artifacts");
  rollout->add_option("--max-exchanges", rf.max_exchanges)->check(CLI::PositiveNumber);
  rollout->add_option("--candidates", rf.candidates)->check(CLI::PositiveNumber);
  rollout->add_option("--fanout", rf.fanout, "batched|serial|concurrent");
  rollout->add_flag("--no-selector", rf.no_selector);
  rollout->add_flag("--evaluation", rf.evaluation, "one sample per turn, no selector, 8 exchanges");
  rollout->add_option("--limit", rf.limit, "use the first N seeds");

  auto* judge = app.add_subcommand("judge", "pairwise judge two trajectory files");
  judge->add_option("--a", jf.a, "trajectories for method A")->required();
  judge->add_option("--b", jf.b, "trajectories for method B")->required();
  judge->add_option("--name-a", jf.name_a);
  judge->add_option("--name-b", jf.name_b);
  judge->add_option("--out", jf.out, "report JSON");
  judge->add_option("--pairs-out", jf.pairs_out, "per-pair verdicts JSONL");

  auto* dpo = app.add_subcommand("dpo-pairs", "build preference pairs from trajectories");
  dpo->add_option("--in", inputs, "trajectories JSONL")->required();
  dpo->add_option("--out", out_path, "DPO JSONL")->required();

  auto* stats = app.add_subcommand("stats", "summarize trajectories");
  stats->add_option("--in", inputs, "trajectories JSONL")->required();
  stats->add_option("--out", out_path, "write the summary JSON here too");

  auto* serve = app.add_subcommand("serve", "HTTP chat/steering service");
  serve->add_option("--host", sf.host);
  serve->add_option("--port", sf.port);
  serve->add_option("--sessions-dir", sf.sessions_dir, "event logs; sessions are restored on start");
  serve->add_option("--token", sf.token, "require this bearer token");

  auto* chat = app.add_subcommand("chat", "interactive steering REPL on stdin");
  chat->add_option("--transcript", transcript, "write the session JSON on exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  Io io{in, out, err};
  try {
    if (!g.config.empty()) resolve_config(g);
    if (filter->parsed()) return cmd_filter(g, io, in_path, out_path);
    if (annotate->parsed()) return cmd_annotate(g, io, in_path, out_path, example);
    if (augment->parsed()) return cmd_augment(g, io, in_path, out_path);
    if (emit->parsed()) return cmd_emit_train(g, io, in_path, out_path);
    if (rollout->parsed()) return cmd_rollout(g, io, rf);
    if (judge->parsed()) return cmd_judge(g, io, jf);
    if (dpo->parsed()) return cmd_dpo(g, io, inputs, out_path);
    if (stats->parsed()) return cmd_stats(g, io, inputs, out_path);
    if (serve->parsed()) return cmd_serve(g, io, sf);
    if (chat->parsed()) return cmd_chat(g, io, transcript);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const selfplay::ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace sage::shell
