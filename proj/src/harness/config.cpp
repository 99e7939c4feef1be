#include "plight/harness/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::harness {

namespace fs = std::filesystem;

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kPretrain: return "pretrain";
    case Mode::kTransfer: return "transfer";
    case Mode::kAblation: return "ablation";
    case Mode::kAnalyze: return "analyze";
  }
  return "?";
}

namespace {

Mode parse_mode(const std::string& s) {
  if (s == "pretrain") return Mode::kPretrain;
  if (s == "transfer") return Mode::kTransfer;
  if (s == "ablation") return Mode::kAblation;
  if (s == "analyze") return Mode::kAnalyze;
  throw ConfigError("unknown mode '" + s + "'");
}

AblationVariant parse_variant(const std::string& s) {
  if (s == "EDQ" || s == "edq") return AblationVariant::kEDQ;
  if (s == "EQ" || s == "eq") return AblationVariant::kEQ;
  if (s == "both") return AblationVariant::kBoth;
  throw ConfigError("unknown ablation variant '" + s + "' (EDQ, EQ or both)");
}

const char* variant_name(AblationVariant v) {
  switch (v) {
    case AblationVariant::kEDQ: return "EDQ";
    case AblationVariant::kEQ: return "EQ";
    case AblationVariant::kBoth: return "both";
  }
  return "?";
}

bool parse_bool(const std::string& s, const std::string& key) {
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + s + "'");
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

std::size_t to_size(const std::string& v, const std::string& key) {
  const long long x = parse_int(v, key);
  if (x < 0) throw ConfigError(key + " must be nonnegative");
  return static_cast<std::size_t>(x);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"mode", [](ExperimentConfig& c, const std::string& v) { c.mode = parse_mode(v); }},
      {"flow", [](ExperimentConfig& c, const std::string& v) { c.flows = split_words(v); }},
      {"grid",
       [](ExperimentConfig& c, const std::string& v) {
         const auto w = split_words(v);
         if (w.size() != 2) throw ConfigError("grid needs '<rows> <cols>'");
         c.rows = static_cast<int>(parse_int(w[0], "grid rows"));
         c.cols = static_cast<int>(parse_int(w[1], "grid cols"));
       }},
      {"episodes", [](ExperimentConfig& c, const std::string& v) { c.episodes = static_cast<int>(parse_int(v, "episodes")); }},
      {"seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& w : split_words(v)) {
           const long long s = parse_int(w, "seeds");
           if (s < 0) throw ConfigError("seeds must be nonnegative");
           c.seeds.push_back(static_cast<std::uint64_t>(s));
         }
       }},
      {"output", [](ExperimentConfig& c, const std::string& v) { c.output = v; }},
      {"pool", [](ExperimentConfig& c, const std::string& v) { c.pool = v; }},
      {"baseline", [](ExperimentConfig& c, const std::string& v) { c.baseline = parse_bool(v, "baseline"); }},
      {"variant", [](ExperimentConfig& c, const std::string& v) { c.variant = parse_variant(v); }},
      {"flows_dir", [](ExperimentConfig& c, const std::string& v) { c.flows_dir = v; }},
      {"threads", [](ExperimentConfig& c, const std::string& v) { c.threads = static_cast<int>(parse_int(v, "threads")); }},
      {"write_traces", [](ExperimentConfig& c, const std::string& v) { c.write_traces = parse_bool(v, "write_traces"); }},
      {"traffic_stream",
       [](ExperimentConfig& c, const std::string& v) {
         c.traffic_stream = static_cast<std::uint64_t>(parse_int(v, "traffic_stream"));
       }},
      {"check_fraction", [](ExperimentConfig& c, const std::string& v) { c.check_fraction = parse_double(v, "check_fraction"); }},
      {"ablation_tolerance",
       [](ExperimentConfig& c, const std::string& v) { c.ablation_tolerance = parse_double(v, "ablation_tolerance"); }},
      {"route_discount", [](ExperimentConfig& c, const std::string& v) { c.route_discount = parse_double(v, "route_discount"); }},
      // simulator
      {"free_flow", [](ExperimentConfig& c, const std::string& v) { c.free_flow_s = parse_double(v, "free_flow"); }},
      {"decision_interval",
       [](ExperimentConfig& c, const std::string& v) { c.sim.decision_interval_s = parse_double(v, "decision_interval"); }},
      {"horizon", [](ExperimentConfig& c, const std::string& v) { c.sim.horizon_s = parse_double(v, "horizon"); }},
      {"headway", [](ExperimentConfig& c, const std::string& v) { c.sim.saturation_headway_s = parse_double(v, "headway"); }},
      {"lane_capacity",
       [](ExperimentConfig& c, const std::string& v) { c.sim.lane_capacity = static_cast<int>(parse_int(v, "lane_capacity")); }},
      {"observation_scale",
       [](ExperimentConfig& c, const std::string& v) { c.sim.observation_scale = parse_double(v, "observation_scale"); }},
      // model
      {"embed_dim", [](ExperimentConfig& c, const std::string& v) { c.model.embed_dim = to_size(v, "embed_dim"); }},
      {"decoder_hidden", [](ExperimentConfig& c, const std::string& v) { c.model.decoder_hidden = to_size(v, "decoder_hidden"); }},
      {"q_hidden", [](ExperimentConfig& c, const std::string& v) { c.model.q_hidden = to_size(v, "q_hidden"); }},
      {"gamma", [](ExperimentConfig& c, const std::string& v) { c.model.gamma = parse_double(v, "gamma"); }},
      {"learning_rate", [](ExperimentConfig& c, const std::string& v) { c.model.learning_rate = parse_double(v, "learning_rate"); }},
      // training
      {"batch_size", [](ExperimentConfig& c, const std::string& v) { c.train.batch_size = to_size(v, "batch_size"); }},
      {"buffer", [](ExperimentConfig& c, const std::string& v) { c.train.buffer_capacity = to_size(v, "buffer"); }},
      {"warmup", [](ExperimentConfig& c, const std::string& v) { c.train.warmup = to_size(v, "warmup"); }},
      {"sync_every", [](ExperimentConfig& c, const std::string& v) { c.train.sync_every = static_cast<int>(parse_int(v, "sync_every")); }},
      {"reward_scale", [](ExperimentConfig& c, const std::string& v) { c.train.reward_scale = parse_double(v, "reward_scale"); }},
      {"epsilon_start", [](ExperimentConfig& c, const std::string& v) { c.train.epsilon_start = parse_double(v, "epsilon_start"); }},
      {"epsilon_end", [](ExperimentConfig& c, const std::string& v) { c.train.epsilon_end = parse_double(v, "epsilon_end"); }},
      {"epsilon_anneal",
       [](ExperimentConfig& c, const std::string& v) { c.train.epsilon_anneal_fraction = parse_double(v, "epsilon_anneal"); }},
      // transfer
      {"period", [](ExperimentConfig& c, const std::string& v) { c.transfer.period = static_cast<int>(parse_int(v, "period")); }},
      {"lambda", [](ExperimentConfig& c, const std::string& v) { c.transfer.lambda = parse_double(v, "lambda"); }},
      {"guide_epsilon", [](ExperimentConfig& c, const std::string& v) { c.transfer.guide_epsilon = parse_double(v, "guide_epsilon"); }},
  };
  return table;
}

}  // namespace

std::string ExperimentConfig::resolve(const std::string& path) const {
  if (path.empty()) return path;
  const fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (rows < 1 || cols < 1) throw ConfigError("grid dimensions must be positive");
  if (episodes < 0) throw ConfigError("episodes must be nonnegative");
  if (mode == Mode::kAnalyze) {
    if (flows_dir.empty() && flows.empty()) throw ConfigError("analyze mode needs flows_dir or flow");
  } else if (flows.empty()) {
    throw ConfigError(std::string(mode_name(mode)) + " mode needs a flow");
  }
  if (mode == Mode::kTransfer) {
    if (pool.empty()) throw ConfigError("transfer mode requires a pool manifest");
    if (flows.size() != 1) throw ConfigError("transfer mode takes exactly one target flow");
  }
  if (!(check_fraction >= 0.0 && check_fraction <= 1.0)) throw ConfigError("check_fraction must lie in [0, 1]");
  if (!(ablation_tolerance >= 0.0)) throw ConfigError("ablation_tolerance must be nonnegative");
  if (!(route_discount > 0.0 && route_discount <= 1.0)) throw ConfigError("route_discount must lie in (0, 1]");
  if (!(free_flow_s > 0.0)) throw ConfigError("free_flow must be positive");
  if (!(sim.decision_interval_s >= 1.0) || !(sim.horizon_s >= sim.decision_interval_s)) {
    throw ConfigError("decision interval must be at least 1 s and no longer than the horizon");
  }
  if (!(sim.saturation_headway_s > 0.0) || sim.lane_capacity < 1 || !(sim.observation_scale > 0.0)) {
    throw ConfigError("simulator constants must be positive");
  }
  model.validate();
  train.validate();
  transfer.validate();
}

std::string ExperimentConfig::to_text() const {
  KeyValueDoc doc;
  std::string flow_list;
  for (const auto& f : flows) flow_list += (flow_list.empty() ? "" : " ") + f;
  std::string seed_list;
  for (auto s : seeds) seed_list += (seed_list.empty() ? "" : " ") + std::to_string(s);
  doc.add("mode", mode_name(mode));
  if (!flows.empty()) doc.add("flow", flow_list);
  doc.add("grid", std::to_string(rows) + " " + std::to_string(cols));
  doc.add("episodes", std::to_string(episodes));
  doc.add("seeds", seed_list);
  doc.add("output", output);
  if (!pool.empty()) doc.add("pool", pool);
  doc.add("baseline", baseline ? "1" : "0");
  doc.add("variant", variant_name(variant));
  if (!flows_dir.empty()) doc.add("flows_dir", flows_dir);
  doc.add("threads", std::to_string(threads));
  doc.add("write_traces", write_traces ? "1" : "0");
  doc.add("traffic_stream", std::to_string(traffic_stream));
  doc.add("check_fraction", format_double(check_fraction));
  doc.add("ablation_tolerance", format_double(ablation_tolerance));
  doc.add("route_discount", format_double(route_discount));
  doc.add("free_flow", format_double(free_flow_s));
  doc.add("decision_interval", format_double(sim.decision_interval_s));
  doc.add("horizon", format_double(sim.horizon_s));
  doc.add("headway", format_double(sim.saturation_headway_s));
  doc.add("lane_capacity", std::to_string(sim.lane_capacity));
  doc.add("observation_scale", format_double(sim.observation_scale));
  doc.add("embed_dim", std::to_string(model.embed_dim));
  doc.add("decoder_hidden", std::to_string(model.decoder_hidden));
  doc.add("q_hidden", std::to_string(model.q_hidden));
  doc.add("gamma", format_double(model.gamma));
  doc.add("learning_rate", format_double(model.learning_rate));
  doc.add("batch_size", std::to_string(train.batch_size));
  doc.add("buffer", std::to_string(train.buffer_capacity));
  doc.add("warmup", std::to_string(train.warmup));
  doc.add("sync_every", std::to_string(train.sync_every));
  doc.add("reward_scale", format_double(train.reward_scale));
  doc.add("epsilon_start", format_double(train.epsilon_start));
  doc.add("epsilon_end", format_double(train.epsilon_end));
  doc.add("epsilon_anneal", format_double(train.epsilon_anneal_fraction));
  doc.add("period", std::to_string(transfer.period));
  doc.add("lambda", format_double(transfer.lambda));
  doc.add("guide_epsilon", format_double(transfer.guide_epsilon));
  return doc.to_text();
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin,
                                         const std::string& base_dir) {
  KeyValueDoc doc;
  try {
    doc = KeyValueDoc::parse(text, origin);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  ExperimentConfig c;
  c.base_dir = base_dir;
  const auto& table = setters();
  // The mode decides the default traffic stream, so read it first.
  if (doc.has("mode")) c.mode = parse_mode(doc.get("mode"));
  if (c.mode == Mode::kTransfer) c.traffic_stream = 2;
  for (const auto& [key, value] : doc.entries()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(origin + ": unknown key '" + key + "'");
    try {
      it->second(c, value);
    } catch (const ParseError& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = fs::path(path).parent_path();
  return parse_experiment_config(ss.str(), path, dir.empty() ? "." : dir.string());
}

void apply_seed_offset(ExperimentConfig& config, long long offset) {
  for (auto& s : config.seeds) {
    const long long shifted = static_cast<long long>(s) + offset;
    if (shifted < 0) throw ConfigError("seed offset makes a seed negative");
    s = static_cast<std::uint64_t>(shifted);
  }
}

}  // namespace plight::harness
