#include "plight/sim/flow.hpp"

#include <cmath>
#include <limits>

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::sim {

void FlowSpec::validate(double horizon_s) const {
  double sum = 0.0;
  for (double p : turn_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ContractError("flow " + name + ": turn probability outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ContractError("flow " + name + ": turn probabilities must sum to 1");
  if (phases.empty()) throw ContractError("flow " + name + ": no demand phases");
  double total = 0.0;
  for (const auto& ph : phases) {
    if (!(ph.duration_s > 0.0)) throw ContractError("flow " + name + ": phase duration must be positive");
    if (!(ph.entry_interval_s > 0.0)) throw ContractError("flow " + name + ": entry interval must be positive");
    total += ph.duration_s;
  }
  if (std::abs(total - horizon_s) > 1e-9) {
    throw ContractError("flow " + name + ": phase durations sum to " + format_double(total) +
                        " s, expected " + format_double(horizon_s));
  }
}

const FlowPhase& FlowSpec::phase_at(double t) const {
  double end = 0.0;
  for (const auto& ph : phases) {
    end += ph.duration_s;
    if (t < end) return ph;
  }
  return phases.back();
}

double FlowSpec::expected_spawns(int entries) const {
  double per_entry = 0.0;
  for (const auto& ph : phases) {
    if (std::isfinite(ph.entry_interval_s)) per_entry += ph.duration_s / ph.entry_interval_s;
  }
  return per_entry * entries;
}

const std::vector<FlowSpec>& builtin_flows() {
  static const std::vector<FlowSpec> flows = [] {
    auto jinan = [](std::string name, double s, double r, double l, double f1, double f2) {
      return FlowSpec{std::move(name), {s, r, l}, {{1800, f1}, {1800, f2}}, std::pair{3, 4}};
    };
    auto hangzhou = [](std::string name, double s, double r, double l, double f1, double f2, double f3) {
      return FlowSpec{std::move(name), {s, r, l}, {{1200, f1}, {1200, f2}, {1200, f3}}, std::pair{4, 4}};
    };
    return std::vector<FlowSpec>{
        jinan("jn1", 0.3, 0.3, 0.4, 9, 5),
        jinan("jn2", 0.4, 0.4, 0.2, 5.5, 5.5),
        jinan("jn3", 0.5, 0.3, 0.2, 8, 5),
        hangzhou("hz1", 0.6, 0.15, 0.25, 7, 10.2, 9.3),
        hangzhou("hz2", 0.1, 0.7, 0.2, 10, 11, 4),
        hangzhou("hz3", 0.2, 0.3, 0.5, 4, 10, 10),
        hangzhou("hz4", 0.3, 0.4, 0.3, 8, 5, 4),
    };
  }();
  return flows;
}

std::optional<FlowSpec> find_builtin_flow(const std::string& name) {
  for (const auto& f : builtin_flows()) {
    if (f.name == name) return f;
  }
  return std::nullopt;
}

int published_vehicle_count(const std::string& name) {
  if (name == "jn1") return 7831;
  if (name == "jn2") return 9172;
  if (name == "jn3") return 8186;
  if (name == "hz1") return 6684;
  if (name == "hz2") return 8444;
  if (name == "hz3") return 8433;
  if (name == "hz4") return 11012;
  throw ContractError("no published vehicle count for flow '" + name + "'");
}

FlowSpec parse_flow_spec(const std::string& text, const std::string& origin) {
  const auto doc = KeyValueDoc::parse(text, origin);
  FlowSpec spec;
  spec.name = doc.get("name");
  const auto probs = doc.get_doubles("turn_probs");
  if (probs.size() != 3) throw ParseError(origin + ": turn_probs needs 3 values (straight right left)");
  spec.turn_probs = {probs[0], probs[1], probs[2]};
  for (const auto& value : doc.get_all("phase")) {
    const auto words = split_words(value);
    if (words.size() != 2) throw ParseError(origin + ": phase needs 'duration interval'");
    spec.phases.push_back({parse_double(words[0], "phase duration"), parse_double(words[1], "phase interval")});
  }
  if (doc.has("grid")) {
    const auto g = doc.get_ints("grid");
    if (g.size() != 2) throw ParseError(origin + ": grid needs 'rows cols'");
    spec.grid = std::pair{static_cast<int>(g[0]), static_cast<int>(g[1])};
  }
  spec.validate();
  return spec;
}

FlowSpec load_flow_spec(const std::string& path) {
  const auto doc = KeyValueDoc::load(path);
  return parse_flow_spec(doc.to_text(), path);
}

std::string format_flow_spec(const FlowSpec& spec) {
  KeyValueDoc doc;
  doc.add("name", spec.name);
  doc.add("turn_probs", format_double(spec.turn_probs[0]) + " " + format_double(spec.turn_probs[1]) + " " +
                            format_double(spec.turn_probs[2]));
  for (const auto& ph : spec.phases) {
    doc.add("phase", format_double(ph.duration_s) + " " + format_double(ph.entry_interval_s));
  }
  if (spec.grid) doc.add("grid", std::to_string(spec.grid->first) + " " + std::to_string(spec.grid->second));
  return doc.to_text();
}

FlowSpec resolve_flow(const std::string& name_or_path) {
  if (auto builtin = find_builtin_flow(name_or_path)) return *builtin;
  try {
    return load_flow_spec(name_or_path);
  } catch (const ConfigError&) {
    throw ConfigError("flow '" + name_or_path + "' is neither a built-in flow nor a readable file");
  }
}

Spawner::Spawner(const RoadNetwork& net, FlowSpec flow, std::uint64_t seed)
    : flow_(std::move(flow)), rng_(mix_seed(seed, 0x5350574EULL)) {
  flow_.validate();
  next_arrival_.resize(net.boundary_entries.size());
  for (auto& t : next_arrival_) t = draw_next(0.0);
}

double Spawner::draw_next(double from) {
  double phase_start = 0.0;
  for (const auto& ph : flow_.phases) {
    const double phase_end = phase_start + ph.duration_s;
    if (from < phase_end) {
      const double candidate = from + rng_.exponential(ph.entry_interval_s);
      if (candidate < phase_end) return candidate;
      from = phase_end;
    }
    phase_start = phase_end;
  }
  return std::numeric_limits<double>::infinity();
}

std::vector<SpawnEvent> Spawner::spawn_step(double t, double dt) {
  std::vector<SpawnEvent> events;
  const double end = t + dt;
  for (std::size_t e = 0; e < next_arrival_.size(); ++e) {
    while (next_arrival_[e] < end) {
      events.push_back({static_cast<int>(e), next_arrival_[e]});
      next_arrival_[e] = draw_next(next_arrival_[e]);
    }
  }
  return events;
}

long long count_spawns(const RoadNetwork& net, const FlowSpec& flow, std::uint64_t seed, double horizon_s) {
  Spawner spawner(net, flow, seed);
  long long total = 0;
  for (double t = 0.0; t < horizon_s; t += 1.0) total += static_cast<long long>(spawner.spawn_step(t).size());
  return total;
}

}  // namespace plight::sim
