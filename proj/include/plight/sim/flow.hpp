#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plight/rng.hpp"
#include "plight/sim/network.hpp"

namespace plight::sim {

inline constexpr double kEpisodeHorizonS = 3600.0;

struct FlowPhase {
  double duration_s = 0.0;
  // Mean per-entry inter-arrival time; infinity means no demand.
  double entry_interval_s = 0.0;
};

// Time-phased stochastic demand. Turn probabilities are ordered
// (straight, right, left).
struct FlowSpec {
  std::string name;
  std::array<double, 3> turn_probs{1.0, 0.0, 0.0};
  std::vector<FlowPhase> phases;
  // Grid the flow was designed for, when known.
  std::optional<std::pair<int, int>> grid;

  // Throws ContractError when an invariant is broken.
  void validate(double horizon_s = kEpisodeHorizonS) const;

  // Active phase at time t (the last one past the horizon).
  const FlowPhase& phase_at(double t) const;

  // Expected vehicle count for `entries` boundary entries over the horizon.
  double expected_spawns(int entries) const;

  double turn_prob(Turn t) const { return turn_probs[static_cast<int>(t)]; }
};

// The seven demand configurations of the Jinan (3x4) and Hangzhou (4x4)
// datasets. Jinan flows use two 30-minute phases, Hangzhou flows three
// 20-minute phases, in column order.
const std::vector<FlowSpec>& builtin_flows();
std::optional<FlowSpec> find_builtin_flow(const std::string& name);

// Published vehicle totals for the built-in flows.
int published_vehicle_count(const std::string& name);

// Key/value text format:
//   name = jn1
//   turn_probs = 0.3 0.3 0.4
//   phase = 1800 9
//   phase = 1800 5
//   grid = 3 4          (optional)
FlowSpec parse_flow_spec(const std::string& text, const std::string& origin = "<text>");
FlowSpec load_flow_spec(const std::string& path);
std::string format_flow_spec(const FlowSpec& spec);

// Resolves a built-in flow name or a path to a flow file.
FlowSpec resolve_flow(const std::string& name_or_path);

// Newly spawned vehicle request.
struct SpawnEvent {
  int entry = 0;
  double time_s = 0.0;
};

// Independent per-entry Poisson arrival clocks with piecewise-constant rate.
// Crossing a phase boundary redraws from the boundary, which is exact for a
// memoryless process.
class Spawner {
 public:
  Spawner(const RoadNetwork& net, FlowSpec flow, std::uint64_t seed);

  // Emits every arrival in [t, t + dt).
  std::vector<SpawnEvent> spawn_step(double t, double dt = 1.0);

  const FlowSpec& flow() const { return flow_; }

 private:
  double draw_next(double from);

  FlowSpec flow_;
  Rng rng_;
  std::vector<double> next_arrival_;
};

// Total vehicles a spawner emits over one horizon.
long long count_spawns(const RoadNetwork& net, const FlowSpec& flow, std::uint64_t seed,
                       double horizon_s = kEpisodeHorizonS);

}  // namespace plight::sim
