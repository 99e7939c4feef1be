#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "plight/sim/flow.hpp"
#include "plight/sim/network.hpp"

namespace plight::sim {

inline constexpr int kObservationSize = 16;

struct SimConfig {
  double decision_interval_s = 10.0;
  double horizon_s = kEpisodeHorizonS;
  double saturation_headway_s = 2.0;
  int lane_capacity = 50;
  // Queue counts are divided by this in observations.
  double observation_scale = 50.0;

  int steps_per_episode() const;
  int ticks_per_step() const;
};

// Phase one-hot (4) followed by the 12 lane queue counts, scaled.
struct Observation {
  std::array<double, kObservationSize> values{};

  static Observation encode(Phase phase, std::span<const int> queues, double scale);
  int phase() const;
  std::span<const double> view() const { return values; }

  friend bool operator==(const Observation&, const Observation&) = default;
};

enum class VehicleState : std::uint8_t { kOnLink, kQueued, kExited };

struct Vehicle {
  int id = 0;
  int entry = -1;  // -1 for vehicles injected directly into a lane
  double spawn_time = 0.0;
  VehicleState state = VehicleState::kOnLink;
  int link = -1;
  double arrive_time = 0.0;  // at the stop line of `link`
  int intersection = -1;
  int lane = -1;
  std::optional<Turn> pending_turn;
  std::vector<Turn> turns;  // every turn taken, in order
  double exit_time = 0.0;
};

struct StepResult {
  std::vector<Observation> observations;
  std::vector<double> rewards;
  bool done = false;
};

struct EpisodeMetrics {
  double m_tt = 0.0;  // mean travel time, s
  long long m_th = 0;  // vehicles that reached their destination
  double m_q = 0.0;   // mean per-intersection total queue
  long long spawned = 0;
  // Set when no vehicle spawned and m_tt is reported as 0.
  bool travel_time_undefined = false;
};

// Per-episode record of queues and rewards at each decision step.
struct MetricsLedger {
  double horizon_s = kEpisodeHorizonS;
  std::vector<std::vector<int>> phases;        // [step][intersection]
  std::vector<std::vector<int>> queue_totals;  // [step][intersection]
  std::vector<std::vector<double>> rewards;    // [step][intersection]
};

struct VehicleCounts {
  long long spawned = 0;
  long long on_links = 0;
  long long queued = 0;
  long long exited = 0;
};

// Queue-based grid micro-simulator: free-flow link traversal, FIFO lane
// queues with a fixed saturation headway, and four-phase signals. Decision
// steps apply one phase per intersection and then advance a fixed number of
// 1-second ticks.
class Simulator {
 public:
  Simulator(RoadNetwork net, FlowSpec flow, std::uint64_t seed, SimConfig config = {});

  // Restarts the episode. The demand realization (arrival times and turns of
  // every vehicle) depends only on the seed, so every reset with the same
  // seed replays the same traffic.
  void reset();
  void reset(std::uint64_t seed);

  StepResult step(std::span<const int> actions);
  bool done() const;

  // Sets the signal of every intersection without advancing time.
  void apply_phases(std::span<const int> actions);
  // Advances the simulation by one 1-second tick.
  void tick();

  std::vector<Observation> observations() const;
  std::vector<double> rewards() const;
  std::array<int, kLanesPerIntersection> lane_queues(int intersection) const;
  int queue_total(int intersection) const;
  Phase phase(int intersection) const { return phases_[intersection]; }

  VehicleCounts counts() const;
  EpisodeMetrics metrics() const;
  // m_tt over vehicles spawned so far, with unfinished ones counted up to now.
  double running_travel_time() const;

  const MetricsLedger& ledger() const { return ledger_; }
  const std::vector<Vehicle>& vehicles() const { return vehicles_; }
  const RoadNetwork& network() const { return net_; }
  const FlowSpec& flow() const { return spawner_.flow(); }
  const SimConfig& config() const { return config_; }
  double time() const { return static_cast<double>(time_); }
  int step_index() const { return step_; }

  // Places a vehicle at the start of a boundary entry link now.
  int inject_at_entry(int entry);
  // Places a vehicle at the back of a lane queue; its turn is the lane's
  // movement.
  int inject_into_lane(int intersection, int lane);

 private:
  int new_vehicle(int entry, double spawn_time);
  Turn sample_turn(const Vehicle& v) const;
  void arrive_from_links();
  void discharge_lanes();

  RoadNetwork net_;
  SimConfig config_;
  std::uint64_t seed_;
  std::uint64_t route_seed_;
  Spawner spawner_;

  long long time_ = 0;
  int step_ = 0;
  std::vector<Phase> phases_;
  std::vector<Vehicle> vehicles_;
  std::vector<std::deque<int>> link_queue_;
  std::vector<std::array<std::deque<int>, kLanesPerIntersection>> lanes_;
  std::vector<std::array<double, kLanesPerIntersection>> next_discharge_;
  VehicleCounts counts_;
  MetricsLedger ledger_;
};

// Mean travel time, throughput and mean queue of a finished episode.
EpisodeMetrics episode_metrics(const MetricsLedger& ledger, const std::vector<Vehicle>& vehicles);

// CSV: episode,step,intersection,phase,reward,queue_total
void write_step_trace_header(std::ostream& out);
void write_step_trace(std::ostream& out, int episode, const Simulator& sim);

// CSV: vehicle_id,spawn_time,turns,exit_time (exit_time empty if unfinished)
void write_vehicle_trace(std::ostream& out, const std::vector<Vehicle>& vehicles);

}  // namespace plight::sim
