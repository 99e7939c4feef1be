#include "plight/sim/simulator.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::sim {

int SimConfig::steps_per_episode() const {
  return static_cast<int>(std::ceil(horizon_s / decision_interval_s - 1e-9));
}

int SimConfig::ticks_per_step() const { return static_cast<int>(std::lround(decision_interval_s)); }

Observation Observation::encode(Phase phase, std::span<const int> queues, double scale) {
  if (queues.size() != kLanesPerIntersection) throw ShapeError("observation needs 12 lane queues");
  Observation o;
  o.values[static_cast<int>(phase)] = 1.0;
  for (int l = 0; l < kLanesPerIntersection; ++l) o.values[kNumPhases + l] = queues[l] / scale;
  return o;
}

int Observation::phase() const {
  for (int p = 0; p < kNumPhases; ++p) {
    if (values[p] == 1.0) return p;
  }
  return -1;
}

Simulator::Simulator(RoadNetwork net, FlowSpec flow, std::uint64_t seed, SimConfig config)
    : net_(std::move(net)),
      config_(config),
      seed_(seed),
      route_seed_(mix_seed(seed, 0x524F5554ULL)),
      spawner_(net_, std::move(flow), seed) {
  if (!(config_.decision_interval_s >= 1.0) ||
      std::abs(config_.decision_interval_s - std::round(config_.decision_interval_s)) > 1e-12) {
    throw ContractError("decision interval must be a positive whole number of seconds");
  }
  if (config_.lane_capacity < 1) throw ContractError("lane capacity must be positive");
  reset();
}

void Simulator::reset() { reset(seed_); }

void Simulator::reset(std::uint64_t seed) {
  seed_ = seed;
  route_seed_ = mix_seed(seed, 0x524F5554ULL);
  spawner_ = Spawner(net_, spawner_.flow(), seed);
  time_ = 0;
  step_ = 0;
  phases_.assign(net_.size(), Phase::kWeStraight);
  vehicles_.clear();
  link_queue_.assign(net_.links.size(), {});
  lanes_.assign(net_.size(), {});
  std::array<double, kLanesPerIntersection> zero{};
  next_discharge_.assign(net_.size(), zero);
  counts_ = {};
  ledger_ = {};
  ledger_.horizon_s = config_.horizon_s;
}

bool Simulator::done() const { return static_cast<double>(time_) >= config_.horizon_s - 1e-9; }

int Simulator::new_vehicle(int entry, double spawn_time) {
  Vehicle v;
  v.id = static_cast<int>(vehicles_.size());
  v.entry = entry;
  v.spawn_time = spawn_time;
  vehicles_.push_back(std::move(v));
  ++counts_.spawned;
  return vehicles_.back().id;
}

int Simulator::inject_at_entry(int entry) {
  if (entry < 0 || entry >= static_cast<int>(net_.boundary_entries.size())) {
    throw ContractError("boundary entry index out of range");
  }
  const int id = new_vehicle(entry, static_cast<double>(time_));
  auto& v = vehicles_[id];
  v.state = VehicleState::kOnLink;
  v.link = net_.boundary_entries[entry].link;
  v.arrive_time = v.spawn_time + net_.links[v.link].free_flow_s;
  link_queue_[v.link].push_back(id);
  ++counts_.on_links;
  return id;
}

int Simulator::inject_into_lane(int intersection, int lane) {
  if (intersection < 0 || intersection >= net_.size() || lane < 0 || lane >= kLanesPerIntersection) {
    throw ContractError("lane index out of range");
  }
  const int id = new_vehicle(-1, static_cast<double>(time_));
  auto& v = vehicles_[id];
  v.state = VehicleState::kQueued;
  v.intersection = intersection;
  v.lane = lane;
  switch (static_cast<Movement>(lane % 3)) {
    case Movement::kLeft: v.pending_turn = Turn::kLeft; break;
    case Movement::kStraight: v.pending_turn = Turn::kStraight; break;
    case Movement::kRight: v.pending_turn = Turn::kRight; break;
  }
  lanes_[intersection][lane].push_back(id);
  ++counts_.queued;
  return id;
}

Turn Simulator::sample_turn(const Vehicle& v) const {
  // Keyed on (vehicle, turn number) so a vehicle's route does not depend on
  // the signal timing it experiences.
  const std::uint64_t bits = mix_seed(route_seed_, static_cast<std::uint64_t>(v.id), v.turns.size());
  const double u = static_cast<double>(bits >> 11) * 0x1.0p-53;
  const auto& p = spawner_.flow().turn_probs;
  if (u < p[0]) return Turn::kStraight;
  if (u < p[0] + p[1]) return Turn::kRight;
  return Turn::kLeft;
}

void Simulator::apply_phases(std::span<const int> actions) {
  if (static_cast<int>(actions.size()) != net_.size()) {
    throw ContractError("expected one action per intersection (" + std::to_string(net_.size()) + "), got " +
                        std::to_string(actions.size()));
  }
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i] < 0 || actions[i] >= kNumPhases) {
      throw ContractError("action " + std::to_string(actions[i]) + " outside {0..3}");
    }
  }
  for (std::size_t i = 0; i < actions.size(); ++i) phases_[i] = static_cast<Phase>(actions[i]);
}

void Simulator::arrive_from_links() {
  const double now = static_cast<double>(time_);
  for (std::size_t l = 0; l < net_.links.size(); ++l) {
    auto& q = link_queue_[l];
    const auto& link = net_.links[l];
    const int side = arrival_side(link.heading);
    while (!q.empty()) {
      auto& v = vehicles_[q.front()];
      if (v.arrive_time > now) break;
      if (!v.pending_turn) v.pending_turn = sample_turn(v);
      const int lane = lane_index(side, movement_of(*v.pending_turn));
      auto& target = lanes_[link.to][lane];
      // A full lane holds the head vehicle, and everything behind it, on the link.
      if (static_cast<int>(target.size()) >= config_.lane_capacity) break;
      v.state = VehicleState::kQueued;
      v.intersection = link.to;
      v.lane = lane;
      v.link = -1;
      target.push_back(v.id);
      q.pop_front();
      --counts_.on_links;
      ++counts_.queued;
    }
  }
}

void Simulator::discharge_lanes() {
  const double now = static_cast<double>(time_);
  for (int i = 0; i < net_.size(); ++i) {
    const auto& node = net_.intersections[i];
    for (int lane = 0; lane < kLanesPerIntersection; ++lane) {
      auto& q = lanes_[i][lane];
      if (q.empty() || !lane_is_green(phases_[i], lane) || now < next_discharge_[i][lane]) continue;
      next_discharge_[i][lane] = now + config_.saturation_headway_s;
      auto& v = vehicles_[q.front()];
      q.pop_front();
      --counts_.queued;
      const Turn turn = *v.pending_turn;
      v.turns.push_back(turn);
      v.pending_turn.reset();
      // The heading before the turn is the one that arrives on this side.
      const Heading before = static_cast<Heading>((lane / 3 + 2) % 4);
      const Heading after = turned(before, turn);
      const int next = node.neighbor_by_heading[static_cast<int>(after)];
      v.intersection = -1;
      v.lane = -1;
      if (next < 0) {
        v.state = VehicleState::kExited;
        v.exit_time = now;
        ++counts_.exited;
      } else {
        const int link = net_.intersections[next].incoming_link[arrival_side(after)];
        v.state = VehicleState::kOnLink;
        v.link = link;
        v.arrive_time = now + net_.links[link].free_flow_s;
        link_queue_[link].push_back(v.id);
        ++counts_.on_links;
      }
    }
  }
}

void Simulator::tick() {
  if (done()) throw StateError("simulation is past its horizon");
  const double now = static_cast<double>(time_);
  for (const auto& ev : spawner_.spawn_step(now, 1.0)) {
    const int id = new_vehicle(ev.entry, ev.time_s);
    auto& v = vehicles_[id];
    v.link = net_.boundary_entries[ev.entry].link;
    v.arrive_time = ev.time_s + net_.links[v.link].free_flow_s;
    link_queue_[v.link].push_back(id);
    ++counts_.on_links;
  }
  arrive_from_links();
  discharge_lanes();
  ++time_;
}

StepResult Simulator::step(std::span<const int> actions) {
  if (done()) throw StateError("simulation is past its horizon");
  apply_phases(actions);
  const int ticks = config_.ticks_per_step();
  for (int k = 0; k < ticks && !done(); ++k) tick();
  ++step_;

  StepResult result;
  result.observations = observations();
  result.rewards.resize(net_.size());
  std::vector<int> totals(net_.size());
  std::vector<int> phase_trace(net_.size());
  for (int i = 0; i < net_.size(); ++i) {
    totals[i] = queue_total(i);
    result.rewards[i] = -static_cast<double>(totals[i]);
    phase_trace[i] = static_cast<int>(phases_[i]);
  }
  ledger_.phases.push_back(std::move(phase_trace));
  ledger_.queue_totals.push_back(std::move(totals));
  ledger_.rewards.push_back(result.rewards);
  result.done = done();
  return result;
}

std::array<int, kLanesPerIntersection> Simulator::lane_queues(int intersection) const {
  std::array<int, kLanesPerIntersection> out{};
  for (int l = 0; l < kLanesPerIntersection; ++l) out[l] = static_cast<int>(lanes_[intersection][l].size());
  return out;
}

int Simulator::queue_total(int intersection) const {
  int total = 0;
  for (const auto& q : lanes_[intersection]) total += static_cast<int>(q.size());
  return total;
}

std::vector<Observation> Simulator::observations() const {
  std::vector<Observation> out;
  out.reserve(net_.size());
  for (int i = 0; i < net_.size(); ++i) {
    const auto q = lane_queues(i);
    out.push_back(Observation::encode(phases_[i], q, config_.observation_scale));
  }
  return out;
}

std::vector<double> Simulator::rewards() const {
  std::vector<double> out(net_.size());
  for (int i = 0; i < net_.size(); ++i) out[i] = -static_cast<double>(queue_total(i));
  return out;
}

VehicleCounts Simulator::counts() const { return counts_; }

EpisodeMetrics Simulator::metrics() const { return episode_metrics(ledger_, vehicles_); }

double Simulator::running_travel_time() const {
  if (vehicles_.empty()) return 0.0;
  const double now = static_cast<double>(time_);
  double sum = 0.0;
  for (const auto& v : vehicles_) {
    sum += (v.state == VehicleState::kExited ? v.exit_time : std::max(now, v.spawn_time)) - v.spawn_time;
  }
  return sum / static_cast<double>(vehicles_.size());
}

EpisodeMetrics episode_metrics(const MetricsLedger& ledger, const std::vector<Vehicle>& vehicles) {
  EpisodeMetrics m;
  m.spawned = static_cast<long long>(vehicles.size());
  double travel = 0.0;
  for (const auto& v : vehicles) {
    if (v.state == VehicleState::kExited) {
      travel += v.exit_time - v.spawn_time;
      ++m.m_th;
    } else {
      travel += ledger.horizon_s - v.spawn_time;
    }
  }
  if (vehicles.empty()) {
    m.travel_time_undefined = true;
  } else {
    m.m_tt = travel / static_cast<double>(vehicles.size());
  }
  double queue_sum = 0.0;
  std::size_t cells = 0;
  for (const auto& step : ledger.queue_totals) {
    for (int q : step) queue_sum += q;
    cells += step.size();
  }
  m.m_q = cells ? queue_sum / static_cast<double>(cells) : 0.0;
  return m;
}

void write_step_trace_header(std::ostream& out) { out << "episode,step,intersection,phase,reward,queue_total\n"; }

void write_step_trace(std::ostream& out, int episode, const Simulator& sim) {
  const auto& ledger = sim.ledger();
  for (std::size_t s = 0; s < ledger.queue_totals.size(); ++s) {
    for (std::size_t i = 0; i < ledger.queue_totals[s].size(); ++i) {
      out << episode << ',' << s + 1 << ',' << i << ',' << ledger.phases[s][i] << ','
          << format_double(ledger.rewards[s][i]) << ',' << ledger.queue_totals[s][i] << '\n';
    }
  }
}

void write_vehicle_trace(std::ostream& out, const std::vector<Vehicle>& vehicles) {
  out << "vehicle_id,spawn_time,turns,exit_time\n";
  for (const auto& v : vehicles) {
    out << v.id << ',' << format_double(v.spawn_time) << ',';
    for (std::size_t k = 0; k < v.turns.size(); ++k) {
      if (k) out << '|';
      out << turn_symbol(v.turns[k]);
    }
    out << ',';
    if (v.state == VehicleState::kExited) out << format_double(v.exit_time);
    out << '\n';
  }
}

}  // namespace plight::sim
