#include "plight/agent/replay.hpp"

#include <algorithm>
#include <cmath>

#include "plight/errors.hpp"

namespace plight::agent {

std::vector<sim::Observation> neighbor_observations(const sim::RoadNetwork& net, const std::vector<sim::Observation>& obs,
                                                    int intersection) {
  std::vector<sim::Observation> out;
  const auto& ids = net.intersections[intersection].neighbors;
  out.reserve(ids.size());
  for (int j : ids) out.push_back(obs[j]);
  return out;
}

std::vector<Transition> make_transitions(const sim::RoadNetwork& net, const std::vector<sim::Observation>& obs,
                                         const std::vector<int>& actions, const std::vector<double>& rewards,
                                         const std::vector<sim::Observation>& next_obs) {
  const int n = net.size();
  if (static_cast<int>(obs.size()) != n || static_cast<int>(actions.size()) != n ||
      static_cast<int>(rewards.size()) != n || static_cast<int>(next_obs.size()) != n) {
    throw ShapeError("joint step does not match the network size");
  }
  std::vector<Transition> out(n);
  for (int i = 0; i < n; ++i) {
    out[i].obs = obs[i];
    out[i].neighbors = neighbor_observations(net, obs, i);
    out[i].action = actions[i];
    out[i].reward = rewards[i];
    out[i].next_obs = next_obs[i];
    out[i].next_neighbors = neighbor_observations(net, next_obs, i);
  }
  return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::size_t warmup, double observation_scale)
    : capacity_(capacity), warmup_(warmup), scale_(observation_scale) {
  if (capacity == 0) throw ContractError("replay capacity must be positive");
  if (warmup == 0 || warmup > capacity) throw ContractError("replay warmup must lie in [1, capacity]");
}

ReplayBuffer::Packed ReplayBuffer::pack(const sim::Observation& o) const {
  Packed p;
  const int phase = o.phase();
  if (phase < 0) throw ShapeError("observation has no phase one-hot");
  p.phase = static_cast<std::uint8_t>(phase);
  for (int l = 0; l < sim::kLanesPerIntersection; ++l) {
    const double count = std::round(o.values[sim::kNumPhases + l] * scale_);
    if (count < 0 || count > 65535) throw ShapeError("lane count outside the storable range");
    p.counts[l] = static_cast<std::uint16_t>(count);
  }
  return p;
}

sim::Observation ReplayBuffer::unpack(const Packed& p) const {
  std::array<int, sim::kLanesPerIntersection> counts{};
  for (int l = 0; l < sim::kLanesPerIntersection; ++l) counts[l] = p.counts[l];
  return sim::Observation::encode(static_cast<sim::Phase>(p.phase), counts, scale_);
}

void ReplayBuffer::push(const Transition& t) {
  if (t.neighbors.size() > 4 || t.next_neighbors.size() != t.neighbors.size()) {
    throw ShapeError("transition neighbor lists are inconsistent");
  }
  if (t.action < 0 || t.action > 255) throw ContractError("transition action out of range");
  Record r;
  r.obs = pack(t.obs);
  r.next_obs = pack(t.next_obs);
  r.neighbor_count = static_cast<std::uint8_t>(t.neighbors.size());
  for (std::size_t j = 0; j < t.neighbors.size(); ++j) {
    r.neighbors[j] = pack(t.neighbors[j]);
    r.next_neighbors[j] = pack(t.next_neighbors[j]);
  }
  r.action = static_cast<std::uint8_t>(t.action);
  r.reward = t.reward;
  if (records_.size() < capacity_) {
    records_.push_back(r);
  } else {
    records_[next_] = r;
  }
  next_ = (next_ + 1) % capacity_;
  used_ = std::min(used_ + 1, capacity_);
  ++pushed_;
}

Transition ReplayBuffer::at(std::size_t index) const {
  if (index >= used_) throw ContractError("replay index out of range");
  const Record& r = records_[index];
  Transition t;
  t.obs = unpack(r.obs);
  t.next_obs = unpack(r.next_obs);
  t.neighbors.reserve(r.neighbor_count);
  t.next_neighbors.reserve(r.neighbor_count);
  for (std::size_t j = 0; j < r.neighbor_count; ++j) {
    t.neighbors.push_back(unpack(r.neighbors[j]));
    t.next_neighbors.push_back(unpack(r.next_neighbors[j]));
  }
  t.action = r.action;
  t.reward = r.reward;
  return t;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (!ready()) {
    throw StateError("replay buffer holds " + std::to_string(used_) + " records, warmup is " +
                     std::to_string(warmup_));
  }
  std::vector<Transition> out;
  out.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) out.push_back(at(rng.below(used_)));
  return out;
}

}  // namespace plight::agent
