#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "plight/rng.hpp"
#include "plight/sim/simulator.hpp"

namespace plight::agent {

// One intersection's experience at one decision step.
struct Transition {
  sim::Observation obs;
  std::vector<sim::Observation> neighbors;
  int action = 0;
  double reward = 0.0;
  sim::Observation next_obs;
  std::vector<sim::Observation> next_neighbors;
};

// Builds one Transition per intersection from a joint step.
std::vector<Transition> make_transitions(const sim::RoadNetwork& net, const std::vector<sim::Observation>& obs,
                                         const std::vector<int>& actions, const std::vector<double>& rewards,
                                         const std::vector<sim::Observation>& next_obs);

std::vector<sim::Observation> neighbor_observations(const sim::RoadNetwork& net, const std::vector<sim::Observation>& obs,
                                                    int intersection);

// Ring buffer of per-intersection transitions with uniform sampling.
// Observations are stored as integer lane counts and decoded on sampling,
// which reproduces the simulator's values exactly.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, std::size_t warmup, double observation_scale);

  void push(const Transition& t);
  std::size_t size() const { return used_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t warmup() const { return warmup_; }
  bool ready() const { return used_ >= warmup_; }
  long long total_pushed() const { return pushed_; }

  // Uniform sampling with replacement; throws StateError before warmup.
  std::vector<Transition> sample(std::size_t batch, Rng& rng) const;
  Transition at(std::size_t index) const;

 private:
  struct Packed {
    std::uint8_t phase = 0;
    std::array<std::uint16_t, sim::kLanesPerIntersection> counts{};
  };
  struct Record {
    Packed obs;
    std::array<Packed, 4> neighbors;
    Packed next_obs;
    std::array<Packed, 4> next_neighbors;
    std::uint8_t neighbor_count = 0;
    std::uint8_t action = 0;
    double reward = 0.0;
  };

  Packed pack(const sim::Observation& o) const;
  sim::Observation unpack(const Packed& p) const;

  std::size_t capacity_;
  std::size_t warmup_;
  double scale_;
  std::vector<Record> records_;
  std::size_t next_ = 0;
  std::size_t used_ = 0;
  long long pushed_ = 0;
};

}  // namespace plight::agent
