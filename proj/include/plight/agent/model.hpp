#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plight/nn/checkpoint.hpp"
#include "plight/nn/layers.hpp"
#include "plight/nn/optim.hpp"
#include "plight/rng.hpp"
#include "plight/sim/simulator.hpp"

namespace plight::agent {

using nn::Vector;
using sim::Observation;

struct ModelConfig {
  std::size_t obs_dim = sim::kObservationSize;
  std::size_t embed_dim = 32;
  std::size_t decoder_hidden = 64;
  std::size_t q_hidden = 64;
  std::size_t actions = sim::kNumPhases;
  // False for the encoder + Q-network ablation.
  bool with_decoder = true;
  double gamma = 0.8;
  double learning_rate = 1e-3;

  void validate() const;
};

// Observation embedding followed by attention over {self} and the neighbors.
struct Encoder {
  struct Cache {
    std::vector<nn::Dense::Cache> embeds;  // [0] is the intersection itself
    std::vector<Vector> features;
    nn::AttentionBlock::Cache attention;
    bool recorded = false;
  };

  nn::Dense embed;
  nn::AttentionBlock attention;

  Vector embed_only(std::span<const double> obs) const;
  Vector forward(const Observation& obs, std::span<const Observation> neighbors) const;
  const Vector& forward(const Observation& obs, std::span<const Observation> neighbors, Cache& cache) const;
  // Accumulates encoder parameter gradients for dL/dh'.
  void backward(const Cache& cache, std::span<const double> dout);

  template <class F>
  void for_each_param(const std::string& prefix, F&& f) {
    embed.for_each_param(prefix + ".embed", f);
    attention.for_each_param(prefix + ".attention", f);
  }
  template <class F>
  void for_each_param(const std::string& prefix, F&& f) const {
    embed.for_each_param(prefix + ".embed", f);
    attention.for_each_param(prefix + ".attention", f);
  }
};

// One parameter set: encoder (phi), decoder (omega, optional) and Q-network (theta).
struct Network {
  Encoder encoder;
  std::optional<nn::MLPBlock> decoder;
  nn::DuelingHead qnet;

  template <class F>
  void for_each_param(F&& f) {
    encoder.for_each_param("encoder", f);
    if (decoder) decoder->for_each_param("decoder", f);
    qnet.for_each_param("qnet", f);
  }
  template <class F>
  void for_each_param(F&& f) const {
    encoder.for_each_param("encoder", f);
    if (decoder) decoder->for_each_param("decoder", f);
    qnet.for_each_param("qnet", f);
  }

  std::vector<nn::Param*> params();
  void zero_grad();
  // FNV-1a over the bit patterns of every parameter value.
  std::uint64_t checksum() const;
  bool same_values(const Network& other) const;
};

// Live parameters, their target copies and the optimizer driving them. A
// single model is shared by every intersection of a task.
class AgentModel {
 public:
  AgentModel() = default;
  AgentModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  Network live;
  Network target;
  nn::Adam optimizer;
  long long gradient_steps = 0;
  long long target_syncs = 0;

  // Metadata carried into checkpoints.
  std::string source_flow;
  int grid_rows = 0;
  int grid_cols = 0;
  std::uint64_t seed = 0;

  nn::Checkpoint to_checkpoint() const;
  static AgentModel from_checkpoint(const nn::Checkpoint& ck);

  // Copy of the live parameters with fresh targets, optimizer and counters.
  AgentModel fresh_copy() const;

 private:
  ModelConfig config_;
};

Vector encode(const Network& net, const Observation& obs, std::span<const Observation> neighbors);
// Decoder prediction of the next observation from h' and the action.
Vector predict_next(const Network& net, std::span<const double> features, int action);
Vector q_values(const Network& net, std::span<const double> features);

// Index of the largest entry; ties go to the lowest index.
int greedy_action(std::span<const double> q);
// Uniform random action with probability epsilon, otherwise greedy.
int act(std::span<const double> q, double epsilon, Rng& rng);
int act(const Network& net, std::span<const double> features, double epsilon, Rng& rng);

// Hard copy of live parameters into the target copies.
void sync_target(AgentModel& model);

// Decoder input: h' followed by a one-hot action.
Vector decoder_input(std::span<const double> features, int action, std::size_t actions);

}  // namespace plight::agent
