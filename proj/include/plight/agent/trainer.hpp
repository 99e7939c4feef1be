#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "plight/agent/model.hpp"
#include "plight/agent/replay.hpp"
#include "plight/sim/simulator.hpp"

namespace plight::agent {

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t buffer_capacity = 100000;
  std::size_t warmup = 1000;
  int sync_every = 100;
  // Rewards enter TD targets multiplied by this.
  double reward_scale = 1.0 / 50.0;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  // Fraction of all decision steps over which epsilon anneals linearly.
  double epsilon_anneal_fraction = 0.2;

  void validate() const;
};

struct BatchLoss {
  double loss_d = 0.0;
  double loss_q = 0.0;
  double total = 0.0;
};

// L_D = mean ||decoder(h', a) - o'||_2, L_Q = mean (y - Q(o, a))^2 with
// y = scale * r + gamma * max_a' Q_target(o', a'), and L = L_D + L_Q.
BatchLoss evaluate_loss(const AgentModel& model, std::span<const Transition> batch, double reward_scale);

// Same value as evaluate_loss; adds dL/dparam into model.live gradients.
BatchLoss accumulate_gradients(AgentModel& model, std::span<const Transition> batch, double reward_scale);

// One optimizer step on L over the batch, followed by a target sync every
// `sync_every` gradient steps.
BatchLoss train_batch(AgentModel& model, std::span<const Transition> batch, const TrainConfig& config);

double epsilon_at(long long step, long long total_steps, const TrainConfig& config);

struct EnvConfig {
  int rows = 2;
  int cols = 2;
  double free_flow_s = 30.0;
  sim::FlowSpec flow;
  sim::SimConfig sim;
  std::uint64_t traffic_seed = 0;

  sim::Simulator make_simulator() const;
};

struct EpisodeLog {
  int episode = 0;
  sim::EpisodeMetrics metrics;
  double mean_loss_d = 0.0;
  double mean_loss_q = 0.0;
  long long gradient_steps = 0;
};

struct PretrainResult {
  AgentModel model;
  std::vector<EpisodeLog> episodes;
  std::size_t buffer_size = 0;
};

using EpisodeCallback = std::function<void(int episode, const sim::Simulator&)>;

// Source-agent pretraining: epsilon-greedy interaction with one shared model,
// experience replay, one gradient step per decision step after warmup, and
// periodic target synchronization.
PretrainResult pretrain(const EnvConfig& env, const ModelConfig& model_config, const TrainConfig& train_config,
                        int episodes, std::uint64_t seed, const EpisodeCallback& on_episode = {});

// CSV: episode,m_tt,m_th,m_q,mean_loss_D,mean_loss_Q
void write_training_log(std::ostream& out, const std::vector<EpisodeLog>& episodes);

}  // namespace plight::agent
