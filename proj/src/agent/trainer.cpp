#include "plight/agent/trainer.hpp"

#include <algorithm>
#include <ostream>

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::agent {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (warmup == 0 || warmup > buffer_capacity) throw ConfigError("warmup must lie in [1, buffer capacity]");
  if (sync_every < 1) throw ConfigError("target sync interval must be positive");
  if (!(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0)) {
    throw ConfigError("epsilon bounds must lie in [0, 1]");
  }
  if (!(epsilon_anneal_fraction >= 0.0 && epsilon_anneal_fraction <= 1.0)) {
    throw ConfigError("epsilon anneal fraction must lie in [0, 1]");
  }
}

namespace {

struct SampleWork {
  Encoder::Cache encoder;
  nn::DuelingHead::Cache qnet;
  nn::MLPBlock::Cache decoder;
  Vector decoder_in;
};

BatchLoss run_batch(const AgentModel& model, std::span<const Transition> batch, double reward_scale,
                    AgentModel* grads) {
  if (batch.empty()) throw ContractError("empty training batch");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const double gamma = model.config().gamma;
  const std::size_t actions = model.config().actions;
  const std::size_t d = model.config().embed_dim;
  SampleWork work;
  Vector dq(actions);
  Vector dh(d);
  Vector ddec;
  Vector dpred(model.config().obs_dim);
  BatchLoss loss;

  for (const auto& t : batch) {
    if (t.action < 0 || static_cast<std::size_t>(t.action) >= actions) throw ContractError("transition action out of range");
    // TD target from the frozen copies (phi-, theta-).
    const Vector next_features = model.target.encoder.forward(t.next_obs, t.next_neighbors);
    const Vector next_q = model.target.qnet.forward(next_features);
    const double y = reward_scale * t.reward + gamma * *std::max_element(next_q.begin(), next_q.end());

    const Vector& features = model.live.encoder.forward(t.obs, t.neighbors, work.encoder);
    const Vector& q = model.live.qnet.forward(features, work.qnet);
    const double td = y - q[t.action];
    loss.loss_q += td * td * inv_b;

    double dist = 0.0;
    const Vector* pred = nullptr;
    if (model.live.decoder) {
      work.decoder_in = decoder_input(features, t.action, actions);
      pred = &model.live.decoder->forward(work.decoder_in, work.decoder);
      dist = nn::euclidean_loss(*pred, t.next_obs.view(), dpred);
      loss.loss_d += dist * inv_b;
    }

    if (grads) {
      std::fill(dq.begin(), dq.end(), 0.0);
      dq[t.action] = -2.0 * td * inv_b;
      grads->live.qnet.backward(work.qnet, dq, dh);
      if (grads->live.decoder) {
        for (double& g : dpred) g *= inv_b;
        ddec.assign(work.decoder_in.size(), 0.0);
        grads->live.decoder->backward(work.decoder, dpred, ddec);
        for (std::size_t k = 0; k < d; ++k) dh[k] += ddec[k];
      }
      grads->live.encoder.backward(work.encoder, dh);
    }
  }
  loss.total = loss.loss_d + loss.loss_q;
  return loss;
}

}  // namespace

BatchLoss evaluate_loss(const AgentModel& model, std::span<const Transition> batch, double reward_scale) {
  return run_batch(model, batch, reward_scale, nullptr);
}

BatchLoss accumulate_gradients(AgentModel& model, std::span<const Transition> batch, double reward_scale) {
  return run_batch(model, batch, reward_scale, &model);
}

BatchLoss train_batch(AgentModel& model, std::span<const Transition> batch, const TrainConfig& config) {
  model.live.zero_grad();
  const BatchLoss loss = accumulate_gradients(model, batch, config.reward_scale);
  const auto params = model.live.params();
  model.optimizer.step(params);
  ++model.gradient_steps;
  if (model.gradient_steps % config.sync_every == 0) sync_target(model);
  return loss;
}

double epsilon_at(long long step, long long total_steps, const TrainConfig& config) {
  const double horizon = config.epsilon_anneal_fraction * static_cast<double>(total_steps);
  if (horizon <= 0.0) return config.epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(step) / horizon);
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
}

sim::Simulator EnvConfig::make_simulator() const {
  return sim::Simulator(sim::build_grid(rows, cols, free_flow_s), flow, traffic_seed, sim);
}

PretrainResult pretrain(const EnvConfig& env, const ModelConfig& model_config, const TrainConfig& train_config,
                        int episodes, std::uint64_t seed, const EpisodeCallback& on_episode) {
  train_config.validate();
  if (episodes < 0) throw ContractError("episode count must be non-negative");
  PretrainResult result;
  result.model = AgentModel(model_config, mix_seed(seed, 0x4D4F444CULL));
  result.model.source_flow = env.flow.name;
  result.model.grid_rows = env.rows;
  result.model.grid_cols = env.cols;
  if (episodes == 0) return result;

  AgentModel& model = result.model;
  ReplayBuffer buffer(train_config.buffer_capacity, train_config.warmup, env.sim.observation_scale);
  Rng act_rng(mix_seed(seed, 0x41435421ULL));
  Rng replay_rng(mix_seed(seed, 0x52504C59ULL));
  sim::Simulator simulator = env.make_simulator();
  const auto& net = simulator.network();
  const long long total_steps = static_cast<long long>(episodes) * simulator.config().steps_per_episode();
  long long global_step = 0;

  std::vector<int> actions(net.size());
  for (int e = 1; e <= episodes; ++e) {
    simulator.reset();
    auto obs = simulator.observations();
    double sum_d = 0.0;
    double sum_q = 0.0;
    long long trained = 0;
    while (!simulator.done()) {
      const double eps = epsilon_at(global_step, total_steps, train_config);
      for (int i = 0; i < net.size(); ++i) {
        if (act_rng.uniform() < eps) {
          actions[i] = static_cast<int>(act_rng.below(model.config().actions));
        } else {
          const auto nb = neighbor_observations(net, obs, i);
          actions[i] = greedy_action(q_values(model.live, encode(model.live, obs[i], nb)));
        }
      }
      auto step = simulator.step(actions);
      for (const auto& t : make_transitions(net, obs, actions, step.rewards, step.observations)) buffer.push(t);
      if (buffer.ready()) {
        const auto batch = buffer.sample(train_config.batch_size, replay_rng);
        const auto loss = train_batch(model, batch, train_config);
        sum_d += loss.loss_d;
        sum_q += loss.loss_q;
        ++trained;
      }
      obs = std::move(step.observations);
      ++global_step;
    }
    EpisodeLog log;
    log.episode = e;
    log.metrics = simulator.metrics();
    log.mean_loss_d = trained ? sum_d / static_cast<double>(trained) : 0.0;
    log.mean_loss_q = trained ? sum_q / static_cast<double>(trained) : 0.0;
    log.gradient_steps = model.gradient_steps;
    result.episodes.push_back(log);
    if (on_episode) on_episode(e, simulator);
  }
  result.buffer_size = buffer.size();
  return result;
}

void write_training_log(std::ostream& out, const std::vector<EpisodeLog>& episodes) {
  out << "episode,m_tt,m_th,m_q,mean_loss_D,mean_loss_Q\n";
  for (const auto& e : episodes) {
    out << e.episode << ',' << format_double(e.metrics.m_tt) << ',' << e.metrics.m_th << ','
        << format_double(e.metrics.m_q) << ',' << format_double(e.mean_loss_d) << ','
        << format_double(e.mean_loss_q) << '\n';
  }
}

}  // namespace plight::agent
