#include "plight/transfer/transfer.hpp"

#include <ostream>

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::transfer {

void TransferConfig::validate() const {
  if (period < 1) throw ConfigError("similarity period m must be positive");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in (0, 1]");
  if (!(guide_epsilon >= 0.0 && guide_epsilon <= 1.0)) throw ConfigError("guide epsilon must lie in [0, 1]");
}

TransferResult transfer_train(AgentPool& pool, const agent::EnvConfig& env, const agent::TrainConfig& train_config,
                              const TransferConfig& config, int episodes, std::uint64_t seed,
                              const agent::EpisodeCallback& on_episode) {
  config.validate();
  train_config.validate();
  if (episodes < 0) throw ContractError("episode count must be non-negative");
  check_compatible(pool.sources(), sim::kObservationSize);

  const std::size_t K = pool.num_sources();
  Rng init_rng(mix_seed(seed, 0x54494E49ULL));
  TransferResult result;
  result.initial_member = static_cast<int>(init_rng.below(K));
  {
    agent::AgentModel target = pool.source(static_cast<std::size_t>(result.initial_member)).fresh_copy();
    target.source_flow = env.flow.name;
    target.grid_rows = env.rows;
    target.grid_cols = env.cols;
    target.seed = seed;
    pool.set_target(std::move(target));
  }
  if (episodes == 0) {
    result.target = pool.target();
    return result;
  }

  const AverageEncoder avg = average_encoder(pool);
  agent::AgentModel& model = pool.target();
  sim::Simulator simulator = env.make_simulator();
  const auto& net = simulator.network();
  const int n = net.size();
  const std::size_t members = pool.size();
  const std::size_t actions_n = model.config().actions;

  SimilarityTracker tracker(n, members, config.period, config.lambda);
  agent::ReplayBuffer buffer(train_config.buffer_capacity, train_config.warmup, env.sim.observation_scale);
  Rng act_rng(mix_seed(seed, 0x41435421ULL));
  Rng replay_rng(mix_seed(seed, 0x52504C59ULL));
  Rng guide_rng(mix_seed(seed, 0x47554944ULL));

  std::vector<int> actions(n);
  std::vector<std::vector<sim::Observation>> neighbors(n);
  for (int e = 1; e <= episodes; ++e) {
    simulator.reset();
    tracker.clear();
    auto obs = simulator.observations();
    GuideAssignment assignment;
    std::vector<double> selection(members, 0.0);
    long long draws = 0;
    double sum_d = 0.0;
    double sum_q = 0.0;
    long long trained = 0;

    while (!simulator.done()) {
      const int t = simulator.step_index();
      if (t % config.period == 0) {
        assignment = sample_guides(tracker, K, t == 0, guide_rng);
        const double running = simulator.running_travel_time();
        for (int i = 0; i < n; ++i) {
          GuideEvent ev;
          ev.episode = e;
          ev.step = t;
          ev.intersection = i;
          ev.guide = assignment.guides[i];
          if (!assignment.uniform) ev.weights = tracker.weights(i);
          ev.probability = assignment.probabilities[i][static_cast<std::size_t>(ev.guide)];
          ev.m_tt_running = running;
          result.events.push_back(std::move(ev));
          for (std::size_t k = 0; k < members; ++k) selection[k] += assignment.probabilities[i][k];
          ++draws;
        }
      }

      for (int i = 0; i < n; ++i) {
        neighbors[i] = agent::neighbor_observations(net, obs, i);
        if (act_rng.uniform() < config.guide_epsilon) {
          actions[i] = static_cast<int>(act_rng.below(actions_n));
        } else {
          const agent::Network& guide = pool.member(static_cast<std::size_t>(assignment.guides[i]));
          actions[i] = agent::greedy_action(agent::q_values(guide, agent::encode(guide, obs[i], neighbors[i])));
        }
      }

      auto step = simulator.step(actions);
      for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < members; ++k) {
          tracker.record(i, k,
                         step_distance(pool.member(k), avg, obs[i], neighbors[i], actions[i], step.observations[i]));
        }
      }
      for (const auto& tr : agent::make_transitions(net, obs, actions, step.rewards, step.observations)) {
        buffer.push(tr);
      }
      if (buffer.ready()) {
        const auto batch = buffer.sample(train_config.batch_size, replay_rng);
        const auto loss = agent::train_batch(model, batch, train_config);
        sum_d += loss.loss_d;
        sum_q += loss.loss_q;
        ++trained;
      }
      obs = std::move(step.observations);
    }

    TransferEpisodeLog log;
    log.log.episode = e;
    log.log.metrics = simulator.metrics();
    log.log.mean_loss_d = trained ? sum_d / static_cast<double>(trained) : 0.0;
    log.log.mean_loss_q = trained ? sum_q / static_cast<double>(trained) : 0.0;
    log.log.gradient_steps = model.gradient_steps;
    for (double& s : selection) s /= static_cast<double>(draws);
    log.mean_selection = std::move(selection);
    result.episodes.push_back(std::move(log));
    if (on_episode) on_episode(e, simulator);
  }
  result.buffer_size = buffer.size();
  result.target = pool.target();
  return result;
}

void write_transfer_log(std::ostream& out, const std::vector<GuideEvent>& events) {
  out << "episode,step,intersection,guide_index,D_values,probability,m_tt_running\n";
  for (const auto& ev : events) {
    out << ev.episode << ',' << ev.step << ',' << ev.intersection << ',' << ev.guide << ',';
    for (std::size_t k = 0; k < ev.weights.size(); ++k) {
      if (k) out << ';';
      out << format_double(ev.weights[k]);
    }
    out << ',' << format_double(ev.probability) << ',' << format_double(ev.m_tt_running) << '\n';
  }
}

}  // namespace plight::transfer
