#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "plight/agent/trainer.hpp"
#include "plight/transfer/pool.hpp"
#include "plight/transfer/similarity.hpp"

namespace plight::transfer {

struct TransferConfig {
  int period = 40;             // m, decision steps between guide draws
  double lambda = 0.95;        // temporal discount on distances
  double guide_epsilon = 0.1;  // uniform random action probability

  void validate() const;
};

// One guide draw for one intersection.
struct GuideEvent {
  int episode = 0;
  int step = 0;
  int intersection = 0;
  int guide = 0;
  std::vector<double> weights;  // D per pool member; empty for the uniform first window
  double probability = 0.0;     // probability of the drawn guide
  double m_tt_running = 0.0;
};

struct TransferEpisodeLog {
  agent::EpisodeLog log;
  // Selection probability of each pool member averaged over all draws of
  // the episode (every intersection, every window).
  std::vector<double> mean_selection;
};

struct TransferResult {
  agent::AgentModel target;
  int initial_member = -1;  // source copied into the target at the start
  std::vector<TransferEpisodeLog> episodes;
  std::vector<GuideEvent> events;
  std::size_t buffer_size = 0;
};

// Target-domain training with a frozen agent pool. The target starts as a
// copy of a random source; intersections act greedily under their sampled
// guide (with guide_epsilon exploration) and only the target is trained.
TransferResult transfer_train(AgentPool& pool, const agent::EnvConfig& env, const agent::TrainConfig& train_config,
                              const TransferConfig& config, int episodes, std::uint64_t seed,
                              const agent::EpisodeCallback& on_episode = {});

// CSV: episode,step,intersection,guide_index,D_values,probability,m_tt_running
// D_values are ';'-separated in pool order.
void write_transfer_log(std::ostream& out, const std::vector<GuideEvent>& events);

}  // namespace plight::transfer
