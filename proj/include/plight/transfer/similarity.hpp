#pragma once

#include <span>
#include <vector>

#include "plight/agent/model.hpp"
#include "plight/rng.hpp"
#include "plight/transfer/pool.hpp"

namespace plight::transfer {

// d_t = || e(o_hat') - e(o') ||_2 where o_hat' is the agent's decoder
// prediction and e is the average encoder's embedding layer.
double step_distance(const agent::Network& agent, const AverageEncoder& avg, const sim::Observation& obs,
                     std::span<const sim::Observation> neighbors, int action, const sim::Observation& next_obs);

// Distance between the embeddings of a predicted and a true observation.
double embedding_distance(const AverageEncoder& avg, std::span<const double> predicted,
                          std::span<const double> actual);

// D = -sum_j lambda^age_j * d_j over distances listed oldest first; the
// newest entry has age 0.
double temporal_weight(std::span<const double> distances, double lambda);

// softmax(weights), max-subtracted.
std::vector<double> guide_distribution(std::span<const double> weights);

// Last `period` distances per intersection and pool member.
class SimilarityTracker {
 public:
  SimilarityTracker(int intersections, std::size_t members, int period, double lambda);

  void record(int intersection, std::size_t member, double distance);
  void clear();

  // D for every pool member of one intersection.
  std::vector<double> weights(int intersection) const;
  std::span<const double> history(int intersection, std::size_t member) const;
  int window_length(int intersection) const;

  int intersections() const { return intersections_; }
  std::size_t members() const { return members_; }
  int period() const { return period_; }
  double lambda() const { return lambda_; }

 private:
  int intersections_;
  std::size_t members_;
  int period_;
  double lambda_;
  // Rings stored as contiguous vectors holding the oldest entry first.
  std::vector<std::vector<double>> rings_;
};

struct GuideAssignment {
  std::vector<int> guides;                      // pool index per intersection
  std::vector<std::vector<double>> probabilities;  // distribution each guide was drawn from
  bool uniform = false;
};

// Uniform over the K sources during the first window of an episode;
// afterwards, per intersection, a draw from guide_distribution(D_1..D_K, D_tar).
GuideAssignment sample_guides(const SimilarityTracker& tracker, std::size_t num_sources, bool first_window,
                              Rng& rng);

// Index drawn from a discrete distribution (inverse CDF).
int sample_index(std::span<const double> probabilities, Rng& rng);

}  // namespace plight::transfer
