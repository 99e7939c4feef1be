#include "plight/transfer/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "plight/errors.hpp"

namespace plight::transfer {

double embedding_distance(const AverageEncoder& avg, std::span<const double> predicted,
                          std::span<const double> actual) {
  const nn::Vector z_hat = avg.embed(predicted);
  const nn::Vector z = avg.embed(actual);
  return nn::l2_distance(z_hat, z);
}

double step_distance(const agent::Network& agent, const AverageEncoder& avg, const sim::Observation& obs,
                     std::span<const sim::Observation> neighbors, int action, const sim::Observation& next_obs) {
  const nn::Vector features = agent::encode(agent, obs, neighbors);
  const nn::Vector predicted = agent::predict_next(agent, features, action);
  return embedding_distance(avg, predicted, next_obs.view());
}

double temporal_weight(std::span<const double> distances, double lambda) {
  if (distances.empty()) throw ContractError("temporal weight needs at least one distance");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ContractError("lambda must lie in (0, 1]");
  double sum = 0.0;
  double w = 1.0;
  for (std::size_t j = distances.size(); j-- > 0;) {
    sum += w * distances[j];
    w *= lambda;
  }
  return -sum;
}

std::vector<double> guide_distribution(std::span<const double> weights) {
  if (weights.empty()) throw ContractError("guide distribution over an empty pool");
  for (double w : weights) {
    if (!std::isfinite(w)) throw ContractError("guide weights must be finite");
  }
  return nn::softmax(weights);
}

SimilarityTracker::SimilarityTracker(int intersections, std::size_t members, int period, double lambda)
    : intersections_(intersections), members_(members), period_(period), lambda_(lambda) {
  if (intersections < 1 || members < 1) throw ContractError("tracker needs intersections and pool members");
  if (period < 1) throw ContractError("similarity period must be positive");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ContractError("lambda must lie in (0, 1]");
  rings_.resize(static_cast<std::size_t>(intersections) * members);
  for (auto& r : rings_) r.reserve(static_cast<std::size_t>(period));
}

void SimilarityTracker::record(int intersection, std::size_t member, double distance) {
  if (intersection < 0 || intersection >= intersections_ || member >= members_) {
    throw ContractError("tracker index out of range");
  }
  if (!(distance >= 0.0) || !std::isfinite(distance)) throw ContractError("distances must be finite and nonnegative");
  auto& ring = rings_[static_cast<std::size_t>(intersection) * members_ + member];
  if (static_cast<int>(ring.size()) == period_) ring.erase(ring.begin());
  ring.push_back(distance);
}

void SimilarityTracker::clear() {
  for (auto& r : rings_) r.clear();
}

std::span<const double> SimilarityTracker::history(int intersection, std::size_t member) const {
  if (intersection < 0 || intersection >= intersections_ || member >= members_) {
    throw ContractError("tracker index out of range");
  }
  return rings_[static_cast<std::size_t>(intersection) * members_ + member];
}

int SimilarityTracker::window_length(int intersection) const {
  return static_cast<int>(history(intersection, 0).size());
}

std::vector<double> SimilarityTracker::weights(int intersection) const {
  std::vector<double> out(members_);
  for (std::size_t k = 0; k < members_; ++k) out[k] = temporal_weight(history(intersection, k), lambda_);
  return out;
}

int sample_index(std::span<const double> probabilities, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = -1;
  for (std::size_t k = 0; k < probabilities.size(); ++k) {
    if (probabilities[k] <= 0.0) continue;
    acc += probabilities[k];
    last = static_cast<int>(k);
    if (u < acc) return last;
  }
  if (last < 0) throw ContractError("distribution has no positive mass");
  return last;
}

GuideAssignment sample_guides(const SimilarityTracker& tracker, std::size_t num_sources, bool first_window,
                              Rng& rng) {
  if (num_sources == 0 || num_sources + 1 != tracker.members()) {
    throw ContractError("tracker does not match the pool size");
  }
  GuideAssignment out;
  out.uniform = first_window;
  const int n = tracker.intersections();
  out.guides.resize(n);
  out.probabilities.resize(n);
  for (int i = 0; i < n; ++i) {
    if (first_window) {
      out.probabilities[i].assign(num_sources + 1, 1.0 / static_cast<double>(num_sources));
      out.probabilities[i][num_sources] = 0.0;
      out.guides[i] = static_cast<int>(rng.below(num_sources));
    } else {
      out.probabilities[i] = guide_distribution(tracker.weights(i));
      out.guides[i] = sample_index(out.probabilities[i], rng);
    }
  }
  return out;
}

}  // namespace plight::transfer
