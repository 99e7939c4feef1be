#pragma once

#include <span>
#include <vector>

#include "plight/nn/layers.hpp"

namespace plight::nn {

// Loss primitives; each returns the value and writes dL/dx into grad.
double sum_squares(std::span<const double> x, std::span<double> grad);
// ||pred - target||_2 (not squared). The gradient at a zero residual is zero.
double euclidean_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adaptive-moment optimizer with bias correction. The parameter list passed to
// step() must keep the same order and shapes across calls.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Rejects the whole update (throws ContractError, nothing modified) when any
  // gradient entry is non-finite.
  void step(std::span<Param* const> params);

  long long step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  long long steps_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace plight::nn
