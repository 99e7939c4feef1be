#include "plight/nn/optim.hpp"

#include <cmath>

#include "plight/errors.hpp"

namespace plight::nn {

double sum_squares(std::span<const double> x, std::span<double> grad) {
  if (grad.size() != x.size()) throw ShapeError("gradient buffer has wrong length");
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += x[i] * x[i];
    grad[i] = 2.0 * x[i];
  }
  return total;
}

double euclidean_loss(std::span<const double> pred, std::span<const double> target, std::span<double> grad) {
  if (pred.size() != target.size() || grad.size() != pred.size()) throw ShapeError("euclidean loss shape mismatch");
  const double dist = l2_distance(pred, target);
  for (std::size_t i = 0; i < pred.size(); ++i) grad[i] = dist > 0.0 ? (pred[i] - target[i]) / dist : 0.0;
  return dist;
}

void Adam::step(std::span<Param* const> params) {
  if (m_.empty()) {
    for (const Param* p : params) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (params.size() != m_.size()) throw ShapeError("optimizer parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->grad.same_shape(m_[i]) || !params[i]->value.same_shape(m_[i])) {
      throw ShapeError("optimizer parameter shape changed between steps");
    }
    if (!params[i]->grad.all_finite()) throw ContractError("non-finite gradient; update rejected");
  }
  ++steps_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.data();
    auto g = params[i]->grad.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

}  // namespace plight::nn
