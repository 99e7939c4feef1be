#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "plight/nn/matrix.hpp"
#include "plight/rng.hpp"

namespace plight::nn {

enum class Activation { kIdentity, kReLU };

// A trainable tensor and its accumulated gradient.
struct Param {
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::size_t rows, std::size_t cols) : value(rows, cols), grad(rows, cols) {}

  void zero_grad() { grad.fill(0.0); }
};

// Fully connected layer y = act(W x + b) with W stored out x in.
class Dense {
 public:
  struct Cache {
    Vector input;
    Vector pre;
    Vector output;
    bool recorded = false;
  };

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Activation activation);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform(Rng& rng);

  void forward(std::span<const double> x, std::span<double> y) const;
  const Vector& forward(std::span<const double> x, Cache& cache) const;
  // Accumulates parameter gradients; writes dL/dx into `dx` when non-empty.
  void backward(const Cache& cache, std::span<const double> dy, std::span<double> dx);

  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return weight.value.rows(); }

  template <class F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
  template <class F>
  void for_each_param(const std::string& prefix, F&& f) const {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  Param weight;
  Param bias;  // out x 1
  Activation activation = Activation::kIdentity;
};

// Chain of dense layers.
class MLPBlock {
 public:
  struct Cache {
    std::vector<Dense::Cache> layers;
    bool recorded = false;
  };

  MLPBlock() = default;
  // dims = {in, hidden..., out}; activations has dims.size() - 1 entries.
  MLPBlock(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations);

  void init_uniform(Rng& rng);

  Vector forward(std::span<const double> x) const;
  const Vector& forward(std::span<const double> x, Cache& cache) const;
  void backward(const Cache& cache, std::span<const double> dy, std::span<double> dx);

  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }

  template <class F>
  void for_each_param(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].for_each_param(prefix + "." + std::to_string(i), f);
  }
  template <class F>
  void for_each_param(const std::string& prefix, F&& f) const {
    for (std::size_t i = 0; i < layers.size(); ++i) layers[i].for_each_param(prefix + "." + std::to_string(i), f);
  }

  std::vector<Dense> layers;
};

// Single-head scaled dot-product attention of one query over a key set,
// with keys doubling as values.
class AttentionBlock {
 public:
  struct Cache {
    Vector query;
    std::vector<Vector> keys;
    Vector query_proj;
    std::vector<Vector> key_proj;
    std::vector<Vector> value_proj;
    Vector weights;
    Vector output;
    bool recorded = false;
  };

  AttentionBlock() = default;
  explicit AttentionBlock(std::size_t dim);

  void init_uniform(Rng& rng);

  Vector forward(std::span<const double> query, std::span<const Vector> keys, Vector* weights = nullptr) const;
  const Vector& forward(std::span<const double> query, std::span<const Vector> keys, Cache& cache) const;
  // Accumulates into dquery and dkeys (which must be sized like the inputs).
  void backward(const Cache& cache, std::span<const double> dout, std::span<double> dquery,
                std::vector<Vector>& dkeys);

  std::size_t dim() const { return wq.value.rows(); }

  template <class F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".wq", wq);
    f(prefix + ".wk", wk);
    f(prefix + ".wv", wv);
  }
  template <class F>
  void for_each_param(const std::string& prefix, F&& f) const {
    f(prefix + ".wq", wq);
    f(prefix + ".wk", wk);
    f(prefix + ".wv", wv);
  }

  Param wq;
  Param wk;
  Param wv;
};

// q = V(h) + A(h) - mean(A(h)).
class DuelingHead {
 public:
  struct Cache {
    MLPBlock::Cache value;
    MLPBlock::Cache advantage;
    Vector q;
    bool recorded = false;
  };

  DuelingHead() = default;
  DuelingHead(std::size_t in, std::size_t hidden, std::size_t actions);

  void init_uniform(Rng& rng);

  Vector forward(std::span<const double> h) const;
  const Vector& forward(std::span<const double> h, Cache& cache) const;
  void backward(const Cache& cache, std::span<const double> dq, std::span<double> dh);

  std::size_t actions() const { return advantage.out_dim(); }

  template <class F>
  void for_each_param(const std::string& prefix, F&& f) {
    value.for_each_param(prefix + ".value", f);
    advantage.for_each_param(prefix + ".advantage", f);
  }
  template <class F>
  void for_each_param(const std::string& prefix, F&& f) const {
    value.for_each_param(prefix + ".value", f);
    advantage.for_each_param(prefix + ".advantage", f);
  }

  MLPBlock value;
  MLPBlock advantage;
};

}  // namespace plight::nn
