#include "plight/nn/layers.hpp"

#include <cmath>

#include "plight/errors.hpp"

namespace plight::nn {

namespace {

void require_recorded(bool recorded, const char* block) {
  if (!recorded) throw StateError(std::string("backward called on ") + block + " without a recorded forward pass");
}

void uniform_fill(Matrix& m, double bound, Rng& rng) {
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
}

}  // namespace

Dense::Dense(std::size_t in, std::size_t out, Activation act) : weight(out, in), bias(out, 1), activation(act) {
  if (in == 0 || out == 0) throw ShapeError("dense layer dimensions must be positive");
}

void Dense::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
  uniform_fill(weight.value, bound, rng);
  uniform_fill(bias.value, bound, rng);
}

void Dense::forward(std::span<const double> x, std::span<double> y) const {
  if (x.size() != in_dim()) {
    throw ShapeError("dense input has " + std::to_string(x.size()) + " entries, expected " + std::to_string(in_dim()));
  }
  matvec(weight.value, x, y);
  const auto b = bias.value.data();
  for (std::size_t j = 0; j < y.size(); ++j) {
    y[j] += b[j];
    if (activation == Activation::kReLU && y[j] < 0.0) y[j] = 0.0;
  }
}

const Vector& Dense::forward(std::span<const double> x, Cache& cache) const {
  if (x.size() != in_dim()) {
    throw ShapeError("dense input has " + std::to_string(x.size()) + " entries, expected " + std::to_string(in_dim()));
  }
  cache.input.assign(x.begin(), x.end());
  cache.pre.resize(out_dim());
  matvec(weight.value, x, cache.pre);
  const auto b = bias.value.data();
  for (std::size_t j = 0; j < cache.pre.size(); ++j) cache.pre[j] += b[j];
  cache.output = cache.pre;
  if (activation == Activation::kReLU) {
    for (double& v : cache.output) v = v < 0.0 ? 0.0 : v;
  }
  cache.recorded = true;
  return cache.output;
}

void Dense::backward(const Cache& cache, std::span<const double> dy, std::span<double> dx) {
  require_recorded(cache.recorded, "dense layer");
  if (dy.size() != out_dim()) throw ShapeError("dense backward gradient has wrong length");
  thread_local Vector dpre;
  dpre.assign(dy.begin(), dy.end());
  if (activation == Activation::kReLU) {
    for (std::size_t j = 0; j < dpre.size(); ++j) {
      if (cache.pre[j] <= 0.0) dpre[j] = 0.0;
    }
  }
  outer_add(weight.grad, dpre, cache.input);
  auto gb = bias.grad.data();
  for (std::size_t j = 0; j < dpre.size(); ++j) gb[j] += dpre[j];
  if (!dx.empty()) {
    if (dx.size() != in_dim()) throw ShapeError("dense backward input gradient has wrong length");
    std::fill(dx.begin(), dx.end(), 0.0);
    matvec_transpose_add(weight.value, dpre, dx);
  }
}

MLPBlock::MLPBlock(const std::vector<std::size_t>& dims, const std::vector<Activation>& activations) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1) throw ShapeError("MLP needs n+1 dims and n activations");
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) layers.emplace_back(dims[i], dims[i + 1], activations[i]);
}

void MLPBlock::init_uniform(Rng& rng) {
  for (auto& l : layers) l.init_uniform(rng);
}

Vector MLPBlock::forward(std::span<const double> x) const {
  Vector cur(x.begin(), x.end());
  Vector next;
  for (const auto& l : layers) {
    next.resize(l.out_dim());
    l.forward(cur, next);
    cur.swap(next);
  }
  return cur;
}

const Vector& MLPBlock::forward(std::span<const double> x, Cache& cache) const {
  cache.layers.resize(layers.size());
  std::span<const double> cur = x;
  for (std::size_t i = 0; i < layers.size(); ++i) cur = layers[i].forward(cur, cache.layers[i]);
  cache.recorded = true;
  return cache.layers.back().output;
}

void MLPBlock::backward(const Cache& cache, std::span<const double> dy, std::span<double> dx) {
  require_recorded(cache.recorded, "MLP block");
  Vector grad(dy.begin(), dy.end());
  Vector below;
  for (std::size_t i = layers.size(); i-- > 0;) {
    if (i == 0) {
      layers[0].backward(cache.layers[0], grad, dx);
    } else {
      below.assign(layers[i].in_dim(), 0.0);
      layers[i].backward(cache.layers[i], grad, below);
      grad.swap(below);
    }
  }
}

AttentionBlock::AttentionBlock(std::size_t dim) : wq(dim, dim), wk(dim, dim), wv(dim, dim) {
  if (dim == 0) throw ShapeError("attention dimension must be positive");
}

void AttentionBlock::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim()));
  uniform_fill(wq.value, bound, rng);
  uniform_fill(wk.value, bound, rng);
  uniform_fill(wv.value, bound, rng);
}

Vector AttentionBlock::forward(std::span<const double> query, std::span<const Vector> keys, Vector* weights) const {
  Cache cache;
  forward(query, keys, cache);
  if (weights) *weights = cache.weights;
  return cache.output;
}

const Vector& AttentionBlock::forward(std::span<const double> query, std::span<const Vector> keys,
                                      Cache& cache) const {
  const std::size_t d = dim();
  if (keys.empty()) throw ContractError("attention needs at least one key");
  if (query.size() != d) throw ShapeError("attention query has wrong dimension");
  const std::size_t n = keys.size();
  cache.query.assign(query.begin(), query.end());
  cache.keys.resize(n);
  cache.key_proj.resize(n);
  cache.value_proj.resize(n);
  cache.query_proj.resize(d);
  matvec(wq.value, query, cache.query_proj);
  Vector scores(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t j = 0; j < n; ++j) {
    if (keys[j].size() != d) throw ShapeError("attention key has wrong dimension");
    cache.keys[j] = keys[j];
    cache.key_proj[j].resize(d);
    cache.value_proj[j].resize(d);
    matvec(wk.value, keys[j], cache.key_proj[j]);
    matvec(wv.value, keys[j], cache.value_proj[j]);
    scores[j] = dot(cache.query_proj, cache.key_proj[j]) * scale;
  }
  cache.weights = softmax(scores);
  cache.output.assign(d, 0.0);
  for (std::size_t j = 0; j < n; ++j) axpy(cache.weights[j], cache.value_proj[j], cache.output);
  cache.recorded = true;
  return cache.output;
}

void AttentionBlock::backward(const Cache& cache, std::span<const double> dout, std::span<double> dquery,
                              std::vector<Vector>& dkeys) {
  require_recorded(cache.recorded, "attention block");
  const std::size_t d = dim();
  const std::size_t n = cache.keys.size();
  if (dout.size() != d || dquery.size() != d || dkeys.size() != n) throw ShapeError("attention backward shape mismatch");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  // dL/dw_j = <dout, v_j>; softmax Jacobian gives ds_j = w_j (dw_j - sum_k w_k dw_k).
  Vector dw(n);
  double weighted = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    dw[j] = dot(dout, cache.value_proj[j]);
    weighted += cache.weights[j] * dw[j];
  }
  Vector dqp(d, 0.0);
  Vector dkp(d);
  Vector dvp(d);
  for (std::size_t j = 0; j < n; ++j) {
    const double ds = cache.weights[j] * (dw[j] - weighted) * scale;
    axpy(ds, cache.key_proj[j], dqp);
    for (std::size_t c = 0; c < d; ++c) {
      dkp[c] = ds * cache.query_proj[c];
      dvp[c] = cache.weights[j] * dout[c];
    }
    outer_add(wk.grad, dkp, cache.keys[j]);
    outer_add(wv.grad, dvp, cache.keys[j]);
    if (dkeys[j].size() != d) throw ShapeError("attention key gradient has wrong dimension");
    matvec_transpose_add(wk.value, dkp, dkeys[j]);
    matvec_transpose_add(wv.value, dvp, dkeys[j]);
  }
  outer_add(wq.grad, dqp, cache.query);
  matvec_transpose_add(wq.value, dqp, dquery);
}

DuelingHead::DuelingHead(std::size_t in, std::size_t hidden, std::size_t actions)
    : value({in, hidden, 1}, {Activation::kReLU, Activation::kIdentity}),
      advantage({in, hidden, actions}, {Activation::kReLU, Activation::kIdentity}) {}

void DuelingHead::init_uniform(Rng& rng) {
  value.init_uniform(rng);
  advantage.init_uniform(rng);
}

namespace {

void combine(double v, std::span<const double> a, Vector& q) {
  double mean = 0.0;
  for (double x : a) mean += x;
  mean /= static_cast<double>(a.size());
  q.resize(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) q[k] = v + a[k] - mean;
}

}  // namespace

Vector DuelingHead::forward(std::span<const double> h) const {
  const Vector v = value.forward(h);
  const Vector a = advantage.forward(h);
  Vector q;
  combine(v[0], a, q);
  return q;
}

const Vector& DuelingHead::forward(std::span<const double> h, Cache& cache) const {
  const Vector& v = value.forward(h, cache.value);
  const Vector& a = advantage.forward(h, cache.advantage);
  combine(v[0], a, cache.q);
  cache.recorded = true;
  return cache.q;
}

void DuelingHead::backward(const Cache& cache, std::span<const double> dq, std::span<double> dh) {
  require_recorded(cache.recorded, "dueling head");
  if (dq.size() != actions()) throw ShapeError("dueling backward gradient has wrong length");
  double total = 0.0;
  for (double g : dq) total += g;
  const double mean = total / static_cast<double>(dq.size());
  Vector da(dq.size());
  for (std::size_t k = 0; k < dq.size(); ++k) da[k] = dq[k] - mean;
  const double dv[1] = {total};
  Vector dh_value(dh.size(), 0.0);
  value.backward(cache.value, dv, dh_value);
  advantage.backward(cache.advantage, da, dh);
  axpy(1.0, dh_value, dh);
}

}  // namespace plight::nn
