#include "plight/agent/model.hpp"

#include <bit>
#include <cstring>

#include "plight/errors.hpp"
#include "plight/kv.hpp"

namespace plight::agent {

void ModelConfig::validate() const {
  if (obs_dim == 0 || embed_dim == 0 || decoder_hidden == 0 || q_hidden == 0 || actions == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("discount gamma must lie in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

Vector Encoder::embed_only(std::span<const double> obs) const {
  Vector h(embed.out_dim());
  embed.forward(obs, h);
  return h;
}

Vector Encoder::forward(const Observation& obs, std::span<const Observation> neighbors) const {
  std::vector<Vector> features;
  features.reserve(neighbors.size() + 1);
  features.push_back(embed_only(obs.view()));
  for (const auto& n : neighbors) features.push_back(embed_only(n.view()));
  return attention.forward(features[0], features);
}

const Vector& Encoder::forward(const Observation& obs, std::span<const Observation> neighbors, Cache& cache) const {
  const std::size_t n = neighbors.size() + 1;
  cache.embeds.resize(n);
  cache.features.resize(n);
  cache.features[0] = embed.forward(obs.view(), cache.embeds[0]);
  for (std::size_t j = 1; j < n; ++j) cache.features[j] = embed.forward(neighbors[j - 1].view(), cache.embeds[j]);
  const Vector& out = attention.forward(cache.features[0], cache.features, cache.attention);
  cache.recorded = true;
  return out;
}

void Encoder::backward(const Cache& cache, std::span<const double> dout) {
  if (!cache.recorded) throw StateError("backward called on encoder without a recorded forward pass");
  const std::size_t n = cache.features.size();
  const std::size_t d = attention.dim();
  Vector dquery(d, 0.0);
  std::vector<Vector> dkeys(n, Vector(d, 0.0));
  attention.backward(cache.attention, dout, dquery, dkeys);
  // The intersection's own feature is both the query and the first key.
  nn::axpy(1.0, dquery, dkeys[0]);
  for (std::size_t j = 0; j < n; ++j) embed.backward(cache.embeds[j], dkeys[j], {});
}

std::vector<nn::Param*> Network::params() {
  std::vector<nn::Param*> out;
  for_each_param([&](const std::string&, nn::Param& p) { out.push_back(&p); });
  return out;
}

void Network::zero_grad() {
  for_each_param([](const std::string&, nn::Param& p) { p.zero_grad(); });
}

std::uint64_t Network::checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for_each_param([&](const std::string& name, const nn::Param& p) {
    for (char c : name) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
    for (double v : p.value.data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) h = (h ^ ((bits >> (8 * b)) & 0xFFu)) * 1099511628211ULL;
    }
  });
  return h;
}

bool Network::same_values(const Network& other) const {
  std::vector<const nn::Matrix*> mine;
  std::vector<const nn::Matrix*> theirs;
  for_each_param([&](const std::string&, const nn::Param& p) { mine.push_back(&p.value); });
  other.for_each_param([&](const std::string&, const nn::Param& p) { theirs.push_back(&p.value); });
  if (mine.size() != theirs.size()) return false;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (!mine[i]->same_shape(*theirs[i])) return false;
    if (std::memcmp(mine[i]->data().data(), theirs[i]->data().data(), mine[i]->size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

namespace {

Network make_network(const ModelConfig& c) {
  Network net;
  net.encoder.embed = nn::Dense(c.obs_dim, c.embed_dim, nn::Activation::kReLU);
  net.encoder.attention = nn::AttentionBlock(c.embed_dim);
  if (c.with_decoder) {
    net.decoder = nn::MLPBlock({c.embed_dim + c.actions, c.decoder_hidden, c.obs_dim},
                               {nn::Activation::kReLU, nn::Activation::kIdentity});
  }
  net.qnet = nn::DuelingHead(c.embed_dim, c.q_hidden, c.actions);
  return net;
}

}  // namespace

AgentModel::AgentModel(const ModelConfig& config, std::uint64_t model_seed)
    : optimizer(nn::AdamConfig{config.learning_rate}), seed(model_seed), config_(config) {
  config_.validate();
  live = make_network(config_);
  Rng rng(mix_seed(model_seed, 0x494E4954ULL));
  live.encoder.embed.init_uniform(rng);
  live.encoder.attention.init_uniform(rng);
  if (live.decoder) live.decoder->init_uniform(rng);
  live.qnet.init_uniform(rng);
  target = live;
}

AgentModel AgentModel::fresh_copy() const {
  AgentModel copy;
  copy.config_ = config_;
  copy.live = live;
  copy.live.zero_grad();
  copy.target = copy.live;
  copy.optimizer = nn::Adam(nn::AdamConfig{config_.learning_rate});
  copy.source_flow = source_flow;
  copy.grid_rows = grid_rows;
  copy.grid_cols = grid_cols;
  copy.seed = seed;
  return copy;
}

nn::Checkpoint AgentModel::to_checkpoint() const {
  nn::Checkpoint ck;
  ck.metadata["obs_dim"] = std::to_string(config_.obs_dim);
  ck.metadata["d_model"] = std::to_string(config_.embed_dim);
  ck.metadata["decoder_hidden"] = std::to_string(config_.decoder_hidden);
  ck.metadata["q_hidden"] = std::to_string(config_.q_hidden);
  ck.metadata["actions"] = std::to_string(config_.actions);
  ck.metadata["with_decoder"] = config_.with_decoder ? "1" : "0";
  ck.metadata["gamma"] = format_double(config_.gamma);
  ck.metadata["learning_rate"] = format_double(config_.learning_rate);
  ck.metadata["seed"] = std::to_string(seed);
  ck.metadata["source_flow"] = source_flow;
  ck.metadata["grid_rows"] = std::to_string(grid_rows);
  ck.metadata["grid_cols"] = std::to_string(grid_cols);
  ck.metadata["gradient_steps"] = std::to_string(gradient_steps);
  live.for_each_param([&](const std::string& name, const nn::Param& p) { ck.tensors.emplace_back(name, p.value); });
  return ck;
}

AgentModel AgentModel::from_checkpoint(const nn::Checkpoint& ck) {
  auto size_meta = [&](const char* key) { return static_cast<std::size_t>(parse_int(ck.meta(key), key)); };
  ModelConfig c;
  c.obs_dim = size_meta("obs_dim");
  c.embed_dim = size_meta("d_model");
  c.decoder_hidden = size_meta("decoder_hidden");
  c.q_hidden = size_meta("q_hidden");
  c.actions = size_meta("actions");
  c.with_decoder = ck.meta("with_decoder") == "1";
  c.gamma = parse_double(ck.meta("gamma"), "gamma");
  c.learning_rate = parse_double(ck.meta("learning_rate"), "learning_rate");
  c.validate();

  AgentModel model;
  model.config_ = c;
  model.live = make_network(c);
  model.live.for_each_param([&](const std::string& name, nn::Param& p) {
    const auto& m = ck.tensor(name);
    if (!m.same_shape(p.value)) throw CompatibilityError("checkpoint tensor '" + name + "' has the wrong shape");
    p.value = m;
  });
  std::size_t expected = 0;
  model.live.for_each_param([&](const std::string&, const nn::Param&) { ++expected; });
  if (expected != ck.tensors.size()) throw CompatibilityError("checkpoint tensor set does not match the model");
  model.target = model.live;
  model.optimizer = nn::Adam(nn::AdamConfig{c.learning_rate});
  model.seed = parse_u64(ck.meta("seed"), "seed");
  model.source_flow = ck.meta("source_flow");
  model.grid_rows = static_cast<int>(parse_int(ck.meta("grid_rows"), "grid_rows"));
  model.grid_cols = static_cast<int>(parse_int(ck.meta("grid_cols"), "grid_cols"));
  model.gradient_steps = parse_int(ck.meta("gradient_steps"), "gradient_steps");
  return model;
}

Vector encode(const Network& net, const Observation& obs, std::span<const Observation> neighbors) {
  return net.encoder.forward(obs, neighbors);
}

Vector decoder_input(std::span<const double> features, int action, std::size_t actions) {
  if (action < 0 || static_cast<std::size_t>(action) >= actions) {
    throw ContractError("action " + std::to_string(action) + " outside the action set");
  }
  Vector in(features.begin(), features.end());
  in.resize(features.size() + actions, 0.0);
  in[features.size() + static_cast<std::size_t>(action)] = 1.0;
  return in;
}

Vector predict_next(const Network& net, std::span<const double> features, int action) {
  if (!net.decoder) throw StateError("model has no decoder");
  const std::size_t actions = net.qnet.actions();
  return net.decoder->forward(decoder_input(features, action, actions));
}

Vector q_values(const Network& net, std::span<const double> features) { return net.qnet.forward(features); }

int greedy_action(std::span<const double> q) {
  int best = 0;
  for (std::size_t a = 1; a < q.size(); ++a) {
    if (q[a] > q[best]) best = static_cast<int>(a);
  }
  return best;
}

int act(std::span<const double> q, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ContractError("epsilon must lie in [0, 1]");
  if (rng.uniform() < epsilon) return static_cast<int>(rng.below(q.size()));
  return greedy_action(q);
}

int act(const Network& net, std::span<const double> features, double epsilon, Rng& rng) {
  const Vector q = q_values(net, features);
  return act(q, epsilon, rng);
}

void sync_target(AgentModel& model) {
  model.target = model.live;
  ++model.target_syncs;
}

}  // namespace plight::agent
