#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "common/gradcheck.hpp"
#include "doctest.h"
#include "plight/agent/model.hpp"
#include "plight/agent/replay.hpp"
#include "plight/agent/trainer.hpp"
#include "plight/errors.hpp"

using namespace plight;
using namespace plight::agent;

namespace {

std::vector<Observation> random_neighbors(Rng& rng, std::size_t n) {
  std::vector<Observation> out;
  for (std::size_t j = 0; j < n; ++j) out.push_back(testing::random_observation(rng));
  return out;
}

// Snapshot of every parameter grouped by block prefix.
std::map<std::string, std::vector<double>> snapshot(const Network& net) {
  std::map<std::string, std::vector<double>> out;
  net.for_each_param([&](const std::string& name, const nn::Param& p) {
    const auto block = name.substr(0, name.find('.'));
    auto& v = out[block];
    v.insert(v.end(), p.value.data().begin(), p.value.data().end());
  });
  return out;
}

EnvConfig short_env(int rows = 2, int cols = 2, double horizon = 3600.0) {
  EnvConfig env;
  env.rows = rows;
  env.cols = cols;
  env.flow = *sim::find_builtin_flow("jn1");
  env.sim.horizon_s = horizon;
  env.traffic_seed = 17;
  return env;
}

}  // namespace

TEST_CASE("encode with zero weights is zero") {
  AgentModel m(ModelConfig{}, 1);
  m.live.for_each_param([](const std::string&, nn::Param& p) { p.value.fill(0.0); });
  Rng rng(2);
  const auto h = encode(m.live, testing::random_observation(rng), random_neighbors(rng, 3));
  REQUIRE(h.size() == 32);
  for (double x : h) CHECK(x == 0.0);
}

TEST_CASE("encode without neighbors returns the embedding") {
  AgentModel m(ModelConfig{}, 3);
  m.live.encoder.attention.wv.value = nn::Matrix::identity(32);
  Rng rng(4);
  const auto o = testing::random_observation(rng);
  const auto h = encode(m.live, o, {});
  const auto e = m.live.encoder.embed_only(o.view());
  for (int i = 0; i < 32; ++i) CHECK(h[i] == doctest::Approx(e[i]).epsilon(1e-14));
}

TEST_CASE("encode is invariant to neighbor order") {
  AgentModel m(ModelConfig{}, 5);
  Rng rng(6);
  const auto o = testing::random_observation(rng);
  auto nb = random_neighbors(rng, 4);
  const auto a = encode(m.live, o, nb);
  std::reverse(nb.begin(), nb.end());
  std::swap(nb[0], nb[2]);
  const auto b = encode(m.live, o, nb);
  for (int i = 0; i < 32; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("encode rejects malformed observations") {
  AgentModel m(ModelConfig{}, 5);
  CHECK_THROWS_AS(m.live.encoder.embed_only(std::vector<double>(15, 0.0)), ShapeError);
}

TEST_CASE("predict_next") {
  AgentModel m(ModelConfig{}, 7);
  Rng rng(8);
  const auto h = testing::random_vector(32, rng);
  const auto p0 = predict_next(m.live, h, 0);
  const auto p1 = predict_next(m.live, h, 1);
  CHECK(p0.size() == 16);
  CHECK(p1.size() == 16);
  CHECK(p0 != p1);
  CHECK_THROWS_AS(predict_next(m.live, h, 4), ContractError);
  CHECK_THROWS_AS(predict_next(m.live, h, -1), ContractError);
  m.live.decoder->for_each_param("d", [](const std::string&, nn::Param& p) { p.value.fill(0.0); });
  for (double x : predict_next(m.live, h, 2)) CHECK(x == 0.0);
}

TEST_CASE("decoder input layout") {
  const auto x = decoder_input(std::vector<double>{0.5, 0.25}, 2, 4);
  CHECK(x == Vector{0.5, 0.25, 0, 0, 1, 0});
}

TEST_CASE("greedy action and tie break") {
  Rng rng(1);
  CHECK(act(std::vector<double>{1, 5, 2, 2}, 0.0, rng) == 1);
  CHECK(act(std::vector<double>{3, 3, 1, 0}, 0.0, rng) == 0);
  CHECK_THROWS_AS(act(std::vector<double>{1, 2, 3, 4}, 1.5, rng), ContractError);
}

TEST_CASE("epsilon one is uniform") {
  Rng rng(99);
  std::array<int, 4> counts{};
  const std::vector<double> q{9, 1, 1, 1};
  for (int k = 0; k < 10000; ++k) ++counts[act(q, 1.0, rng)];
  const double sigma = std::sqrt(10000 * 0.25 * 0.75);
  for (int c : counts) CHECK(std::abs(c - 2500.0) < 3.0 * sigma);
}

TEST_CASE("epsilon schedule") {
  TrainConfig t;
  CHECK(epsilon_at(0, 1000, t) == 1.0);
  CHECK(epsilon_at(100, 1000, t) == doctest::Approx(0.525));
  CHECK(epsilon_at(200, 1000, t) == doctest::Approx(0.05));
  CHECK(epsilon_at(900, 1000, t) == doctest::Approx(0.05));
}

TEST_CASE("single sample decoder loss is a Euclidean distance") {
  AgentModel m(ModelConfig{}, 11);
  Rng rng(12);
  auto t = testing::random_transition(rng);
  const auto h = encode(m.live, t.obs, t.neighbors);
  const auto d = predict_next(m.live, h, t.action);
  const auto loss = evaluate_loss(m, std::vector<Transition>{t}, 1.0 / 50.0);
  CHECK(loss.loss_d == doctest::Approx(nn::l2_distance(d, t.next_obs.view())).epsilon(1e-14));
  CHECK(loss.total == loss.loss_d + loss.loss_q);
}

TEST_CASE("perfect predictions give zero losses") {
  AgentModel m(ModelConfig{}, 13);
  m.target = AgentModel(ModelConfig{}, 14).live;
  Rng rng(15);
  std::vector<Transition> batch;
  for (int b = 0; b < 4; ++b) {
    auto t = testing::random_transition(rng);
    const auto h = encode(m.live, t.obs, t.neighbors);
    const auto d = predict_next(m.live, h, t.action);
    std::copy(d.begin(), d.end(), t.next_obs.values.begin());
    const auto hn = encode(m.target, t.next_obs, t.next_neighbors);
    const auto qn = q_values(m.target, hn);
    const double target_max = *std::max_element(qn.begin(), qn.end());
    const double q = q_values(m.live, h)[t.action];
    t.reward = (q - m.config().gamma * target_max) * 50.0;
    batch.push_back(t);
  }
  const auto loss = evaluate_loss(m, batch, 1.0 / 50.0);
  CHECK(loss.loss_d == 0.0);
  CHECK(loss.loss_q < 1e-24);
}

TEST_CASE("loss decomposition and gradient agreement") {
  AgentModel m(ModelConfig{}, 16);
  Rng rng(17);
  std::vector<Transition> batch;
  for (int b = 0; b < 8; ++b) batch.push_back(testing::random_transition(rng));
  const auto a = evaluate_loss(m, batch, 1.0 / 50.0);
  m.live.zero_grad();
  const auto b = accumulate_gradients(m, batch, 1.0 / 50.0);
  CHECK(a.total == a.loss_d + a.loss_q);
  CHECK(b.total == doctest::Approx(a.total).epsilon(1e-14));
  CHECK(testing::joint_instance(rng).worst < 1e-4);
}

TEST_CASE("one training step moves encoder, decoder and q-network") {
  AgentModel m(ModelConfig{}, 18);
  Rng rng(19);
  std::vector<Transition> batch;
  for (int b = 0; b < 32; ++b) batch.push_back(testing::random_transition(rng));
  const auto before = snapshot(m.live);
  const auto loss = train_batch(m, batch, TrainConfig{});
  CHECK(loss.loss_d > 0.0);
  CHECK(loss.loss_q > 0.0);
  const auto after = snapshot(m.live);
  REQUIRE(before.size() == 3);
  for (const auto& [block, values] : before) CHECK_MESSAGE(values != after.at(block), block);
  CHECK(m.gradient_steps == 1);
}

TEST_CASE("target sync schedule and staleness") {
  AgentModel m(ModelConfig{}, 20);
  Rng rng(21);
  std::vector<Transition> batch;
  for (int b = 0; b < 2; ++b) batch.push_back(testing::random_transition(rng));
  const auto initial = m.target;
  TrainConfig cfg;
  Network synced = m.target;
  for (int k = 1; k <= 250; ++k) {
    train_batch(m, batch, cfg);
    if (k < 100) REQUIRE(m.target.same_values(initial));
    if (k % 100 == 0) {
      CHECK(m.target.same_values(m.live));
      synced = m.target;
    } else {
      REQUIRE(m.target.same_values(synced));
    }
  }
  CHECK(m.target_syncs == 2);
  CHECK(m.gradient_steps == 250);

  sync_target(m);
  const auto h = testing::random_vector(32, rng);
  CHECK(q_values(m.target, h) == q_values(m.live, h));
}

TEST_CASE("replay buffer") {
  ReplayBuffer buf(5, 3, 50.0);
  Rng rng(22);
  CHECK_THROWS_AS(buf.sample(2, rng), StateError);
  std::vector<Transition> pushed;
  for (int k = 0; k < 7; ++k) {
    auto t = testing::random_transition(rng);
    pushed.push_back(t);
    buf.push(t);
    if (k == 1) CHECK_THROWS_AS(buf.sample(2, rng), StateError);
  }
  CHECK(buf.size() == 5);
  CHECK(buf.total_pushed() == 7);
  CHECK(buf.ready());
  CHECK(buf.sample(9, rng).size() == 9);
  // Stored observations decode to the simulator's exact values.
  bool found = false;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const auto t = buf.at(i);
    if (t.obs == pushed[6].obs) {
      found = true;
      CHECK(t.next_obs == pushed[6].next_obs);
      CHECK(t.neighbors == pushed[6].neighbors);
      CHECK(t.action == pushed[6].action);
      CHECK(t.reward == pushed[6].reward);
    }
  }
  CHECK(found);
  CHECK_THROWS_AS(ReplayBuffer(0, 1, 50.0), ContractError);
}

TEST_CASE("transitions follow the topology") {
  const auto net = sim::build_grid(2, 3, 30);
  Rng rng(23);
  std::vector<Observation> obs, next;
  for (int i = 0; i < net.size(); ++i) {
    obs.push_back(testing::random_observation(rng));
    next.push_back(testing::random_observation(rng));
  }
  const std::vector<int> actions{0, 1, 2, 3, 0, 1};
  const std::vector<double> rewards(6, -1.0);
  const auto ts = make_transitions(net, obs, actions, rewards, next);
  REQUIRE(ts.size() == 6);
  for (int i = 0; i < net.size(); ++i) {
    CHECK(ts[i].neighbors.size() == net.intersections[i].neighbors.size());
    CHECK(ts[i].next_neighbors.size() == ts[i].neighbors.size());
  }
}

TEST_CASE("pretrain with zero episodes returns the initial model") {
  const auto env = short_env();
  const auto r = pretrain(env, ModelConfig{}, TrainConfig{}, 0, 3);
  CHECK(r.episodes.empty());
  CHECK(r.model.gradient_steps == 0);
  CHECK(r.model.optimizer.step_count() == 0);
  CHECK(r.model.live.same_values(r.model.target));
  const auto again = pretrain(env, ModelConfig{}, TrainConfig{}, 0, 3);
  CHECK(r.model.live.same_values(again.model.live));
}

TEST_CASE("one episode fills the buffer with 360 records per intersection") {
  const auto env = short_env();
  const auto r = pretrain(env, ModelConfig{}, TrainConfig{}, 1, 4);
  CHECK(r.buffer_size == 360u * 4u);
  REQUIRE(r.episodes.size() == 1);
  CHECK(r.episodes[0].gradient_steps == 360 - 1000 / 4 + 1);
}

TEST_CASE("pretrain is bit reproducible") {
  auto env = short_env(2, 2, 600.0);
  TrainConfig t;
  t.warmup = 64;
  auto run = [&] {
    const auto r = pretrain(env, ModelConfig{}, t, 2, 5);
    std::ostringstream log;
    write_training_log(log, r.episodes);
    return std::make_pair(r.model.to_checkpoint().to_text(), log.str());
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
}

TEST_CASE("model checkpoint round trip") {
  AgentModel m(ModelConfig{}, 24);
  m.source_flow = "hz2";
  m.grid_rows = 2;
  m.grid_cols = 3;
  Rng rng(25);
  std::vector<Transition> batch{testing::random_transition(rng)};
  train_batch(m, batch, TrainConfig{});
  const auto ck = nn::Checkpoint::from_text(m.to_checkpoint().to_text());
  const auto back = AgentModel::from_checkpoint(ck);
  CHECK(back.live.same_values(m.live));
  CHECK(back.live.checksum() == m.live.checksum());
  CHECK(back.source_flow == "hz2");
  CHECK(back.grid_rows == 2);
  CHECK(back.grid_cols == 3);
  CHECK(back.config().with_decoder);
}

TEST_CASE("encoder plus q-network variant has no decoder tensors") {
  ModelConfig c;
  c.with_decoder = false;
  AgentModel m(c, 26);
  CHECK_FALSE(m.live.decoder.has_value());
  const auto ck = m.to_checkpoint();
  for (const auto& [name, t] : ck.tensors) CHECK(name.rfind("decoder", 0) != 0);
  const auto back = AgentModel::from_checkpoint(nn::Checkpoint::from_text(ck.to_text()));
  CHECK_FALSE(back.live.decoder.has_value());
  Rng rng(27);
  std::vector<Transition> batch{testing::random_transition(rng)};
  const auto loss = evaluate_loss(m, batch, 1.0 / 50.0);
  CHECK(loss.loss_d == 0.0);
  CHECK(loss.total == loss.loss_q);
}

TEST_CASE("fresh copy keeps parameters and resets training state") {
  AgentModel m(ModelConfig{}, 28);
  Rng rng(29);
  std::vector<Transition> batch{testing::random_transition(rng)};
  train_batch(m, batch, TrainConfig{});
  const auto c = m.fresh_copy();
  CHECK(c.live.same_values(m.live));
  CHECK(c.target.same_values(m.live));
  CHECK(c.gradient_steps == 0);
  CHECK(c.optimizer.step_count() == 0);
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.gamma = 0.8;
  c.embed_dim = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
