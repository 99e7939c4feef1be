#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

#include "common/gradcheck.hpp"
#include "doctest.h"
#include "plight/errors.hpp"
#include "plight/transfer/pool.hpp"
#include "plight/transfer/similarity.hpp"
#include "plight/transfer/transfer.hpp"

using namespace plight;
using namespace plight::transfer;

namespace {

SourceModel make_source(std::uint64_t seed, const std::string& flow, bool decoder = true) {
  agent::ModelConfig c;
  c.with_decoder = decoder;
  auto m = std::make_shared<agent::AgentModel>(c, seed);
  m->source_flow = flow;
  return m;
}

agent::EnvConfig small_env(double horizon = 600.0) {
  agent::EnvConfig env;
  env.rows = 2;
  env.cols = 2;
  env.flow = *sim::find_builtin_flow("jn3");
  env.sim.horizon_s = horizon;
  env.traffic_seed = 31;
  return env;
}

agent::TrainConfig small_train() {
  agent::TrainConfig t;
  t.warmup = 64;
  t.batch_size = 8;
  return t;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("plight_transfer_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("pool layout") {
  AgentPool pool({make_source(1, "jn1"), make_source(2, "jn2")}, {});
  CHECK(pool.num_sources() == 2);
  CHECK(pool.size() == 3);
  CHECK(pool.target_index() == 2);
  CHECK(pool.name(0) == "jn1");
  CHECK(pool.name(1) == "jn2");
  CHECK(pool.name(2) == "target");
  CHECK_THROWS_AS(AgentPool({}, {}), ContractError);
  CHECK_THROWS_AS(AgentPool({nullptr}, {}), ContractError);
}

TEST_CASE("average encoder of one source is that source") {
  AgentPool pool({make_source(3, "a")}, {});
  const auto avg = average_encoder(pool);
  CHECK(avg.encoder.embed.weight.value == pool.source(0).live.encoder.embed.weight.value);
  CHECK(avg.encoder.attention.wq.value == pool.source(0).live.encoder.attention.wq.value);
}

TEST_CASE("average of p and -p is zero") {
  auto a = std::make_shared<agent::AgentModel>(agent::ModelConfig{}, 4);
  auto b = std::make_shared<agent::AgentModel>(*a);
  b->live.encoder.for_each_param("e", [](const std::string&, nn::Param& p) {
    for (double& x : p.value.storage()) x = -x;
  });
  AgentPool pool({a, b}, {"a", "b"});
  const auto avg = average_encoder(pool);
  avg.encoder.for_each_param("e", [](const std::string&, const nn::Param& p) {
    for (double x : p.value.data()) CHECK(x == 0.0);
  });
}

TEST_CASE("average of three scalars") {
  std::vector<SourceModel> src;
  for (double v : {1.0, 2.0, 6.0}) {
    auto m = std::make_shared<agent::AgentModel>(agent::ModelConfig{}, 5);
    m->live.encoder.embed.weight.value(0, 0) = v;
    src.push_back(m);
  }
  AgentPool pool(src, {"a", "b", "c"});
  CHECK(average_encoder(pool).encoder.embed.weight.value(0, 0) == 3.0);
  CHECK_THROWS_AS(average_encoder(std::span<const agent::Encoder* const>{}), ContractError);
}

TEST_CASE("average encoder rejects mismatched shapes") {
  agent::ModelConfig small;
  small.embed_dim = 8;
  agent::AgentModel a(agent::ModelConfig{}, 1), b(small, 2);
  const agent::Encoder* encs[] = {&a.live.encoder, &b.live.encoder};
  CHECK_THROWS_AS(average_encoder(encs), CompatibilityError);
}

TEST_CASE("step distance is zero on a perfect prediction") {
  AgentPool pool({make_source(6, "a"), make_source(7, "b")}, {});
  const auto avg = average_encoder(pool);
  const auto& agent_net = pool.source(0).live;
  Rng rng(8);
  const auto obs = testing::random_observation(rng);
  std::vector<sim::Observation> nb{testing::random_observation(rng)};
  const auto pred = agent::predict_next(agent_net, agent::encode(agent_net, obs, nb), 2);
  sim::Observation next;
  std::copy(pred.begin(), pred.end(), next.values.begin());
  CHECK(step_distance(agent_net, avg, obs, nb, 2, next) == 0.0);
  CHECK(step_distance(agent_net, avg, obs, nb, 1, next) > 0.0);
}

TEST_CASE("step distance is a Euclidean distance in embedding space") {
  // Identity embedding on the first 16 axes (inputs are non-negative, so
  // ReLU passes them through) makes the embedding difference hand-checkable.
  AgentPool pool({make_source(9, "a")}, {});
  auto avg = average_encoder(pool);
  avg.encoder.embed.weight.value.fill(0.0);
  avg.encoder.embed.bias.value.fill(0.0);
  for (int i = 0; i < 16; ++i) avg.encoder.embed.weight.value(i, i) = 1.0;
  std::vector<double> a(16, 0.5), b(16, 0.5);
  b[0] = 3.5;
  b[1] = 4.5;
  CHECK(embedding_distance(avg, a, b) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("true-observation embedding depends only on the average encoder") {
  AgentPool pool({make_source(10, "a"), make_source(11, "b")}, {});
  const auto avg = average_encoder(pool);
  Rng rng(12);
  const auto o = testing::random_observation(rng);
  const auto z1 = avg.embed(o.view());
  const auto z2 = avg.embed(o.view());
  CHECK(z1 == z2);
}

TEST_CASE("temporal weight") {
  CHECK(temporal_weight(std::vector<double>{0, 0, 0}, 0.95) == 0.0);
  CHECK(temporal_weight(std::vector<double>{1, 1}, 0.5) == -1.5);
  const std::vector<double> d{0.3, 1.2, 0.7, 2.0};
  std::vector<double> d3;
  for (double x : d) d3.push_back(3.0 * x);
  CHECK(temporal_weight(d3, 0.9) == doctest::Approx(3.0 * temporal_weight(d, 0.9)));
  // Newest entries weigh the most.
  CHECK(temporal_weight(std::vector<double>{0, 1}, 0.5) < temporal_weight(std::vector<double>{1, 0}, 0.5));
  CHECK_THROWS_AS(temporal_weight(std::vector<double>{}, 0.5), ContractError);
  CHECK_THROWS_AS(temporal_weight(std::vector<double>{1}, 0.0), ContractError);
  CHECK_THROWS_AS(temporal_weight(std::vector<double>{1}, 1.5), ContractError);
}

TEST_CASE("guide distribution") {
  const auto u = guide_distribution(std::vector<double>{-2, -2, -2});
  for (double p : u) CHECK(p == doctest::Approx(1.0 / 3.0));
  const auto p = guide_distribution(std::vector<double>{0, -1});
  CHECK(p[0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.2689).epsilon(1e-4));
  CHECK_THROWS_AS(guide_distribution(std::vector<double>{0, std::nan("")}), ContractError);
  CHECK_THROWS_AS(guide_distribution(std::vector<double>{0, -INFINITY}), ContractError);
  CHECK_THROWS_AS(guide_distribution(std::vector<double>{}), ContractError);
  // Large magnitudes stay finite.
  const auto big = guide_distribution(std::vector<double>{-1e4, -1e4 - 1});
  CHECK(big[0] == doctest::Approx(0.7311).epsilon(1e-4));
}

TEST_CASE("softmax shift invariance and agreement with the naive form") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto w = testing::random_vector(n, rng, -50, 0);
    const auto p = guide_distribution(w);
    double z = 0.0;
    for (double x : w) z += std::exp(x);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(p[k] - std::exp(w[k]) / z) < 1e-12);
      CHECK(p[k] >= 0.0);
      sum += p[k];
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    auto shifted = w;
    const double c = rng.uniform(-100, 100);
    for (double& x : shifted) x += c;
    const auto q = guide_distribution(shifted);
    for (std::size_t k = 0; k < n; ++k) CHECK(std::abs(p[k] - q[k]) < 1e-12);
  }
}

TEST_CASE("tracker ring discipline") {
  SimilarityTracker tr(2, 3, 4, 0.95);
  for (int k = 0; k < 6; ++k) tr.record(0, 1, static_cast<double>(k));
  const auto h = tr.history(0, 1);
  REQUIRE(h.size() == 4);
  CHECK(h[0] == 2.0);
  CHECK(h[3] == 5.0);
  CHECK(tr.history(1, 1).empty());
  CHECK_THROWS_AS(tr.record(0, 0, -1.0), ContractError);
  CHECK_THROWS_AS(tr.record(0, 0, std::nan("")), ContractError);
  CHECK_THROWS_AS(tr.record(2, 0, 1.0), ContractError);
  CHECK_THROWS_AS(tr.record(0, 3, 1.0), ContractError);
  tr.clear();
  CHECK(tr.history(0, 1).empty());
}

TEST_CASE("zero-distance dominance") {
  SimilarityTracker tr(1, 4, 40, 0.95);
  Rng rng(14);
  for (int t = 0; t < 40; ++t) {
    tr.record(0, 0, rng.uniform(1.0, 3.0));
    tr.record(0, 1, 0.0);
    tr.record(0, 2, rng.uniform(1.0, 3.0));
    tr.record(0, 3, rng.uniform(1.0, 3.0));
  }
  const auto p = guide_distribution(tr.weights(0));
  for (std::size_t k = 0; k < 4; ++k) {
    if (k != 1) CHECK(p[1] > p[k]);
  }
  // Strictly smaller at every step, but nonzero, still dominates.
  SimilarityTracker tr2(1, 3, 40, 0.95);
  for (int t = 0; t < 40; ++t) {
    const double base = rng.uniform(0.5, 1.0);
    tr2.record(0, 0, base + 0.1);
    tr2.record(0, 1, base + 0.2);
    tr2.record(0, 2, base);
  }
  const auto p2 = guide_distribution(tr2.weights(0));
  CHECK(p2[2] > p2[0]);
  CHECK(p2[2] > p2[1]);
}

TEST_CASE("first window samples uniformly over sources") {
  SimilarityTracker tr(200, 4, 40, 0.95);
  Rng rng(15);
  const auto g = sample_guides(tr, 3, true, rng);
  CHECK(g.uniform);
  std::array<int, 4> counts{};
  for (std::size_t i = 0; i < g.guides.size(); ++i) {
    ++counts[g.guides[i]];
    CHECK(g.probabilities[i][3] == 0.0);
    for (int k = 0; k < 3; ++k) CHECK(g.probabilities[i][k] == doctest::Approx(1.0 / 3.0));
  }
  CHECK(counts[3] == 0);
  for (int k = 0; k < 3; ++k) CHECK(counts[k] > 40);
}

TEST_CASE("later windows follow the softmax and are deterministic") {
  SimilarityTracker tr(3, 3, 10, 0.95);
  Rng fill(16);
  for (int t = 0; t < 10; ++t) {
    for (int i = 0; i < 3; ++i) {
      for (std::size_t k = 0; k < 3; ++k) tr.record(i, k, fill.uniform(0, 2));
    }
  }
  Rng a(17), b(17);
  const auto ga = sample_guides(tr, 2, false, a);
  const auto gb = sample_guides(tr, 2, false, b);
  CHECK_FALSE(ga.uniform);
  CHECK(ga.guides == gb.guides);
  for (int i = 0; i < 3; ++i) {
    const auto p = guide_distribution(tr.weights(i));
    for (std::size_t k = 0; k < 3; ++k) CHECK(ga.probabilities[i][k] == p[k]);
  }
}

TEST_CASE("sample_index follows the distribution") {
  Rng rng(18);
  const std::vector<double> p{0.1, 0.6, 0.3};
  std::array<int, 3> c{};
  for (int k = 0; k < 20000; ++k) ++c[sample_index(p, rng)];
  for (int k = 0; k < 3; ++k) {
    const double sigma = std::sqrt(20000 * p[k] * (1 - p[k]));
    CHECK(std::abs(c[k] - 20000 * p[k]) < 4 * sigma);
  }
}

TEST_CASE("transfer with zero episodes copies a source") {
  AgentPool pool({make_source(19, "jn1"), make_source(20, "jn2")}, {});
  const auto sums = pool.source_checksums();
  const auto r = transfer_train(pool, small_env(), small_train(), TransferConfig{}, 0, 3);
  REQUIRE(r.initial_member >= 0);
  CHECK(r.target.live.same_values(pool.source(static_cast<std::size_t>(r.initial_member)).live));
  CHECK(r.target.gradient_steps == 0);
  CHECK(r.episodes.empty());
  CHECK(pool.source_checksums() == sums);
}

TEST_CASE("transfer run: immutability, windows, probabilities") {
  AgentPool pool({make_source(21, "jn1"), make_source(22, "jn2")}, {});
  const auto sums = pool.source_checksums();
  TransferConfig cfg;
  cfg.period = 20;
  const auto r = transfer_train(pool, small_env(), small_train(), cfg, 2, 4);
  CHECK(pool.source_checksums() == sums);
  REQUIRE(r.episodes.size() == 2);
  CHECK(r.target.gradient_steps > 0);
  CHECK_FALSE(r.target.live.same_values(pool.source(static_cast<std::size_t>(r.initial_member)).live));

  // 60 steps per episode, draws at 0, 20, 40 for each of 4 intersections.
  CHECK(r.events.size() == 2u * 3u * 4u);
  std::map<std::pair<int, int>, int> per_window;
  for (const auto& ev : r.events) {
    CHECK(ev.step % cfg.period == 0);
    ++per_window[{ev.episode, ev.step}];
    if (ev.step == 0) {
      CHECK(ev.weights.empty());
      CHECK(ev.guide < 2);
      CHECK(ev.probability == doctest::Approx(0.5));
    } else {
      REQUIRE(ev.weights.size() == 3);
      for (double w : ev.weights) CHECK(w <= 0.0);
      const auto p = guide_distribution(ev.weights);
      CHECK(ev.probability == p[static_cast<std::size_t>(ev.guide)]);
    }
  }
  for (const auto& [key, count] : per_window) CHECK(count == 4);
  for (const auto& ep : r.episodes) {
    double sum = 0.0;
    for (double s : ep.mean_selection) sum += s;
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }

  std::ostringstream log;
  write_transfer_log(log, r.events);
  const auto text = log.str();
  CHECK(text.rfind("episode,step,intersection,guide_index,D_values,probability,m_tt_running\n", 0) == 0);
}

TEST_CASE("transfer is deterministic per seed") {
  auto run = [](std::uint64_t seed) {
    AgentPool pool({make_source(23, "jn1"), make_source(24, "jn2")}, {});
    const auto r = transfer_train(pool, small_env(), small_train(), TransferConfig{}, 1, seed);
    std::ostringstream log;
    write_transfer_log(log, r.events);
    return std::make_pair(log.str(), r.target.to_checkpoint().to_text());
  };
  const auto a = run(5), b = run(5);
  CHECK(a == b);
}

TEST_CASE("transfer config validation") {
  TransferConfig c;
  c.period = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.guide_epsilon = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("pool manifest parsing") {
  const auto entries = parse_pool_manifest("# pool\nagent = jn1 a/{seed}.json\nagent = jn2 b.json\n");
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].flow == "jn1");
  CHECK(entries[0].path == "a/{seed}.json");
  CHECK(parse_pool_manifest(format_pool_manifest(entries)).size() == 2);
  CHECK_THROWS_AS(parse_pool_manifest("agent = jn1\n"), ParseError);
  CHECK_THROWS_AS(parse_pool_manifest("# nothing\n"), ConfigError);
}

TEST_CASE("loading sources substitutes the seed") {
  const auto dir = temp_dir("load");
  auto src = make_source(25, "jn1");
  src->to_checkpoint().save((dir / "ck_seed7.json").string());
  const std::vector<ManifestEntry> entries{{"jn1", (dir / "ck_seed{seed}.json").string()}};
  const auto loaded = load_sources(entries, 7, sim::kObservationSize);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0]->live.same_values(src->live));
  CHECK_THROWS(load_sources(entries, 8, sim::kObservationSize));
  std::filesystem::remove_all(dir);
}

TEST_CASE("compatibility checks") {
  agent::ModelConfig narrow;
  narrow.obs_dim = 8;
  std::vector<SourceModel> bad_obs{std::make_shared<agent::AgentModel>(narrow, 1)};
  CHECK_THROWS_AS(check_compatible(bad_obs, sim::kObservationSize), CompatibilityError);
  std::vector<SourceModel> no_decoder{make_source(2, "x", false)};
  CHECK_THROWS_AS(check_compatible(no_decoder, sim::kObservationSize), CompatibilityError);
  agent::ModelConfig wide;
  wide.q_hidden = 16;
  std::vector<SourceModel> mixed{make_source(3, "x"), std::make_shared<agent::AgentModel>(wide, 4)};
  CHECK_THROWS_AS(check_compatible(mixed, sim::kObservationSize), CompatibilityError);
  std::vector<SourceModel> ok{make_source(5, "x"), make_source(6, "y")};
  CHECK_NOTHROW(check_compatible(ok, sim::kObservationSize));
}
