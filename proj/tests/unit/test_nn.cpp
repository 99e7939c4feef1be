#include <cmath>
#include <cstring>
#include <functional>
#include <limits>

#include "common/gradcheck.hpp"
#include "doctest.h"
#include "plight/errors.hpp"
#include "plight/nn/checkpoint.hpp"
#include "plight/nn/layers.hpp"
#include "plight/nn/matrix.hpp"
#include "plight/nn/optim.hpp"

using namespace plight;
using namespace plight::nn;

namespace {

void set_identity(Param& p) { p.value = Matrix::identity(p.value.rows()); }

void zero_params(MLPBlock& m) {
  m.for_each_param("m", [](const std::string&, Param& p) { p.value.fill(0.0); });
}

}  // namespace

TEST_CASE("matrix basics") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  const Matrix m(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  Vector y(2);
  matvec(m, std::vector<double>{1, 0, -1}, y);
  CHECK(y == Vector{-2, -2});
  Vector z(3, 0.0);
  matvec_transpose_add(m, std::vector<double>{1, 1}, z);
  CHECK(z == Vector{5, 7, 9});
  CHECK_THROWS_AS(matvec(m, std::vector<double>{1, 0}, y), ShapeError);
  CHECK(l2_distance(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 5.0);
}

TEST_CASE("mlp zero weights give zero") {
  MLPBlock mlp({4, 3, 2}, {Activation::kReLU, Activation::kReLU});
  Rng rng(1);
  mlp.init_uniform(rng);
  zero_params(mlp);
  for (double v : mlp.forward(std::vector<double>{1, -2, 3, 4})) CHECK(v == 0.0);
}

TEST_CASE("mlp identity echoes input") {
  MLPBlock mlp({3, 3}, {Activation::kIdentity});
  set_identity(mlp.layers[0].weight);
  mlp.layers[0].bias.value.fill(0.0);
  const Vector x{0.5, -1.25, 3.0};
  CHECK(mlp.forward(x) == x);
}

TEST_CASE("mlp hand example") {
  MLPBlock mlp({2, 2}, {Activation::kReLU});
  mlp.layers[0].weight.value = Matrix(2, 2, std::vector<double>{1, 0, 0, -1});
  mlp.layers[0].bias.value.fill(0.0);
  CHECK(mlp.forward(std::vector<double>{1, 1}) == Vector{1, 0});
}

TEST_CASE("mlp shape errors") {
  MLPBlock mlp({3, 2}, {Activation::kIdentity});
  CHECK_THROWS_AS(mlp.forward(std::vector<double>{1, 2}), ShapeError);
  CHECK_THROWS_AS(MLPBlock({3, 2}, {}), ShapeError);
}

TEST_CASE("dense initialization bounds") {
  Dense d(16, 32, Activation::kReLU);
  Rng rng(3);
  d.init_uniform(rng);
  const double bound = 1.0 / std::sqrt(16.0);
  for (double w : d.weight.value.data()) CHECK(std::abs(w) <= bound);
  for (double b : d.bias.value.data()) CHECK(std::abs(b) <= bound);
}

TEST_CASE("attention single key equal to query") {
  AttentionBlock att(32);
  set_identity(att.wq);
  set_identity(att.wk);
  set_identity(att.wv);
  Rng rng(4);
  const auto q = testing::random_vector(32, rng);
  const std::vector<Vector> keys{q};
  const auto out = att.forward(q, keys);
  for (int i = 0; i < 32; ++i) CHECK(out[i] == doctest::Approx(q[i]).epsilon(1e-15));
}

TEST_CASE("attention identical keys split evenly") {
  AttentionBlock att(32);
  Rng rng(5);
  att.init_uniform(rng);
  const auto q = testing::random_vector(32, rng);
  const auto k = testing::random_vector(32, rng);
  Vector w;
  att.forward(q, std::vector<Vector>{k, k}, &w);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));
}

TEST_CASE("attention closed form weights") {
  AttentionBlock att(32);
  set_identity(att.wq);
  set_identity(att.wk);
  set_identity(att.wv);
  Vector e1(32, 0.0), e2(32, 0.0);
  e1[0] = 1.0;
  e2[1] = 1.0;
  Vector w;
  const auto out = att.forward(e1, std::vector<Vector>{e1, e2}, &w);
  CHECK(w[0] == doctest::Approx(0.5441).epsilon(1e-4));
  CHECK(w[1] == doctest::Approx(0.4559).epsilon(1e-4));
  const double expected = std::exp(1.0 / std::sqrt(32.0)) / (std::exp(1.0 / std::sqrt(32.0)) + 1.0);
  CHECK(w[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(out[0] == doctest::Approx(w[0]));
  CHECK(out[1] == doctest::Approx(w[1]));
}

TEST_CASE("attention empty key set") {
  AttentionBlock att(32);
  CHECK_THROWS_AS(att.forward(Vector(32, 0.0), std::vector<Vector>{}), ContractError);
}

TEST_CASE("attention weights form a distribution") {
  AttentionBlock att(32);
  Rng rng(6);
  att.init_uniform(rng);
  for (int trial = 0; trial < 50; ++trial) {
    const auto q = testing::random_vector(32, rng, -3, 3);
    std::vector<Vector> keys;
    const std::size_t n = 1 + rng.below(5);
    for (std::size_t j = 0; j < n; ++j) keys.push_back(testing::random_vector(32, rng, -3, 3));
    Vector w;
    att.forward(q, keys, &w);
    double sum = 0.0;
    for (double x : w) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("dueling constant advantage gives flat q") {
  DuelingHead head(32, 64, 4);
  Rng rng(7);
  head.init_uniform(rng);
  auto& last = head.advantage.layers.back();
  last.weight.value.fill(0.0);
  last.bias.value.fill(2.5);
  const auto h = testing::random_vector(32, rng);
  const auto q = head.forward(h);
  const double v = head.value.forward(h)[0];
  for (double x : q) CHECK(x == doctest::Approx(v).epsilon(1e-14));
}

TEST_CASE("dueling hand example") {
  DuelingHead head(32, 64, 4);
  Rng rng(8);
  head.init_uniform(rng);
  auto& vlast = head.value.layers.back();
  vlast.weight.value.fill(0.0);
  vlast.bias.value.fill(0.0);
  auto& alast = head.advantage.layers.back();
  alast.weight.value.fill(0.0);
  alast.bias.value = Matrix(4, 1, std::vector<double>{1, 2, 3, 4});
  const auto q = head.forward(testing::random_vector(32, rng));
  CHECK(q == Vector{-1.5, -0.5, 0.5, 1.5});
}

TEST_CASE("dueling mean identity") {
  DuelingHead head(32, 64, 4);
  Rng rng(9);
  head.init_uniform(rng);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = testing::random_vector(32, rng, -2, 2);
    const auto q = head.forward(h);
    REQUIRE(q.size() == 4);
    const double mean = (q[0] + q[1] + q[2] + q[3]) / 4.0;
    CHECK(std::abs(mean - head.value.forward(h)[0]) < 1e-6);
  }
}

TEST_CASE("forward is deterministic") {
  MLPBlock mlp({36, 64, 16}, {Activation::kReLU, Activation::kIdentity});
  Rng rng(10);
  mlp.init_uniform(rng);
  const auto x = testing::random_vector(36, rng);
  CHECK(mlp.forward(x) == mlp.forward(x));
}

TEST_CASE("backward without forward is a state error") {
  Dense d(3, 2, Activation::kReLU);
  Dense::Cache c;
  Vector dx(3);
  CHECK_THROWS_AS(d.backward(c, std::vector<double>{1, 1}, dx), StateError);
  MLPBlock mlp({3, 2}, {Activation::kIdentity});
  MLPBlock::Cache mc;
  CHECK_THROWS_AS(mlp.backward(mc, std::vector<double>{1, 1}, dx), StateError);
  AttentionBlock att(4);
  AttentionBlock::Cache ac;
  Vector dq(4);
  std::vector<Vector> dk;
  CHECK_THROWS_AS(att.backward(ac, Vector(4, 1.0), dq, dk), StateError);
  DuelingHead head(4, 8, 4);
  DuelingHead::Cache hc;
  Vector dh(4);
  CHECK_THROWS_AS(head.backward(hc, Vector(4, 1.0), dh), StateError);
}

TEST_CASE("sum of squares gradient") {
  Vector g(2);
  CHECK(sum_squares(std::vector<double>{1, 2}, g) == 5.0);
  CHECK(g == Vector{2, 4});
}

TEST_CASE("constant loss gives zero gradients") {
  MLPBlock mlp({5, 4, 3}, {Activation::kReLU, Activation::kIdentity});
  Rng rng(11);
  mlp.init_uniform(rng);
  MLPBlock::Cache cache;
  mlp.forward(testing::random_vector(5, rng), cache);
  Vector dx(5, 0.0);
  mlp.backward(cache, Vector(3, 0.0), dx);
  mlp.for_each_param("m", [](const std::string&, Param& p) {
    for (double g : p.grad.data()) CHECK(g == 0.0);
  });
  for (double g : dx) CHECK(g == 0.0);
}

TEST_CASE("euclidean loss") {
  Vector g(2);
  CHECK(euclidean_loss(std::vector<double>{3, 4}, std::vector<double>{0, 0}, g) == 5.0);
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  CHECK(euclidean_loss(std::vector<double>{1, 1}, std::vector<double>{1, 1}, g) == 0.0);
  CHECK(g == Vector{0, 0});
}

TEST_CASE("gradient checks: 30 instances per block") {
  using namespace plight::testing;
  const std::pair<const char*, std::function<GradReport(Rng&)>> blocks[] = {
      {"embedding", dense_instance},
      {"attention", attention_instance},
      {"decoder", decoder_instance},
      {"dueling", dueling_instance},
      {"joint", [](Rng& r) { return joint_instance(r); }},
  };
  std::uint64_t seed = 101;
  for (const auto& [name, fn] : blocks) {
    const auto rep = run_instances(fn, 30, seed++);
    CHECK_MESSAGE(rep.worst < 1e-4, name);
    // Kink-straddling stencils are rare; most coordinates are checked.
    CHECK_MESSAGE(rep.skipped * 20 < rep.checked, name);
  }
}

TEST_CASE("adam zero gradient leaves parameters") {
  Param p(2, 2);
  p.value = Matrix(2, 2, std::vector<double>{1, -2, 3, 0.5});
  const Matrix before = p.value;
  p.zero_grad();
  Adam opt;
  std::vector<Param*> params{&p};
  opt.step(params);
  CHECK(p.value == before);
}

TEST_CASE("adam first step moves by about lr against the gradient sign") {
  Param p(1, 3);
  p.value.fill(0.0);
  p.grad = Matrix(1, 3, std::vector<double>{0.3, -7.0, 1e-2});
  Adam opt;
  std::vector<Param*> params{&p};
  opt.step(params);
  CHECK(p.value(0, 0) == doctest::Approx(-1e-3).epsilon(1e-4));
  CHECK(p.value(0, 1) == doctest::Approx(1e-3).epsilon(1e-4));
  CHECK(p.value(0, 2) == doctest::Approx(-1e-3).epsilon(1e-4));
  CHECK(opt.step_count() == 1);
  CHECK(opt.first_moments()[0].same_shape(p.value));
  CHECK(opt.second_moments()[0].same_shape(p.value));
}

TEST_CASE("adam decreases x squared") {
  Param p(1, 1);
  p.value(0, 0) = 1.0;
  Adam opt;
  std::vector<Param*> params{&p};
  double prev = 1.0;
  for (int k = 0; k < 100; ++k) {
    p.grad(0, 0) = 2.0 * p.value(0, 0);
    opt.step(params);
    CHECK(std::abs(p.value(0, 0)) < prev);
    prev = std::abs(p.value(0, 0));
  }
}

TEST_CASE("adam rejects non-finite gradients") {
  Param a(1, 2), b(1, 1);
  a.value.fill(1.0);
  b.value.fill(1.0);
  a.grad.fill(0.5);
  b.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Adam opt;
  std::vector<Param*> params{&a, &b};
  CHECK_THROWS_AS(opt.step(params), ContractError);
  CHECK(a.value(0, 0) == 1.0);
  CHECK(b.value(0, 0) == 1.0);
  b.grad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(opt.step(params), ContractError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Checkpoint ck;
  ck.metadata["source_flow"] = "jn1";
  ck.metadata["d_model"] = "32";
  Rng rng(12);
  Matrix m(3, 5);
  for (double& x : m.storage()) x = rng.uniform(-1, 1) * std::pow(10.0, rng.uniform(-300, 300));
  m(0, 0) = 0.1;
  m(0, 1) = -0.0;
  m(0, 2) = 4.9e-324;
  ck.tensors.emplace_back("w", m);
  ck.tensors.emplace_back("b", Matrix(1, 1, std::vector<double>{1.0 / 3.0}));
  const auto back = Checkpoint::from_text(ck.to_text());
  CHECK(back.meta("source_flow") == "jn1");
  REQUIRE(back.has_tensor("w"));
  const auto& w = back.tensor("w");
  REQUIRE(w.same_shape(m));
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK(std::memcmp(&w.data()[i], &m.data()[i], sizeof(double)) == 0);
  }
  CHECK(back.tensor("b")(0, 0) == 1.0 / 3.0);
  CHECK(back.to_text() == ck.to_text());
}

TEST_CASE("checkpoint parse errors") {
  CHECK_THROWS_AS(Checkpoint::from_text("not json"), ParseError);
  CHECK_THROWS_AS(Checkpoint::from_text("{\"format\": \"other\"}"), ParseError);
  Checkpoint ck;
  CHECK_THROWS_AS(ck.tensor("missing"), CompatibilityError);
}
