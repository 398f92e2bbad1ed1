#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include "tap/binary_io.hpp"
#include "tap/core/checkpoint.hpp"
#include "tap/core/gradcheck.hpp"
#include "tap/core/graph.hpp"
#include "tap/core/ops.hpp"
#include "tap/core/optim.hpp"
#include "tap/core/param_store.hpp"
#include "tap/errors.hpp"
#include "tap/random.hpp"

using namespace tap;
using namespace tap::core;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = d(rng);
  return t;
}

std::vector<double> to_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

// Weighted sum with fixed random weights so every output coordinate matters.
Var project(Graph& g, Var out, const Tensor& w) { return sum(mul(out, g.constant(w))); }

}  // namespace

TEST_CASE("tensor shape and storage") {
  Tensor t(Shape{2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 1.5);
  CHECK_FALSE(t.has_grad());
  CHECK_THROWS_AS(t.grad(), ContractError);
  t.ensure_grad();
  CHECK(t.grad().size() == 6);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  CHECK_THROWS(Tensor::vector({1, 2}).item());
}

TEST_CASE("linear examples") {
  Graph g;
  auto x = g.constant(Tensor::vector({3, 4}));
  auto W = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  auto b = g.constant(Tensor::vector({0, 0}));
  CHECK(to_vec(linear(x, W, b).value()) == std::vector<double>{3, 4});

  auto Wz = g.constant(Tensor::matrix(2, 2, {0, 0, 0, 0}));
  auto b1 = g.constant(Tensor::vector({1, 1}));
  CHECK(to_vec(linear(x, Wz, b1).value()) == std::vector<double>{1, 1});

  auto bad = g.constant(Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK_THROWS_AS(linear(x, bad, b), DimensionError);
  try {
    linear(x, bad, b);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("linear") != std::string::npos);
  }
}

TEST_CASE("sigmoid and tanh") {
  Graph g;
  auto x = g.constant(Tensor::vector({0.0, 50.0, -50.0, 800.0, -800.0}));
  auto s = sigmoid(x).value();
  CHECK(s[0] == 0.5);
  // Saturated inputs stay finite and in [0, 1].
  for (double v : s.values()) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(s[3] == 1.0);
  CHECK(s[4] == 0.0);

  auto t = core::tanh(x).value();
  CHECK(t[0] == 0.0);
  CHECK(std::abs(t[1] - 1.0) < 1e-15);
  CHECK(std::abs(t[2] + 1.0) < 1e-15);

  // Derivative of sigmoid at 0 is 0.25.
  ParamStore p;
  p.add("x", Tensor::vector({0.0}));
  Graph g2;
  g2.backward(sum(sigmoid(g2.param(p, "x"))));
  CHECK(p.at("x").grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("sigmoid outputs stay strictly inside (0,1) for moderate inputs") {
  Rng rng(11);
  Graph g;
  auto x = g.constant(random_tensor({1000}, rng, -30.0, 30.0));
  for (double v : sigmoid(x).value().values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("l2_normalize examples") {
  Graph g;
  auto y = l2_normalize(g.constant(Tensor::vector({3, 4}))).value();
  CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-15));

  auto u = l2_normalize(g.constant(Tensor::vector({1, 0, 0}))).value();
  CHECK(to_vec(u) == std::vector<double>{1, 0, 0});

  auto z = l2_normalize(g.constant(Tensor::vector({0, 0, 0}))).value();
  CHECK(to_vec(z) == std::vector<double>{0, 0, 0});

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = l2_normalize(g.constant(random_tensor({7}, rng))).value();
    double n = 0;
    for (double a : v.values()) n += a * a;
    CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-12);
  }
}

TEST_CASE("concat examples") {
  Graph g;
  auto a = g.constant(Tensor::vector({1}));
  auto b = g.constant(Tensor::vector({2, 3}));
  CHECK(to_vec(concat(a, b).value()) == std::vector<double>{1, 2, 3});
  auto empty = g.constant(Tensor(Shape{0}));
  CHECK(to_vec(concat(empty, b).value()) == std::vector<double>{2, 3});
  CHECK_THROWS_AS(concat(g.constant(Tensor::matrix(1, 1, {1})), b), DimensionError);

  ParamStore p;
  p.add("a", Tensor::vector({1}));
  p.add("b", Tensor::vector({2, 3}));
  Graph g2;
  g2.backward(sum(concat(g2.param(p, "a"), g2.param(p, "b"))));
  CHECK(to_vec(Tensor(Shape{1}, std::vector<double>(p.at("a").grad().begin(), p.at("a").grad().end()))) ==
        std::vector<double>{1});
  CHECK(p.at("b").grad()[0] == 1.0);
  CHECK(p.at("b").grad()[1] == 1.0);
}

TEST_CASE("backward basics") {
  ParamStore p;
  p.add("x", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  {
    Graph g;
    g.backward(sum(g.param(p, "x")));
    for (double v : p.at("x").grad()) CHECK(v == 1.0);
  }
  p.clear_grad();
  {
    ParamStore q;
    q.add("v", Tensor::vector({1.5, -2.0, 3.0}));
    Graph g;
    auto v = g.param(q, "v");
    g.backward(dot(v, v));
    CHECK(q.at("v").grad()[0] == 3.0);
    CHECK(q.at("v").grad()[1] == -4.0);
    CHECK(q.at("v").grad()[2] == 6.0);
  }
  {
    Graph g;
    auto x = g.param(p, "x");
    CHECK_THROWS_AS(g.backward(x), ContractError);
  }
}

TEST_CASE("backward leaves unreachable parameters untouched") {
  ParamStore p;
  p.add("used", Tensor::vector({1, 2}));
  p.add("unused", Tensor::vector({3, 4}));
  Graph g;
  auto u = g.param(p, "used");
  (void)g.param(p, "unused");
  g.backward(sum(u));
  CHECK_FALSE(p.at("unused").has_grad());
}

TEST_CASE("gradient accumulation across branches is exact for linear branches") {
  Rng rng(5);
  ParamStore p;
  p.add("x", random_tensor({4}, rng));
  const Tensor w1 = random_tensor({4}, rng), w2 = random_tensor({4}, rng);

  auto grad_of = [&](bool first, bool second) {
    p.clear_grad();
    Graph g;
    auto x = g.param(p, "x");
    Var loss;
    if (first && second) {
      loss = add(dot(x, g.constant(w1)), dot(x, g.constant(w2)));
    } else if (first) {
      loss = dot(x, g.constant(w1));
    } else {
      loss = dot(x, g.constant(w2));
    }
    g.backward(loss);
    return std::vector<double>(p.at("x").grad().begin(), p.at("x").grad().end());
  };
  const auto both = grad_of(true, true);
  const auto a = grad_of(true, false);
  const auto b = grad_of(false, true);
  for (std::size_t i = 0; i < 4; ++i) CHECK(both[i] == a[i] + b[i]);
}

TEST_CASE("cross_entropy of equal scores is ln N") {
  Graph g;
  auto s = g.constant(Tensor::vector({0.3, 0.3, 0.3, 0.3, 0.3}));
  CHECK(cross_entropy(s, 0).item() == doctest::Approx(std::log(5.0)).epsilon(1e-12));
  CHECK(cross_entropy(s, 0).item() == doctest::Approx(1.60944).epsilon(1e-5));
  auto peaked = g.constant(Tensor::vector({1000.0, 0.0, 0.0}));
  CHECK(cross_entropy(peaked, 0).item() < 1e-12);
}

TEST_CASE("per-op central-difference checks (100 trials, step 1e-5)") {
  Rng rng(2024);
  struct OpCase {
    const char* name;
    std::function<Var(Graph&, ParamStore&)> build;
    std::function<void(ParamStore&, Rng&)> init;
    Shape out;
  };
  std::vector<OpCase> cases{
      {"linear",
       [](Graph& g, ParamStore& p) { return linear(g.param(p, "x"), g.param(p, "W"), g.param(p, "b")); },
       [](ParamStore& p, Rng& r) {
         p.add("x", random_tensor({4}, r));
         p.add("W", random_tensor({3, 4}, r));
         p.add("b", random_tensor({3}, r));
       },
       {3}},
      {"sigmoid", [](Graph& g, ParamStore& p) { return sigmoid(g.param(p, "x")); },
       [](ParamStore& p, Rng& r) { p.add("x", random_tensor({5}, r, -4, 4)); }, {5}},
      {"tanh", [](Graph& g, ParamStore& p) { return core::tanh(g.param(p, "x")); },
       [](ParamStore& p, Rng& r) { p.add("x", random_tensor({5}, r, -3, 3)); }, {5}},
      {"l2_normalize", [](Graph& g, ParamStore& p) { return l2_normalize(g.param(p, "x")); },
       [](ParamStore& p, Rng& r) { p.add("x", random_tensor({5}, r)); }, {5}},
      {"concat",
       [](Graph& g, ParamStore& p) { return concat(g.param(p, "x"), g.param(p, "y")); },
       [](ParamStore& p, Rng& r) {
         p.add("x", random_tensor({2}, r));
         p.add("y", random_tensor({3}, r));
       },
       {5}},
      {"matmul",
       [](Graph& g, ParamStore& p) { return matmul(g.param(p, "x"), g.param(p, "y")); },
       [](ParamStore& p, Rng& r) {
         p.add("x", random_tensor({2, 3}, r));
         p.add("y", random_tensor({3, 2}, r));
       },
       {2, 2}},
  };
  for (const auto& c : cases) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      ParamStore p;
      c.init(p, rng);
      const Tensor w = random_tensor(c.out, rng);
      auto r = finite_diff_check([&](Graph& g) { return project(g, c.build(g, p), w); }, p, 8, 1e-5,
                                 rng());
      worst = std::max(worst, r.max_rel_error);
    }
    INFO(c.name);
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("finite_diff_check oracles") {
  Rng rng(8);
  ParamStore p;
  p.add("w", random_tensor({3}, rng));
  const Tensor x = random_tensor({3}, rng);
  const double target = 0.7;
  // Linear regression loss (w.x - y)^2.
  auto r = finite_diff_check(
      [&](Graph& g) {
        auto e = sub(dot(g.param(p, "w"), g.constant(x)), g.constant(Tensor::scalar(target)));
        return mul(e, e);
      },
      p, 3, 1e-5, 1);
  CHECK(r.max_rel_error < 1e-8);
  CHECK(r.coords_checked == 3);

  auto rc = finite_diff_check([&](Graph& g) { return g.constant(Tensor::scalar(2.0)); }, p, 3, 1e-5, 1);
  CHECK(rc.max_rel_error == 0.0);

  // Values are restored and gradients cleared.
  const ParamStore before = p;
  finite_diff_check([&](Graph& g) { return sum(g.param(p, "w")); }, p, 3, 1e-5, 2);
  CHECK(p.same_values(before));
  CHECK_FALSE(p.at("w").has_grad());
}

TEST_CASE("finite_diff_check detects a wrong backward rule") {
  Rng rng(9);
  ParamStore p;
  p.add("x", random_tensor({4}, rng));
  auto broken = [](Var x) {
    Tensor out = x.value();
    return x.graph().record("broken", std::move(out), {x},
                            [](std::span<const double> go, const GradSlots& in) {
                              auto gx = in[0];
                              for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * go[i];
                            });
  };
  auto r = finite_diff_check([&](Graph& g) { return sum(broken(g.param(p, "x"))); }, p, 4, 1e-5, 3);
  CHECK(r.max_rel_error > 0.1);
}

TEST_CASE("sgd_step examples") {
  SUBCASE("plain gradient descent") {
    ParamStore p;
    p.add("w", Tensor::vector({1.0, -2.0}));
    auto g = p.at("w").ensure_grad();
    g[0] = 0.5;
    g[1] = -1.0;
    SgdState s({0.001, 0.0, 0.0, 200, 0.1});
    sgd_step(p, s);
    CHECK(p.at("w")[0] == 1.0 - 0.001 * 0.5);
    CHECK(p.at("w")[1] == -2.0 - 0.001 * -1.0);
    CHECK(p.at("w").grad()[0] == 0.0);
  }
  SUBCASE("zero gradient leaves parameter") {
    ParamStore p;
    p.add("w", Tensor::vector({1.25}));
    p.at("w").ensure_grad();
    SgdState s({0.1, 0.9, 0.0, 200, 0.1});
    sgd_step(p, s);
    CHECK(p.at("w")[0] == 1.25);
  }
  SUBCASE("two momentum steps on x^2/2") {
    const double lr = 0.1, mu = 0.9, x0 = 2.0;
    ParamStore p;
    p.add("x", Tensor::vector({x0}));
    SgdState s({lr, mu, 0.0, 200, 0.1});
    for (int k = 0; k < 2; ++k) {
      p.at("x").ensure_grad()[0] = p.at("x")[0];
      sgd_step(p, s);
    }
    const double v1 = x0;
    const double x1 = x0 - lr * v1;
    const double v2 = mu * v1 + x1;
    const double x2 = x1 - lr * v2;
    CHECK(p.at("x")[0] == x2);
  }
  SUBCASE("coupled weight decay") {
    ParamStore p;
    p.add("w", Tensor::vector({3.0}));
    p.at("w").ensure_grad()[0] = 1.0;
    SgdState s({0.5, 0.0, 0.1, 200, 0.1});
    sgd_step(p, s);
    CHECK(p.at("w")[0] == 3.0 - 0.5 * (1.0 + 0.1 * 3.0));
  }
  SUBCASE("missing gradient is a contract error") {
    ParamStore p;
    p.add("w", Tensor::vector({1.0}));
    SgdState s({0.1, 0.9, 0.0, 200, 0.1});
    CHECK_THROWS_AS(sgd_step(p, s), ContractError);
  }
  SUBCASE("stepwise decay") {
    SgdState s({0.001, 0.9, 1e-4, 200, 0.1});
    CHECK(s.effective_lr(0) == 0.001);
    CHECK(s.effective_lr(199) == 0.001);
    CHECK(s.effective_lr(200) == doctest::Approx(0.0001).epsilon(1e-15));
    CHECK(s.effective_lr(400) == doctest::Approx(0.00001).epsilon(1e-15));
  }
}

TEST_CASE("momentum 0 and weight decay 0 equal vanilla descent bit for bit") {
  Rng rng(4);
  ParamStore p;
  p.add("w", random_tensor({16}, rng));
  Tensor manual = p.at("w");
  SgdState s({0.037, 0.0, 0.0, 200, 0.1});
  for (int step = 0; step < 5; ++step) {
    const Tensor grad = random_tensor({16}, rng);
    auto gs = p.at("w").ensure_grad();
    for (std::size_t i = 0; i < 16; ++i) {
      gs[i] = grad[i];
      manual[i] = manual[i] - 0.037 * grad[i];
    }
    sgd_step(p, s);
  }
  CHECK(std::memcmp(manual.values().data(), p.at("w").values().data(), 16 * sizeof(double)) == 0);
}

TEST_CASE("clip_global_norm") {
  const std::vector<std::string> prefixes{"theta/", "alpha/"};
  auto make = [](double a, double b, double c) {
    ParamStore p;
    p.add("theta/w", Tensor::vector({0, 0}));
    p.add("alpha/w", Tensor::vector({0}));
    p.add("beta/w", Tensor::vector({0}));
    auto t = p.at("theta/w").ensure_grad();
    t[0] = a;
    t[1] = b;
    p.at("alpha/w").ensure_grad()[0] = c;
    p.at("beta/w").ensure_grad()[0] = 100.0;
    return p;
  };
  SUBCASE("norm 80 is halved") {
    auto p = make(48, 64, 0);  // norm 80
    CHECK(clip_global_norm(p, 40, prefixes) == 80.0);
    CHECK(p.at("theta/w").grad()[0] == 24.0);
    CHECK(p.at("theta/w").grad()[1] == 32.0);
    CHECK(p.at("beta/w").grad()[0] == 100.0);
  }
  SUBCASE("norm 10 untouched") {
    auto p = make(6, 0, 8);
    CHECK(clip_global_norm(p, 40, prefixes) == 10.0);
    CHECK(p.at("theta/w").grad()[0] == 6.0);
    CHECK(p.at("alpha/w").grad()[0] == 8.0);
  }
  SUBCASE("zero gradients") {
    auto p = make(0, 0, 0);
    CHECK(clip_global_norm(p, 40, prefixes) == 0.0);
  }
  SUBCASE("idempotent") {
    Rng rng(12);
    for (int trial = 0; trial < 100; ++trial) {
      std::uniform_real_distribution<double> d(-100, 100);
      auto p = make(d(rng), d(rng), d(rng));
      clip_global_norm(p, 40, prefixes);
      const ParamStore once = p;
      clip_global_norm(p, 40, prefixes);
      for (const auto& name : {"theta/w", "alpha/w"}) {
        const auto a = once.at(name).grad();
        const auto b = p.at(name).grad();
        CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
      }
    }
  }
}

TEST_CASE("param store") {
  ParamStore p;
  p.add("theta/a", Tensor::vector({1}));
  CHECK_THROWS(p.add("theta/a", Tensor::vector({2})));
  CHECK(p.at("theta/a").requires_grad());
  p.add("alpha/b", Tensor::vector({1, 2}));
  CHECK(p.names() == std::vector<std::string>{"theta/a", "alpha/b"});
  CHECK(p.names_with_prefix("alpha/") == std::vector<std::string>{"alpha/b"});
  CHECK(p.numel() == 3);
  ParamStore q = p;
  q.at("theta/a")[0] = 5.0;
  CHECK(p.at("theta/a")[0] == 1.0);
  CHECK_FALSE(p.same_values(q));
}

TEST_CASE("checkpoint round trip is bit exact for f32 values") {
  Rng rng(21);
  ParamStore p;
  p.add("theta/fc0/W", random_tensor({3, 4}, rng));
  p.add("beta/fc0/b", random_tensor({4}, rng));
  p.add("s", Tensor::scalar(0.0));
  for (auto& e : p.entries())
    for (double& v : e.tensor->values()) v = static_cast<float>(v);

  const std::string bytes = encode_checkpoint(p);
  CHECK(bytes.substr(0, 4) == "TAPC");
  const ParamStore q = decode_checkpoint(bytes);
  CHECK(q.names() == p.names());
  CHECK(q.same_values(p));
  CHECK(encode_checkpoint(q) == bytes);

  // Header layout.
  io::ByteReader r(bytes, "checkpoint");
  CHECK(r.raw(4) == "TAPC");
  CHECK(r.uint<std::uint32_t>() == 1);
  CHECK(r.uint<std::uint32_t>() == 3);
  CHECK(r.uint<std::uint16_t>() == 11);
  CHECK(r.raw(11) == "theta/fc0/W");
  CHECK(r.uint<std::uint8_t>() == 2);
  CHECK(r.uint<std::uint32_t>() == 3);
  CHECK(r.uint<std::uint32_t>() == 4);
  CHECK(r.f32() == static_cast<float>(p.at("theta/fc0/W")[0]));

  // Total size: header 12 + per tensor 2 + name + 1 + 4*rank + 4*numel.
  CHECK(bytes.size() == 12 + (2 + 11 + 1 + 8 + 48) + (2 + 10 + 1 + 4 + 16) + (2 + 1 + 1 + 0 + 4));
}

TEST_CASE("checkpoint decoding rejects corrupt input") {
  ParamStore p;
  p.add("w", Tensor::vector({1, 2, 3}));
  std::string bytes = encode_checkpoint(p);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), FormatError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), FormatError);
  std::string bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), FormatError);
}
