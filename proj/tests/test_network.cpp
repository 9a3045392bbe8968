#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "rcd/network.hpp"
#include "rcd/network_check.hpp"
#include "rcd/ranker.hpp"
#include "support.hpp"

using namespace rcd;

namespace {

GruParams zero_gru(std::size_t d) {
  GruParams g;
  for (Tensor* w : {&g.w_ir, &g.w_hr, &g.w_in, &g.w_hn, &g.w_iz, &g.w_hz}) *w = Tensor(d, d);
  for (Tensor* b : {&g.b_ir, &g.b_hr, &g.b_in, &g.b_hn, &g.b_iz, &g.b_hz}) *b = Tensor(1, d);
  return g;
}

Tensor gru_value(const Tensor& x, const Tensor& h, const GruParams& p) {
  Tape t;
  return gru_cell(t.constant(x), t.constant(h), p).value();
}

CommitGraph single_node() {
  CommitGraph g;
  g.commit_id = "one";
  LineNode n;
  n.text = "x";
  n.is_root_cause = true;
  g.nodes.push_back(n);
  return g;
}

}  // namespace

TEST_CASE("gated retention limits") {
  Rng rng(2);
  const Tensor x = test::random_tensor(rng, 3, 4);
  const Tensor h = test::random_tensor(rng, 3, 4);

  SUBCASE("update gate saturated open keeps history") {
    GruParams p = zero_gru(4);
    Rng r(9);
    p.w_ir = test::random_tensor(r, 4, 4);
    p.w_in = test::random_tensor(r, 4, 4);
    for (auto& b : p.b_iz.values()) b = 30.0;
    CHECK(max_abs_diff(gru_value(x, h, p), h) < 1e-9);
  }
  SUBCASE("both gates closed with zero candidate") {
    GruParams p = zero_gru(4);
    for (auto& b : p.b_iz.values()) b = -30.0;
    for (auto& b : p.b_ir.values()) b = -30.0;
    CHECK(max_abs_diff(gru_value(x, h, p), Tensor(3, 4)) < 1e-9);
  }
  SUBCASE("all-zero parameters halve the history") {
    // r = z = sigmoid(0) = 1/2, n = tanh(0) = 0, out = h / 2
    Tensor half = h;
    for (auto& v : half.values()) v *= 0.5;
    CHECK(max_abs_diff(gru_value(x, h, zero_gru(4)), half) < 1e-15);
  }
}

TEST_CASE("gru_cell matches the loop oracle") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg;
    cfg.dim = 5;
    cfg.heads = 1;
    cfg.layers = 1;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const NetworkParams p = test::random_params(cfg, rng);
    const Tensor x = test::random_tensor(rng, 4, 5);
    const Tensor h = test::random_tensor(rng, 4, 5);
    CHECK(max_abs_diff(gru_value(x, h, p.layers[0].gru), oracle::gru_cell(x, h, p.layers[0].gru)) <
          1e-12);
  }
}

TEST_CASE("task projection") {
  NetworkParams p;
  auto project = [&](const Tensor& x) {
    Tape t;
    return task_projection(t.constant(x), p).value();
  };
  p.w_proj = Tensor::identity(2);
  p.b_proj = Tensor(1, 2);
  CHECK(project(Tensor::row({-1, 2})) == Tensor::row({0, 2}));
  p.w_proj = Tensor(1, 2);
  p.b_proj = Tensor::row({5});
  CHECK(project(Tensor(3, 2, 1.5)) == Tensor(3, 1, 5.0));
  p.b_proj = Tensor::row({-3});
  CHECK(project(Tensor(1, 2)) == Tensor(1, 1));
}

TEST_CASE("network composition") {
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.d_out = 3;
  Rng rng(31);
  const NetworkParams p = test::random_params(cfg, rng);

  SUBCASE("isolated node in full mode") {
    const CommitGraph g = single_node();
    const Tensor h0 = test::random_tensor(rng, 1, 4);
    Tape t;
    GraphIndex idx(g);
    const Tensor got = network_forward(t.constant(h0), idx, p, cfg).value();
    // Aggregation yields zero, so the cell sees (0, h0).
    const Tensor expect = oracle::network_forward(h0, g, p, Mode::Full);
    const Tensor by_hand = [&] {
      Tape u;
      Var cell = gru_cell(u.constant(Tensor(1, 4)), u.constant(h0), p.layers[0].gru);
      Var ln = layer_norm(cell, u.constant(p.norm_gain), u.constant(p.norm_bias));
      return task_projection(ln, p).value();
    }();
    CHECK(max_abs_diff(got, by_hand) < 1e-12);
    CHECK(max_abs_diff(got, expect) < 1e-12);
  }

  SUBCASE("aggregation-only with identity weights on a chain") {
    ModelConfig c = cfg;
    c.mode = Mode::AggregationOnly;
    Rng init(0);
    NetworkParams q = init_network(c, init);
    auto& hgt = q.layers[0].hgt;
    for (std::size_t a = 0; a < kNodeKinds; ++a)
      hgt.k_weight[a] = hgt.q_weight[a] = hgt.v_weight[a] = Tensor::identity(4);
    for (auto& m : hgt.att) m = Tensor::identity(2);
    for (auto& m : hgt.msg) m = Tensor::identity(2);
    q.w_proj = Tensor(3, 4, std::vector<double>{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0});
    CommitGraph g = single_node();
    LineNode b;
    b.id = 1;
    b.text = "y";
    g.nodes.push_back(b);
    g.edges = {{0, 1, EdgeKind::ControlFlow}};
    const Tensor h0(2, 4, std::vector<double>{6, 3, 2, 1, 0, 0, 0, 0});
    Tape t;
    GraphIndex idx(g);
    const Tensor got = network_forward(t.constant(h0), idx, q, c).value();
    // Row 1 receives the source row [6,3,2,1]: mean 3, variance 3.5, so the
    // normalized row is [3,0,-1,-2]/sqrt(3.5+eps) and ReLU keeps the first entry.
    const double s = std::sqrt(3.5 + 1e-5);
    CHECK(got(1, 0) == doctest::Approx(3.0 / s).epsilon(1e-14));
    CHECK(got(1, 1) == 0.0);
    CHECK(got(1, 2) == 0.0);
    CHECK(got(0, 0) == 0.0);
    CHECK(max_abs_diff(got, oracle::network_forward(h0, g, q, Mode::AggregationOnly)) < 1e-12);
  }

  SUBCASE("edgeless graph, full vs retention-only") {
    CommitGraph g = single_node();
    for (std::size_t i = 1; i < 3; ++i) {
      LineNode n;
      n.id = i;
      n.text = "z";
      g.nodes.push_back(n);
    }
    const Tensor h0 = test::random_tensor(rng, 3, 4);
    GraphIndex idx(g);
    for (Mode m : {Mode::Full, Mode::RetentionOnly}) {
      ModelConfig c = cfg;
      c.mode = m;
      Tape t;
      CHECK(max_abs_diff(network_forward(t.constant(h0), idx, p, c).value(),
                         oracle::network_forward(h0, g, p, m)) < 1e-12);
    }
  }
}

TEST_CASE("all modes match the oracle on random graphs") {
  Rng rng(77);
  for (Mode m : {Mode::Full, Mode::AggregationOnly, Mode::RetentionOnly}) {
    for (int trial = 0; trial < 10; ++trial) {
      ModelConfig cfg;
      cfg.dim = 6;
      cfg.heads = 2;
      cfg.layers = 2;
      cfg.d_out = 5;
      cfg.mode = m;
      cfg.qkv_bias = trial % 2 == 0;
      const NetworkParams p = test::random_params(cfg, rng);
      const CommitGraph g = test::random_graph(rng, 1 + rng.below(6), 0.15);
      const Tensor h0 = test::random_tensor(rng, g.nodes.size(), 6);
      Tape t;
      GraphIndex idx(g);
      CHECK(max_abs_diff(network_forward(t.constant(h0), idx, p, cfg).value(),
                         oracle::network_forward(h0, g, p, m)) < 1e-12);
    }
  }
}

TEST_CASE("network rejects a dimension mismatch") {
  ModelConfig cfg;
  cfg.dim = 4;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.d_out = 2;
  Rng rng(1);
  const NetworkParams p = init_network(cfg, rng);
  Tape t;
  const CommitGraph g = single_node();
  GraphIndex idx(g);
  CHECK_THROWS(network_forward(t.constant(Tensor(1, 5)), idx, p, cfg));
}

TEST_CASE("network gradient check in every mode") {
  for (Mode m : {Mode::Full, Mode::AggregationOnly, Mode::RetentionOnly}) {
    ModelConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.d_out = 4;
    cfg.mode = m;
    const auto r = network_grad_check(cfg, 5, 3);
    CAPTURE(to_string(m));
    CHECK(r.max_rel_error < 1e-5);
  }
}
