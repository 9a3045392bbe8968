#include <doctest.h>

#include <cmath>

#include "rcd/checkpoint.hpp"
#include "rcd/error.hpp"
#include "rcd/network.hpp"
#include "rcd/ranker.hpp"
#include "rcd/synthetic.hpp"
#include "support.hpp"

using namespace rcd;

namespace {

LineNode line(std::size_t id, NodeKind k, bool root) {
  LineNode n;
  n.id = id;
  n.kind = k;
  n.text = "t" + std::to_string(id);
  n.is_root_cause = root;
  return n;
}

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.d_out = 4;
  cfg.epochs = 3;
  cfg.lr = 1e-2;
  return cfg;
}

std::vector<EmbeddedGraph> small_data(std::size_t commits, std::uint64_t seed) {
  GenConfig gen;
  gen.n_commits = commits;
  gen.deleted_per_commit = 4;
  gen.added_per_commit = 2;
  gen.seed = seed;
  return embed_dataset(generate(gen), HashingEmbedder(8));
}

}  // namespace

TEST_CASE("score") {
  NetworkParams p;
  p.scorer_w = Tensor(1, 3);
  p.scorer_b = Tensor(1, 1, 3.0);
  const std::vector<double> a = {7, -2, 4};
  CHECK(score(a, p) == 3.0);
  p.scorer_w = Tensor::row({1, 0, 0});
  p.scorer_b = Tensor(1, 1);
  CHECK(score(a, p) == 7.0);
  const std::vector<double> b = {7, 100, -100};
  CHECK(score(a, p) == score(b, p));
  CHECK_THROWS_AS(score(std::vector<double>{1, 2}, p), ShapeError);
}

TEST_CASE("pair probability") {
  CHECK(pair_probability(1.3, 1.3) == 0.5);
  CHECK(pair_probability(800.0, -800.0) == doctest::Approx(1.0));
  CHECK(pair_probability(-800.0, 800.0) >= 0.0);
  // 1 / (1 + exp(-ln 3)) = 1 / (1 + 1/3) = 3/4
  CHECK(pair_probability(std::log(3.0), 0.0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(pair_probability(1.0, 0.0, 2.0) == doctest::Approx(logistic(2.0)).epsilon(1e-15));
}

TEST_CASE("pair labels") {
  const LineNode r = line(0, NodeKind::Deleted, true), r2 = line(2, NodeKind::Deleted, true);
  const LineNode n = line(1, NodeKind::Deleted, false);
  CHECK(pair_label(r, n) == 1.0);
  CHECK(pair_label(n, r) == 0.0);
  CHECK(pair_label(r, r2) == 0.5);
  CHECK(pair_label(n, n) == 0.5);
  CHECK_THROWS_AS(pair_label(r, line(3, NodeKind::Added, false)), ValidationError);
}

TEST_CASE("pairwise loss values") {
  CHECK(pairwise_loss(0.5, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // -0.5 log 0.5 - 0.5 log 0.5 = ln 2
  CHECK(pairwise_loss(0.5, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(pairwise_loss(1.0 - 1e-15, 1.0) < 1e-12);
  CHECK(pairwise_loss(0.0, 1.0) == doctest::Approx(-std::log(1e-12)));
  CHECK(std::isfinite(pairwise_loss(1.0, 0.0)));
}

TEST_CASE("pair enumeration") {
  CommitGraph g;
  g.commit_id = "p";
  g.nodes = {line(0, NodeKind::Deleted, true), line(1, NodeKind::Deleted, false),
             line(2, NodeKind::Deleted, false), line(3, NodeKind::Added, false)};
  auto pairs = build_pairs(g, false);
  REQUIRE(pairs.size() == 2);
  CHECK((pairs[0].i == 0 && pairs[0].j == 1 && pairs[0].label == 1.0));
  CHECK((pairs[1].i == 0 && pairs[1].j == 2 && pairs[1].label == 1.0));
  pairs = build_pairs(g, true);
  REQUIRE(pairs.size() == 3);
  CHECK((pairs[2].i == 1 && pairs[2].j == 2 && pairs[2].label == 0.5));

  g.nodes = {line(0, NodeKind::Deleted, true), line(1, NodeKind::Added, false)};
  CHECK(build_pairs(g, true).empty());
}

TEST_CASE("tape loss equals the sum of scalar losses") {
  Rng rng(6);
  Tape t;
  const Tensor s = test::random_tensor(rng, 5, 1, -3, 3);
  const std::vector<PairSample> pairs = {{"c", 0, 1, 1.0}, {"c", 3, 2, 0.0}, {"c", 1, 4, 0.5}};
  double expect = 0.0;
  for (const auto& p : pairs) expect += pairwise_loss(pair_probability(s(p.i, 0), s(p.j, 0), 1.5), p.label);
  CHECK(pairwise_loss(t.constant(s), pairs, 1.5).value()(0, 0) ==
        doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("adam first step") {
  Tensor p = Tensor::row({1.0, -2.0, 0.5});
  std::vector<NamedTensor> named = {{"p", &p}};
  AdamState adam(named);
  adam.step(named, {Tensor::row({0.3, -4.0, 0.0})}, 0.1);
  // Bias correction makes the first step lr * g / (|g| + eps).
  CHECK(p(0, 0) == doctest::Approx(1.0 - 0.1 * 0.3 / (0.3 + 1e-8)).epsilon(1e-14));
  CHECK(p(0, 1) == doctest::Approx(-2.0 + 0.1 * 4.0 / (4.0 + 1e-8)).epsilon(1e-14));
  CHECK(p(0, 2) == 0.5);
  CHECK(adam.steps() == 1);
}

TEST_CASE("training") {
  const auto data = small_data(12, 3);
  ModelConfig cfg = small_config();

  SUBCASE("zero epochs leaves the initialization untouched") {
    ModelConfig c = cfg;
    c.epochs = 0;
    const TrainedModel m = train(data, c);
    const TrainedModel fresh = init_model(c);
    CHECK(checkpoint_to_json(m.config, m.params) == checkpoint_to_json(fresh.config, fresh.params));
    CHECK(m.training_log.empty());
  }

  SUBCASE("same seed twice gives identical parameters") {
    const TrainedModel a = train(data, cfg);
    const TrainedModel b = train(data, cfg);
    CHECK(checkpoint_to_json(a.config, a.params) == checkpoint_to_json(b.config, b.params));
    CHECK(a.training_log == b.training_log);
    REQUIRE(a.training_log.size() == cfg.epochs);
  }

  SUBCASE("loss goes down on the training data") {
    ModelConfig c = cfg;
    c.epochs = 15;
    const TrainedModel m = train(data, c);
    CHECK(m.training_log.back() < m.training_log.front());
  }

  SUBCASE("per-pair stepping takes one step per pair") {
    ModelConfig c = cfg;
    c.step = StepUnit::Pair;
    c.epochs = 1;
    std::size_t calls = 0;
    TrainOptions opts;
    opts.on_epoch = [&](std::size_t, double loss) {
      ++calls;
      CHECK(std::isfinite(loss));
    };
    train(data, c, opts);
    CHECK(calls == 1);
  }

  SUBCASE("training data without a root cause is rejected") {
    auto bad = data;
    for (auto& n : bad[0].graph.nodes) n.is_root_cause = false;
    CHECK_THROWS_AS(train(bad, cfg), ValidationError);
  }

  SUBCASE("embedding width must match the model") {
    ModelConfig c = cfg;
    c.dim = 16;
    c.heads = 2;
    CHECK_THROWS_AS(train(data, c), ShapeError);
  }
}

TEST_CASE("ranking") {
  const auto data = small_data(6, 9);
  TrainedModel m = init_model(small_config());

  SUBCASE("deleted lines in score order") {
    for (const auto& eg : data) {
      const auto ranked = rank_commit(m, eg);
      CHECK(ranked.size() == eg.graph.num_deleted());
      for (std::size_t i = 1; i < ranked.size(); ++i) {
        CHECK(ranked[i - 1].score >= ranked[i].score);
        if (ranked[i - 1].score == ranked[i].score) CHECK(ranked[i - 1].node < ranked[i].node);
      }
      for (const auto& r : ranked) CHECK(eg.graph.nodes[r.node].kind == NodeKind::Deleted);
    }
  }

  SUBCASE("equal scores fall back to node id") {
    m.params.scorer_w = Tensor(1, m.params.scorer_w.cols());
    m.params.scorer_b = Tensor(1, 1, 3.0);
    const auto ranked = rank_commit(m, data[0]);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      CHECK(ranked[i].node == i);
      CHECK(ranked[i].score == 3.0);
    }
  }

  SUBCASE("single deleted line") {
    EmbeddedGraph eg = data[0];
    CommitGraph g;
    g.commit_id = "single";
    g.nodes = {line(0, NodeKind::Deleted, true)};
    eg.graph = g;
    eg.h0 = Tensor(1, 8, 0.25);
    const auto ranked = rank_commit(m, eg);
    REQUIRE(ranked.size() == 1);
    CHECK(ranked[0].node == 0);
  }

  SUBCASE("no deleted lines") {
    EmbeddedGraph eg = data[0];
    eg.graph.nodes = {line(0, NodeKind::Added, false)};
    eg.graph.edges.clear();
    eg.h0 = Tensor(1, 8);
    CHECK_THROWS_AS(rank_commit(m, eg), ValidationError);
    std::vector<EmbeddedGraph> batch = {eg, data[1]};
    const auto all = rank_all(m, batch);
    CHECK(all[0].empty());
    CHECK(all[1] == rank_commit(m, data[1]));
  }

  SUBCASE("parallel ranking matches the serial reference") {
    CHECK(rank_all(m, data, 4) == rank_all_serial(m, data));
  }
}
