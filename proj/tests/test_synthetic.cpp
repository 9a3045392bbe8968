#include <doctest.h>

#include <algorithm>

#include "rcd/error.hpp"
#include "rcd/evaluation.hpp"
#include "rcd/synthetic.hpp"

using namespace rcd;

namespace {

bool has_edge(const CommitGraph& g, std::size_t s, std::size_t d, EdgeKind k) {
  return std::find(g.edges.begin(), g.edges.end(), DepEdge{s, d, k}) != g.edges.end();
}

std::size_t root_of(const CommitGraph& g) {
  for (const auto& n : g.nodes)
    if (n.is_root_cause) return n.id;
  return g.nodes.size();
}

// Oracle ranker: deleted lines by descending signal-token count.
double oracle_recall_at_1(const Dataset& d) {
  std::vector<CommitRanking> rs;
  for (const auto& g : d.graphs) {
    std::vector<RankedLine> lines;
    for (const auto& n : g.nodes)
      if (n.kind == NodeKind::Deleted)
        lines.push_back({n.id, static_cast<double>(count_signal_tokens(*n.text))});
    std::stable_sort(lines.begin(), lines.end(),
                     [](const RankedLine& a, const RankedLine& b) { return a.score > b.score; });
    rs.push_back(make_commit_ranking(g, lines));
  }
  return recall_at_n(rs, 1);
}

}  // namespace

TEST_CASE("generated graphs follow the data model") {
  GenConfig cfg;
  cfg.n_commits = 40;
  cfg.deleted_per_commit = 6;
  cfg.added_per_commit = 3;
  const Dataset d = generate(cfg);
  REQUIRE(d.graphs.size() == 40);
  for (const auto& g : d.graphs) {
    CHECK(validate_graph(g).empty());
    CHECK(g.num_root_causes() == 1);
    CHECK(g.num_deleted() == 6);
    CHECK(g.nodes.size() == 9);
  }
}

TEST_CASE("full signal is structurally visible") {
  GenConfig cfg;
  cfg.n_commits = 30;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    cfg.seed = seed;
    for (const auto& g : generate(cfg).graphs) {
      const std::size_t root = root_of(g);
      CHECK(count_signal_tokens(*g.nodes[root].text) == 3);
      std::size_t sources = 0;
      for (std::size_t a = g.num_deleted(); a < g.nodes.size(); ++a) {
        if (!has_edge(g, a, root, EdgeKind::DataDependency)) continue;
        ++sources;
        CHECK(count_signal_tokens(*g.nodes[a].text) > 0);
      }
      CHECK(sources == 1);
      for (const auto& n : g.nodes)
        if (n.kind == NodeKind::Deleted && n.id != root) CHECK(count_signal_tokens(*n.text) == 0);
    }
  }
}

TEST_CASE("signal-token oracle ranks perfectly at full signal") {
  GenConfig cfg;
  cfg.n_commits = 50;
  CHECK(oracle_recall_at_1(generate(cfg)) == 1.0);
}

TEST_CASE("zero signal removes the planted features") {
  GenConfig cfg;
  cfg.n_commits = 50;
  cfg.signal_strength = 0.0;
  for (const auto& g : generate(cfg).graphs) {
    for (const auto& n : g.nodes) CHECK(count_signal_tokens(*n.text) == 0);
    for (const auto& e : g.edges) {
      const bool added_to_deleted = g.nodes[e.src].kind == NodeKind::Added &&
                                    g.nodes[e.dst].kind == NodeKind::Deleted;
      CHECK_FALSE((added_to_deleted && e.kind == EdgeKind::DataDependency));
    }
  }
}

TEST_CASE("structure-only keeps the edge and drops the tokens") {
  GenConfig cfg;
  cfg.n_commits = 20;
  cfg.structure_only = true;
  for (const auto& g : generate(cfg).graphs) {
    for (const auto& n : g.nodes) CHECK(count_signal_tokens(*n.text) == 0);
    const std::size_t root = root_of(g);
    bool found = false;
    for (std::size_t a = g.num_deleted(); a < g.nodes.size(); ++a)
      found = found || has_edge(g, a, root, EdgeKind::DataDependency);
    CHECK(found);
  }
}

TEST_CASE("generation is deterministic") {
  GenConfig cfg;
  cfg.n_commits = 15;
  CHECK(dataset_to_json(generate(cfg)) == dataset_to_json(generate(cfg)));
  GenConfig other = cfg;
  other.seed = cfg.seed + 1;
  CHECK(dataset_to_json(generate(cfg)) != dataset_to_json(generate(other)));
}

TEST_CASE("config validation") {
  GenConfig cfg;
  cfg.deleted_per_commit = 1;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg = {};
  cfg.signal_strength = 1.5;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
  cfg = {};
  cfg.edge_density = -0.1;
  CHECK_THROWS_AS(generate(cfg), ConfigError);
}

TEST_CASE("vocabularies are disjoint") {
  for (auto s : signal_vocabulary())
    CHECK(std::find(noise_vocabulary().begin(), noise_vocabulary().end(), s) ==
          noise_vocabulary().end());
}
