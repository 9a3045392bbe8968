#include "support.hpp"

#include <set>
#include <tuple>

namespace rcd::test {

CommitGraph random_graph(Rng& rng, std::size_t n, double density) {
  CommitGraph g;
  g.commit_id = "random";
  const std::size_t deleted = 1 + static_cast<std::size_t>(rng.below(n));
  for (std::size_t i = 0; i < n; ++i) {
    LineNode node;
    node.id = i;
    node.kind = i < deleted ? NodeKind::Deleted : NodeKind::Added;
    node.text = "line " + std::to_string(i);
    g.nodes.push_back(node);
  }
  g.nodes[rng.below(deleted)].is_root_cause = true;
  std::set<std::tuple<std::size_t, std::size_t, EdgeKind>> seen;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t d = 0; d < n; ++d) {
      if (s == d) continue;
      for (EdgeKind e : kAllEdgeKinds) {
        if (!rng.bernoulli(density)) continue;
        if (e == EdgeKind::LineMapping && !(s < deleted && d >= deleted)) continue;
        if (seen.emplace(s, d, e).second) g.edges.push_back({s, d, e});
      }
    }
  }
  return g;
}

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo, double hi) {
  Tensor t(rows, cols);
  for (auto& x : t.values()) x = rng.uniform(lo, hi);
  return t;
}

NetworkParams random_params(const ModelConfig& cfg, Rng& rng) {
  Rng init(cfg.seed);
  NetworkParams p = init_network(cfg, init);
  visit_params(p, [&](const std::string& name, Tensor& t) {
    const bool prior = name.size() >= 2 && name.compare(name.size() - 2, 2, "mu") == 0;
    for (auto& x : t.values()) x = prior ? rng.uniform(0.5, 1.5) : x + rng.uniform(-0.3, 0.3);
  });
  return p;
}

}  // namespace rcd::test
