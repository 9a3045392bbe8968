#include "rcd/network_check.hpp"

#include "rcd/error.hpp"
#include "rcd/network.hpp"
#include "rcd/ranker.hpp"
#include "rcd/rng.hpp"

namespace rcd {

EmbeddedGraph make_check_graph(std::size_t nodes, std::size_t dim, std::uint64_t seed) {
  if (nodes < 4) throw ConfigError("gradient check graph needs at least 4 nodes");
  Rng rng(seed);
  CommitGraph g;
  g.commit_id = "gradcheck";
  for (std::size_t i = 0; i < nodes; ++i) {
    LineNode n;
    n.id = i;
    n.kind = i == 3 ? NodeKind::Added : NodeKind::Deleted;
    n.is_root_cause = i == 0;
    n.text = "line " + std::to_string(i);
    g.nodes.push_back(n);
  }
  g.edges = {
      {0, 1, EdgeKind::ControlFlow},    {3, 0, EdgeKind::DataDependency},
      {1, 2, EdgeKind::Call},           {1, 2, EdgeKind::DataDependency},
      {2, 0, EdgeKind::ClassMemberRef}, {0, 3, EdgeKind::LineMapping},
      {2, 1, EdgeKind::ControlFlow},
  };
  for (std::size_t i = 4; i < nodes; ++i) g.edges.push_back({i - 1, i, EdgeKind::ControlFlow});

  Tensor h0(nodes, dim);
  for (double& x : h0.values()) x = rng.uniform(-1.0, 1.0);
  return {std::move(g), std::move(h0)};
}

NetworkParams make_check_params(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  NetworkParams p = init_network(cfg, rng);
  visit_params(p, [&](const std::string& name, Tensor& t) {
    const bool is_mu = name.ends_with(".mu");
    for (double& x : t.values()) {
      if (is_mu) {
        x = rng.uniform(0.5, 1.5);
      } else {
        x += rng.uniform(-0.2, 0.2);
      }
    }
  });
  return p;
}

GradCheckResult network_grad_check(const ModelConfig& cfg, std::size_t nodes, std::uint64_t seed,
                                   double step) {
  validate_config(cfg);
  EmbeddedGraph eg = make_check_graph(nodes, cfg.dim, seed);
  NetworkParams params = make_check_params(cfg, seed + 1);
  const auto pairs = build_pairs(eg.graph, true);
  const GraphIndex index(eg.graph);
  LossBuilder loss = [&](Tape& tape) {
    Var a = network_forward(tape.constant(eg.h0), index, params, cfg);
    return pairwise_loss(score_nodes(a, params), pairs, cfg.sigma);
  };
  return grad_check(loss, named_tensors(params), step);
}

}  // namespace rcd
