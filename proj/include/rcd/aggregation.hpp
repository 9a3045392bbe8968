#pragma once

// Typed multi-head attention over a commit graph.
//
// Every per-edge quantity is a matrix with one row per edge. Edges are kept in
// target-major order: sorted by (dst, src, kind ordinal), so each target's
// incoming edges form one contiguous block listed in neighbors_in order.
// Gathers and scatters between node rows and edge rows are products with
// constant one-hot selection matrices, which keeps the whole layer inside the
// differentiable op set.

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rcd/autodiff.hpp"
#include "rcd/commit_graph.hpp"
#include "rcd/params.hpp"

namespace rcd {

struct IndexedEdge {
  std::size_t src;
  std::size_t dst;
  EdgeKind kind;
};

class GraphIndex {
 public:
  explicit GraphIndex(const CommitGraph& g);

  std::size_t num_nodes() const { return kinds_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  NodeKind kind(std::size_t node) const { return kinds_[node]; }
  std::span<const IndexedEdge> edges() const { return edges_; }
  // Edge rows [first, second) targeting `node`.
  std::pair<std::size_t, std::size_t> incoming(std::size_t node) const { return segments_[node]; }
  bool has_edges_of(EdgeKind e) const { return !src_select_[ordinal(e)].empty(); }
  bool has_nodes_of(NodeKind a) const { return !node_select_[ordinal(a)].empty(); }

  // n_a x n rows picking the nodes of kind a.
  const Tensor& node_select(NodeKind a) const { return node_select_[ordinal(a)]; }
  const Tensor& node_scatter(NodeKind a) const { return node_scatter_[ordinal(a)]; }
  // E x n, row k one-hot at the source of edge k when edge k has kind e.
  const Tensor& src_select(EdgeKind e) const { return src_select_[ordinal(e)]; }
  // E x n one-hot at each edge's target, and its transpose.
  const Tensor& dst_select() const { return dst_select_; }
  const Tensor& dst_scatter() const { return dst_scatter_; }
  // E x kPriorCount one-hot at prior_index(kind(src), kind, kind(dst)).
  const Tensor& prior_select() const { return prior_select_; }

 private:
  std::vector<NodeKind> kinds_;
  std::vector<IndexedEdge> edges_;
  std::vector<std::pair<std::size_t, std::size_t>> segments_;
  std::array<Tensor, kNodeKinds> node_select_, node_scatter_;
  std::array<Tensor, kEdgeKinds> src_select_;
  Tensor dst_select_, dst_scatter_, prior_select_;
};

// Per-head slices of the key, query and value projections (each n x D/H).
struct HeadVectors {
  Var k_full, q_full, v_full;
  std::vector<Var> k, q, v;
};

// Each node is projected with the weights of its own kind; head j holds
// columns [j*D/H, (j+1)*D/H).
HeadVectors project_kqv(Var h, const HgtLayerParams& p, const GraphIndex& g);

// E x H logits: row-vector key(s) * W_att[kind, head] * query(t)^T, times the
// prior mu[kind(s), kind, kind(t)], divided by sqrt(D/H).
Var attention_logits(const GraphIndex& g, const HeadVectors& kv, const HgtLayerParams& p);

// E x H weights: softmax per head over all incoming edges of each target.
Var attention_weights(Var logits, const GraphIndex& g);

// Per head, E x D/H messages value(s) * W_msg[kind, head].
std::vector<Var> propagate_messages(const HeadVectors& kv, const GraphIndex& g,
                                    const HgtLayerParams& p);

// n x D: per target and head, the weighted sum of incoming messages; heads are
// concatenated. Targets without incoming edges get zero rows.
Var aggregate(Var weights, std::span<const Var> messages, const GraphIndex& g);

Var hgt_forward(Var h, const GraphIndex& g, const HgtLayerParams& p);

}  // namespace rcd
