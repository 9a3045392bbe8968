#include "rcd/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "rcd/error.hpp"

namespace rcd {

GraphIndex::GraphIndex(const CommitGraph& g) {
  const std::size_t n = g.nodes.size();
  kinds_.reserve(n);
  for (const auto& node : g.nodes) kinds_.push_back(node.kind);

  for (const auto& e : g.edges) {
    if (e.src >= n || e.dst >= n) {
      throw ValidationError("edge references missing node in commit '" + g.commit_id + "'");
    }
    edges_.push_back({e.src, e.dst, e.kind});
  }
  std::sort(edges_.begin(), edges_.end(), [](const IndexedEdge& a, const IndexedEdge& b) {
    return std::tuple(a.dst, a.src, ordinal(a.kind)) < std::tuple(b.dst, b.src, ordinal(b.kind));
  });

  const std::size_t m = edges_.size();
  segments_.assign(n, {0, 0});
  for (std::size_t k = 0, t = 0; t < n; ++t) {
    const std::size_t begin = k;
    while (k < m && edges_[k].dst == t) ++k;
    segments_[t] = {begin, k};
  }

  for (std::size_t a = 0; a < kNodeKinds; ++a) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (ordinal(kinds_[i]) == a) members.push_back(i);
    if (members.empty()) continue;
    node_select_[a] = Tensor(members.size(), n);
    node_scatter_[a] = Tensor(n, members.size());
    for (std::size_t r = 0; r < members.size(); ++r) {
      node_select_[a](r, members[r]) = 1.0;
      node_scatter_[a](members[r], r) = 1.0;
    }
  }

  if (m == 0) return;
  for (std::size_t k = 0; k < m; ++k) {
    Tensor& sel = src_select_[ordinal(edges_[k].kind)];
    if (sel.empty()) sel = Tensor(m, n);
    sel(k, edges_[k].src) = 1.0;
  }
  dst_select_ = Tensor(m, n);
  dst_scatter_ = Tensor(n, m);
  prior_select_ = Tensor(m, kPriorCount);
  for (std::size_t k = 0; k < m; ++k) {
    const auto& e = edges_[k];
    dst_select_(k, e.dst) = 1.0;
    dst_scatter_(e.dst, k) = 1.0;
    prior_select_(k, prior_index(kinds_[e.src], e.kind, kinds_[e.dst])) = 1.0;
  }
}

namespace {

Var project(Tape& tape, Var h, const std::array<Tensor, kNodeKinds>& weights,
            const std::array<Tensor, kNodeKinds>& biases, bool use_bias, const GraphIndex& g) {
  Var out;
  for (std::size_t a = 0; a < kNodeKinds; ++a) {
    const auto kind = static_cast<NodeKind>(a);
    if (!g.has_nodes_of(kind)) continue;
    Var rows = matmul(tape.constant(g.node_select(kind)), h);
    Var y = matmul(rows, transpose(tape.param(weights[a])));
    if (use_bias) y = add(y, tape.param(biases[a]));
    Var scattered = matmul(tape.constant(g.node_scatter(kind)), y);
    out = out.valid() ? add(out, scattered) : scattered;
  }
  return out;
}

std::vector<Var> split_heads(Var full, std::size_t heads) {
  const std::size_t dh = full.cols() / heads;
  std::vector<Var> parts;
  for (std::size_t i = 0; i < heads; ++i) parts.push_back(slice(full, i * dh, (i + 1) * dh));
  return parts;
}

// Sum over edge kinds of select_e(x) * W[e, head]; rows of other kinds are zero
// in each term.
Var per_kind_transform(Tape& tape, Var x, const GraphIndex& g,
                       const std::vector<Tensor>& mats, std::size_t heads, std::size_t head) {
  Var out;
  for (EdgeKind e : kAllEdgeKinds) {
    if (!g.has_edges_of(e)) continue;
    Var gathered = matmul(tape.constant(g.src_select(e)), x);
    Var term = matmul(gathered, tape.param(mats[ordinal(e) * heads + head]));
    out = out.valid() ? add(out, term) : term;
  }
  return out;
}

}  // namespace

HeadVectors project_kqv(Var h, const HgtLayerParams& p, const GraphIndex& g) {
  Tape& tape = *h.tape();
  const std::size_t dim = h.cols();
  if (h.rows() != g.num_nodes()) {
    throw ShapeError("project_kqv: " + std::to_string(h.rows()) + " state rows for " +
                     std::to_string(g.num_nodes()) + " nodes");
  }
  if (p.heads == 0 || dim % p.heads != 0) throw ShapeError("project_kqv: heads must divide dim");
  if (p.k_weight[0].cols() != dim) throw ShapeError("project_kqv: projection width mismatch");

  HeadVectors hv;
  hv.k_full = project(tape, h, p.k_weight, p.k_bias, p.use_bias, g);
  hv.q_full = project(tape, h, p.q_weight, p.q_bias, p.use_bias, g);
  hv.v_full = project(tape, h, p.v_weight, p.v_bias, p.use_bias, g);
  hv.k = split_heads(hv.k_full, p.heads);
  hv.q = split_heads(hv.q_full, p.heads);
  hv.v = split_heads(hv.v_full, p.heads);
  return hv;
}

Var attention_logits(const GraphIndex& g, const HeadVectors& kv, const HgtLayerParams& p) {
  Tape& tape = *kv.k_full.tape();
  const std::size_t heads = kv.k.size();
  const std::size_t m = g.num_edges();
  if (m == 0) return tape.constant(Tensor(0, heads));
  const std::size_t dh = kv.k.front().cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dh));

  Var dst = tape.constant(g.dst_select());
  Var ones = tape.constant(Tensor(dh, 1, 1.0));
  Var prior = matmul(tape.constant(g.prior_select()), tape.param(p.mu));

  std::vector<Var> per_head;
  for (std::size_t i = 0; i < heads; ++i) {
    Var kw = per_kind_transform(tape, kv.k[i], g, p.att, heads, i);
    Var q = matmul(dst, kv.q[i]);
    Var dot = matmul(mul(kw, q), ones);
    per_head.push_back(scale(mul(dot, prior), inv_sqrt_d));
  }
  return concat(per_head);
}

Var attention_weights(Var logits, const GraphIndex& g) {
  Tape& tape = *logits.tape();
  if (g.num_edges() == 0) return tape.constant(Tensor(0, logits.cols()));
  Var by_head = transpose(logits);
  std::vector<Var> blocks;
  for (std::size_t t = 0; t < g.num_nodes(); ++t) {
    auto [begin, end] = g.incoming(t);
    if (begin == end) continue;
    blocks.push_back(softmax(slice(by_head, begin, end)));
  }
  return transpose(concat(blocks));
}

std::vector<Var> propagate_messages(const HeadVectors& kv, const GraphIndex& g,
                                    const HgtLayerParams& p) {
  std::vector<Var> out;
  if (g.num_edges() == 0) return out;
  Tape& tape = *kv.v_full.tape();
  for (std::size_t i = 0; i < kv.v.size(); ++i)
    out.push_back(per_kind_transform(tape, kv.v[i], g, p.msg, kv.v.size(), i));
  return out;
}

Var aggregate(Var weights, std::span<const Var> messages, const GraphIndex& g) {
  Tape& tape = *weights.tape();
  if (g.num_edges() == 0 || messages.empty()) {
    std::size_t width = 0;
    for (const Var& m : messages) width += m.cols();
    return tape.constant(Tensor(g.num_nodes(), width));
  }
  Var scatter = tape.constant(g.dst_scatter());
  std::vector<Var> heads;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    Var w = slice(weights, i, i + 1);
    Var spread = matmul(w, tape.constant(Tensor(1, messages[i].cols(), 1.0)));
    heads.push_back(matmul(scatter, mul(spread, messages[i])));
  }
  return concat(heads);
}

Var hgt_forward(Var h, const GraphIndex& g, const HgtLayerParams& p) {
  if (g.num_edges() == 0) return h.tape()->constant(Tensor(h.rows(), h.cols()));
  HeadVectors kv = project_kqv(h, p, g);
  Var logits = attention_logits(g, kv, p);
  Var weights = attention_weights(logits, g);
  std::vector<Var> messages = propagate_messages(kv, g, p);
  return aggregate(weights, messages, g);
}

}  // namespace rcd
