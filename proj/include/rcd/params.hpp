#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rcd/commit_graph.hpp"
#include "rcd/grad_check.hpp"
#include "rcd/rng.hpp"
#include "rcd/tensor.hpp"

namespace rcd {

// Which components the network runs. RetentionOnly drops the attention
// aggregation, AggregationOnly drops the gated retention cell.
enum class Mode { Full, AggregationOnly, RetentionOnly };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

// How often the optimizer steps during training.
enum class StepUnit { Commit, Pair };

std::string_view to_string(StepUnit s);
std::optional<StepUnit> parse_step_unit(std::string_view s);

struct ModelConfig {
  std::size_t dim = 64;
  std::size_t heads = 8;
  std::size_t layers = 2;
  std::size_t d_out = 64;
  Mode mode = Mode::Full;
  bool include_tie_pairs = false;
  bool qkv_bias = true;
  double lr = 5e-6;
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
  double sigma = 1.0;
  StepUnit step = StepUnit::Commit;

  bool operator==(const ModelConfig&) const = default;
};

// Throws ConfigError describing the first problem found.
void validate_config(const ModelConfig& cfg);

// Typed multi-head attention weights of one layer.
struct HgtLayerParams {
  std::size_t heads = 1;
  bool use_bias = true;
  // Indexed by NodeKind ordinal. Weights are D x D and applied as x * W^T.
  std::array<Tensor, kNodeKinds> k_weight, k_bias, q_weight, q_bias, v_weight, v_bias;
  // Indexed by edge_kind * heads + head; each (D/H) x (D/H).
  std::vector<Tensor> att;
  std::vector<Tensor> msg;
  // kNodeKinds * kEdgeKinds * kNodeKinds priors as a column, see prior_index.
  Tensor mu;

  const Tensor& att_for(EdgeKind e, std::size_t head) const { return att[ordinal(e) * heads + head]; }
  const Tensor& msg_for(EdgeKind e, std::size_t head) const { return msg[ordinal(e) * heads + head]; }
  Tensor& att_for(EdgeKind e, std::size_t head) { return att[ordinal(e) * heads + head]; }
  Tensor& msg_for(EdgeKind e, std::size_t head) { return msg[ordinal(e) * heads + head]; }
};

constexpr std::size_t prior_index(NodeKind src, EdgeKind e, NodeKind dst) {
  return (ordinal(src) * kEdgeKinds + ordinal(e)) * kNodeKinds + ordinal(dst);
}
inline constexpr std::size_t kPriorCount = kNodeKinds * kEdgeKinds * kNodeKinds;

// Gated retention cell. Weights are D x D applied as x * W^T, biases 1 x D.
struct GruParams {
  Tensor w_ir, w_hr, w_in, w_hn, w_iz, w_hz;
  Tensor b_ir, b_hr, b_in, b_hn, b_iz, b_hz;
};

struct LayerParams {
  HgtLayerParams hgt;
  GruParams gru;
};

struct NetworkParams {
  std::vector<LayerParams> layers;
  Tensor norm_gain, norm_bias;  // 1 x D
  Tensor w_proj;                // D_out x D
  Tensor b_proj;                // 1 x D_out
  Tensor scorer_w;              // 1 x D_out
  Tensor scorer_b;              // 1 x 1
};

HgtLayerParams init_hgt_layer(std::size_t dim, std::size_t heads, bool use_bias, Rng& rng);
GruParams init_gru(std::size_t dim, Rng& rng);
NetworkParams init_network(const ModelConfig& cfg, Rng& rng);

// Visits every tensor with its checkpoint name in the fixed serialization
// order: per layer the attention block (k/q/v weight and bias per node kind,
// att then msg per edge kind and head, mu) followed by the twelve retention
// tensors, then final_norm, proj, scorer.
template <class Params, class F>
void visit_params(Params& p, F&& f);

std::vector<NamedTensor> named_tensors(NetworkParams& p);

// Implementation of the visitor.

namespace detail {
template <class Hgt, class F>
void visit_hgt(Hgt& h, const std::string& prefix, F& f) {
  for (std::size_t a = 0; a < kNodeKinds; ++a) {
    const std::string kind(to_string(static_cast<NodeKind>(a)));
    f(prefix + "k_weight." + kind, h.k_weight[a]);
    f(prefix + "k_bias." + kind, h.k_bias[a]);
    f(prefix + "q_weight." + kind, h.q_weight[a]);
    f(prefix + "q_bias." + kind, h.q_bias[a]);
    f(prefix + "v_weight." + kind, h.v_weight[a]);
    f(prefix + "v_bias." + kind, h.v_bias[a]);
  }
  auto per_edge = [&](const std::string& which, auto& mats) {
    for (EdgeKind e : kAllEdgeKinds)
      for (std::size_t i = 0; i < h.heads; ++i)
        f(prefix + which + "." + std::string(to_string(e)) + ".head" + std::to_string(i),
          mats[ordinal(e) * h.heads + i]);
  };
  per_edge("att", h.att);
  per_edge("msg", h.msg);
  f(prefix + "mu", h.mu);
}

template <class Gru, class F>
void visit_gru(Gru& g, const std::string& prefix, F& f) {
  f(prefix + "w_ir", g.w_ir);
  f(prefix + "w_hr", g.w_hr);
  f(prefix + "w_in", g.w_in);
  f(prefix + "w_hn", g.w_hn);
  f(prefix + "w_iz", g.w_iz);
  f(prefix + "w_hz", g.w_hz);
  f(prefix + "b_ir", g.b_ir);
  f(prefix + "b_hr", g.b_hr);
  f(prefix + "b_in", g.b_in);
  f(prefix + "b_hn", g.b_hn);
  f(prefix + "b_iz", g.b_iz);
  f(prefix + "b_hz", g.b_hz);
}
}  // namespace detail

template <class Params, class F>
void visit_params(Params& p, F&& f) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string prefix = "layers." + std::to_string(l) + ".";
    detail::visit_hgt(p.layers[l].hgt, prefix + "hgt.", f);
    detail::visit_gru(p.layers[l].gru, prefix + "gru.", f);
  }
  f(std::string("final_norm.gain"), p.norm_gain);
  f(std::string("final_norm.bias"), p.norm_bias);
  f(std::string("proj.weight"), p.w_proj);
  f(std::string("proj.bias"), p.b_proj);
  f(std::string("scorer.weight"), p.scorer_w);
  f(std::string("scorer.bias"), p.scorer_b);
}

}  // namespace rcd
