#include "rcd/params.hpp"

#include <cmath>

#include "rcd/error.hpp"

namespace rcd {

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Full: return "full";
    case Mode::AggregationOnly: return "aggregation-only";
    case Mode::RetentionOnly: return "retention-only";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::Full, Mode::AggregationOnly, Mode::RetentionOnly})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

std::string_view to_string(StepUnit s) { return s == StepUnit::Commit ? "commit" : "pair"; }

std::optional<StepUnit> parse_step_unit(std::string_view s) {
  if (s == "commit") return StepUnit::Commit;
  if (s == "pair") return StepUnit::Pair;
  return std::nullopt;
}

void validate_config(const ModelConfig& cfg) {
  if (cfg.dim == 0) throw ConfigError("dim must be positive");
  if (cfg.heads == 0) throw ConfigError("heads must be positive");
  if (cfg.dim % cfg.heads != 0) {
    throw ConfigError("heads must divide dim (dim=" + std::to_string(cfg.dim) +
                      ", heads=" + std::to_string(cfg.heads) + ")");
  }
  if (cfg.layers == 0) throw ConfigError("layers must be at least 1");
  if (cfg.d_out == 0) throw ConfigError("d_out must be positive");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("lr must be positive");
  if (!(cfg.sigma > 0.0) || !std::isfinite(cfg.sigma)) throw ConfigError("sigma must be positive");
}

namespace {

Tensor uniform(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Tensor t(rows, cols);
  for (double& x : t.values()) x = rng.uniform(-bound, bound);
  return t;
}

Tensor xavier(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
  return uniform(fan_out, fan_in, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Tensor identity_plus_noise(std::size_t n, Rng& rng) {
  Tensor t = uniform(n, n, 0.01, rng);
  for (std::size_t i = 0; i < n; ++i) t(i, i) += 1.0;
  return t;
}

}  // namespace

HgtLayerParams init_hgt_layer(std::size_t dim, std::size_t heads, bool use_bias, Rng& rng) {
  HgtLayerParams p;
  p.heads = heads;
  p.use_bias = use_bias;
  const std::size_t dh = dim / heads;
  for (std::size_t a = 0; a < kNodeKinds; ++a) {
    p.k_weight[a] = xavier(dim, dim, rng);
    p.q_weight[a] = xavier(dim, dim, rng);
    p.v_weight[a] = xavier(dim, dim, rng);
    p.k_bias[a] = Tensor(1, dim);
    p.q_bias[a] = Tensor(1, dim);
    p.v_bias[a] = Tensor(1, dim);
  }
  for (std::size_t i = 0; i < kEdgeKinds * heads; ++i) p.att.push_back(identity_plus_noise(dh, rng));
  for (std::size_t i = 0; i < kEdgeKinds * heads; ++i) p.msg.push_back(identity_plus_noise(dh, rng));
  p.mu = Tensor(kPriorCount, 1, 1.0);
  return p;
}

GruParams init_gru(std::size_t dim, Rng& rng) {
  const double b = 1.0 / std::sqrt(static_cast<double>(dim));
  GruParams g;
  for (Tensor* w : {&g.w_ir, &g.w_hr, &g.w_in, &g.w_hn, &g.w_iz, &g.w_hz}) *w = uniform(dim, dim, b, rng);
  for (Tensor* v : {&g.b_ir, &g.b_hr, &g.b_in, &g.b_hn, &g.b_iz, &g.b_hz}) *v = uniform(1, dim, b, rng);
  return g;
}

NetworkParams init_network(const ModelConfig& cfg, Rng& rng) {
  validate_config(cfg);
  NetworkParams p;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    LayerParams layer;
    layer.hgt = init_hgt_layer(cfg.dim, cfg.heads, cfg.qkv_bias, rng);
    layer.gru = init_gru(cfg.dim, rng);
    p.layers.push_back(std::move(layer));
  }
  p.norm_gain = Tensor(1, cfg.dim, 1.0);
  p.norm_bias = Tensor(1, cfg.dim);
  p.w_proj = xavier(cfg.d_out, cfg.dim, rng);
  p.b_proj = Tensor(1, cfg.d_out);
  p.scorer_w = xavier(1, cfg.d_out, rng);
  p.scorer_b = Tensor(1, 1);
  return p;
}

std::vector<NamedTensor> named_tensors(NetworkParams& p) {
  std::vector<NamedTensor> out;
  visit_params(p, [&](const std::string& name, Tensor& t) { out.push_back({name, &t}); });
  return out;
}

}  // namespace rcd
