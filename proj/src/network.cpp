#include "rcd/network.hpp"

#include "rcd/error.hpp"

namespace rcd {

namespace {
Var linear(Var x, const Tensor& w, const Tensor& b) {
  Tape& tape = *x.tape();
  return add(matmul(x, transpose(tape.param(w))), tape.param(b));
}
}  // namespace

Var gru_cell(Var h_tilde, Var h_prev, const GruParams& p) {
  if (h_tilde.rows() != h_prev.rows() || h_tilde.cols() != h_prev.cols()) {
    throw ShapeError("gru_cell: " + h_tilde.value().shape_string() + " vs " +
                     h_prev.value().shape_string());
  }
  Tape& tape = *h_prev.tape();
  Var r = sigmoid(add(linear(h_tilde, p.w_ir, p.b_ir), linear(h_prev, p.w_hr, p.b_hr)));
  Var z = sigmoid(add(linear(h_tilde, p.w_iz, p.b_iz), linear(h_prev, p.w_hz, p.b_hz)));
  Var n = tanh(add(linear(h_tilde, p.w_in, p.b_in), mul(r, linear(h_prev, p.w_hn, p.b_hn))));
  Var one_minus_z = sub(tape.constant(Tensor(z.rows(), z.cols(), 1.0)), z);
  return add(mul(one_minus_z, n), mul(z, h_prev));
}

Var task_projection(Var h, const NetworkParams& p) { return relu(linear(h, p.w_proj, p.b_proj)); }

Var network_hidden(Var h0, const GraphIndex& g, const NetworkParams& p, const ModelConfig& cfg) {
  if (h0.cols() != cfg.dim) {
    throw ShapeError("embedding dim " + std::to_string(h0.cols()) + " does not match model dim " +
                     std::to_string(cfg.dim));
  }
  Var h = h0;
  for (const LayerParams& layer : p.layers) {
    switch (cfg.mode) {
      case Mode::Full:
        h = gru_cell(hgt_forward(h, g, layer.hgt), h, layer.gru);
        break;
      case Mode::AggregationOnly:
        h = hgt_forward(h, g, layer.hgt);
        break;
      case Mode::RetentionOnly:
        h = gru_cell(h, h, layer.gru);
        break;
    }
  }
  return h;
}

Var network_forward(Var h0, const GraphIndex& g, const NetworkParams& p, const ModelConfig& cfg) {
  Tape& tape = *h0.tape();
  Var h = network_hidden(h0, g, p, cfg);
  Var normed = layer_norm(h, tape.param(p.norm_gain), tape.param(p.norm_bias), kLayerNormEps);
  return task_projection(normed, p);
}

Var network_forward(Tape& tape, const EmbeddedGraph& eg, const NetworkParams& p,
                    const ModelConfig& cfg) {
  GraphIndex index(eg.graph);
  return network_forward(tape.constant(eg.h0), index, p, cfg);
}

Var score_nodes(Var task_embeddings, const NetworkParams& p) {
  return linear(task_embeddings, p.scorer_w, p.scorer_b);
}

}  // namespace rcd
