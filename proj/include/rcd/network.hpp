#pragma once

#include "rcd/aggregation.hpp"
#include "rcd/autodiff.hpp"
#include "rcd/embedding.hpp"
#include "rcd/params.hpp"

namespace rcd {

// Gated retention of history h_prev against the aggregated neighbourhood
// h_tilde, row by row:
//   r = sigmoid(h_tilde W_ir^T + b_ir + h_prev W_hr^T + b_hr)
//   z = sigmoid(h_tilde W_iz^T + b_iz + h_prev W_hz^T + b_hz)
//   n = tanh(h_tilde W_in^T + b_in + r * (h_prev W_hn^T + b_hn))
//   out = (1 - z) * n + z * h_prev
Var gru_cell(Var h_tilde, Var h_prev, const GruParams& p);

// relu(h W_proj^T + b_proj)
Var task_projection(Var h, const NetworkParams& p);

// Hidden states after the last layer, before the final normalization.
Var network_hidden(Var h0, const GraphIndex& g, const NetworkParams& p, const ModelConfig& cfg);

// Per-node task embeddings (n x D_out).
Var network_forward(Var h0, const GraphIndex& g, const NetworkParams& p, const ModelConfig& cfg);

// Convenience overload: binds eg.h0 as a constant on `tape`.
Var network_forward(Tape& tape, const EmbeddedGraph& eg, const NetworkParams& p,
                    const ModelConfig& cfg);

// Scores (n x 1) as task embedding . scorer_w + scorer_b.
Var score_nodes(Var task_embeddings, const NetworkParams& p);

}  // namespace rcd
