#pragma once

#include <cstdint>

#include "rcd/embedding.hpp"
#include "rcd/grad_check.hpp"
#include "rcd/params.hpp"

namespace rcd {

// Small labelled graph with every edge kind and a parallel edge pair: three
// deleted lines (line 0 is the root cause) and one added line, with random
// initial vectors in [-1, 1). Needs at least 4 nodes; extra nodes are deleted
// lines chained by control flow.
EmbeddedGraph make_check_graph(std::size_t nodes, std::size_t dim, std::uint64_t seed);

// Parameters drawn away from their structured initial values (identity-like
// matrices, unit priors, zero biases) so that every gradient is exercised.
NetworkParams make_check_params(const ModelConfig& cfg, std::uint64_t seed);

// Gradient check of the summed pairwise loss (tie pairs included) through the
// full network, over every parameter tensor.
GradCheckResult network_grad_check(const ModelConfig& cfg, std::size_t nodes, std::uint64_t seed,
                                   double step = 1e-5);

}  // namespace rcd
