#pragma once

// Shared fixtures for the test binaries.

#include <cstdint>

#include "rcd/commit_graph.hpp"
#include "rcd/params.hpp"
#include "rcd/rng.hpp"
#include "rcd/tensor.hpp"

namespace rcd::test {

// Random graph with `n` nodes, at least one deleted root-cause line and
// edges drawn with probability `density` under the data-model rules.
CommitGraph random_graph(Rng& rng, std::size_t n, double density);

Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                     double hi = 1.0);

// Every parameter jittered, priors drawn from [0.5, 1.5].
NetworkParams random_params(const ModelConfig& cfg, Rng& rng);

}  // namespace rcd::test
