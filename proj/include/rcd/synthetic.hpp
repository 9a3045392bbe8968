#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "rcd/commit_graph.hpp"

namespace rcd {

struct GenConfig {
  std::size_t n_commits = 200;
  std::size_t deleted_per_commit = 10;
  std::size_t added_per_commit = 5;
  double edge_density = 0.05;
  double signal_strength = 1.0;
  std::uint64_t seed = 7;
  // Keep the signal only in the graph structure: every line draws from the
  // noise vocabulary.
  bool structure_only = false;
  std::string name = "synthetic";
};

void validate_gen_config(const GenConfig& cfg);

// Per commit: deleted lines first (ids 0..d-1), then added lines. One deleted
// line is the root cause. When its signal survives (probability
// signal_strength) the root line uses signal-vocabulary tokens and receives a
// data_dependency edge from an added line that shares signal tokens; that
// added->deleted data_dependency pattern is never produced as noise.
Dataset generate(const GenConfig& cfg);

std::span<const std::string_view> signal_vocabulary();
std::span<const std::string_view> noise_vocabulary();

// Number of signal-vocabulary tokens in a line.
std::size_t count_signal_tokens(std::string_view text);

}  // namespace rcd
