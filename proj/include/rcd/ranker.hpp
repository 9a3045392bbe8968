#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rcd/autodiff.hpp"
#include "rcd/embedding.hpp"
#include "rcd/grad_check.hpp"
#include "rcd/params.hpp"

namespace rcd {

struct PairSample {
  std::string commit_id;
  std::size_t i = 0;
  std::size_t j = 0;
  double label = 0.5;  // probability that i ranks above j
};

// scorer_w . a + scorer_b
double score(std::span<const double> task_embedding, const NetworkParams& p);

// 1 / (1 + exp(-sigma (s_i - s_j)))
double pair_probability(double s_i, double s_j, double sigma = 1.0);

// 1 if only i is a root cause, 0 if only j is, 0.5 otherwise. Both nodes must
// be deleted lines.
double pair_label(const LineNode& i, const LineNode& j);

// Probabilities are clamped to [1e-12, 1 - 1e-12] before the logarithm.
inline constexpr double kProbabilityClamp = 1e-12;

// -label log(P) - (1 - label) log(1 - P)
double pairwise_loss(double probability, double label);

// All unordered pairs of deleted lines (i < j) in ascending order. Tie pairs
// (label 0.5) are kept only when include_ties is set.
std::vector<PairSample> build_pairs(const CommitGraph& g, bool include_ties);

// Summed pairwise loss of the given pairs on the tape; scores is n x 1.
Var pairwise_loss(Var scores, std::span<const PairSample> pairs, double sigma);

class AdamState {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  explicit AdamState(const std::vector<NamedTensor>& params);

  // One update of every parameter with its gradient (same order as the
  // constructor's list).
  void step(const std::vector<NamedTensor>& params, const std::vector<Tensor>& grads, double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct TrainedModel {
  NetworkParams params;
  ModelConfig config;
  std::vector<double> training_log;  // mean commit loss per epoch
};

struct TrainOptions {
  std::function<void(std::size_t epoch, double mean_loss)> on_epoch;
};

// Freshly initialized model from cfg.seed.
TrainedModel init_model(const ModelConfig& cfg);

// Summed pairwise loss of one commit under the model.
double commit_loss(const TrainedModel& m, const EmbeddedGraph& eg);

// Runs cfg.epochs passes; each pass visits commits in a seeded shuffled order
// and steps Adam once per commit (or per pair with StepUnit::Pair).
TrainedModel train(std::span<const EmbeddedGraph> data, const ModelConfig& cfg,
                   const TrainOptions& opts = {});
// Continues training an existing model for `epochs` more passes, with the
// shuffle stream seeded from `seed`.
void train_epochs(TrainedModel& m, std::span<const EmbeddedGraph> data, std::size_t epochs,
                  std::uint64_t seed, const TrainOptions& opts = {});

struct RankedLine {
  std::size_t node = 0;
  double score = 0.0;
  bool operator==(const RankedLine&) const = default;
};

// Deleted lines by descending score, ties by ascending node id.
std::vector<RankedLine> rank_commit(const TrainedModel& m, const EmbeddedGraph& eg);

// rank_commit over many graphs, spread over `jobs` OpenMP threads. Graphs
// without deleted lines yield an empty ranking.
std::vector<std::vector<RankedLine>> rank_all(const TrainedModel& m,
                                              std::span<const EmbeddedGraph> graphs,
                                              int jobs = 1);

// Serial reference for rank_all.
std::vector<std::vector<RankedLine>> rank_all_serial(const TrainedModel& m,
                                                     std::span<const EmbeddedGraph> graphs);

}  // namespace rcd
