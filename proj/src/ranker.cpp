#include "rcd/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rcd/error.hpp"
#include "rcd/network.hpp"
#include "rcd/rng.hpp"

namespace rcd {

double score(std::span<const double> a, const NetworkParams& p) {
  if (a.size() != p.scorer_w.cols()) {
    throw ShapeError("score: embedding length " + std::to_string(a.size()) + ", scorer width " +
                     std::to_string(p.scorer_w.cols()));
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += p.scorer_w[k] * a[k];
  return s + p.scorer_b[0];
}

double pair_probability(double s_i, double s_j, double sigma) {
  return logistic(sigma * (s_i - s_j));
}

double pair_label(const LineNode& i, const LineNode& j) {
  if (i.kind != NodeKind::Deleted || j.kind != NodeKind::Deleted) {
    throw ValidationError("pair_label: both lines must be deleted lines");
  }
  if (i.is_root_cause && !j.is_root_cause) return 1.0;
  if (j.is_root_cause && !i.is_root_cause) return 0.0;
  return 0.5;
}

double pairwise_loss(double probability, double label) {
  const double p = std::clamp(probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
  const double q = std::clamp(1.0 - probability, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -label * std::log(p) - (1.0 - label) * std::log(q);
}

std::vector<PairSample> build_pairs(const CommitGraph& g, bool include_ties) {
  std::vector<std::size_t> deleted;
  for (const auto& n : g.nodes)
    if (n.kind == NodeKind::Deleted) deleted.push_back(n.id);
  std::vector<PairSample> pairs;
  for (std::size_t a = 0; a < deleted.size(); ++a) {
    for (std::size_t b = a + 1; b < deleted.size(); ++b) {
      const double label = pair_label(g.nodes[deleted[a]], g.nodes[deleted[b]]);
      if (label == 0.5 && !include_ties) continue;
      pairs.push_back({g.commit_id, deleted[a], deleted[b], label});
    }
  }
  return pairs;
}

Var pairwise_loss(Var scores, std::span<const PairSample> pairs, double sigma) {
  Tape& tape = *scores.tape();
  const std::size_t n = scores.rows();
  Tensor diff_rows(pairs.size(), n);
  Tensor labels(pairs.size(), 1);
  Tensor complement(pairs.size(), 1);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    diff_rows(k, pairs[k].i) += 1.0;
    diff_rows(k, pairs[k].j) -= 1.0;
    labels(k, 0) = pairs[k].label;
    complement(k, 0) = 1.0 - pairs[k].label;
  }
  Var diffs = scale(matmul(tape.constant(std::move(diff_rows)), scores), sigma);
  Var p = sigmoid(diffs);
  Var q = sub(tape.constant(Tensor(pairs.size(), 1, 1.0)), p);
  Var log_p = log(p, kProbabilityClamp);
  Var log_q = log(q, kProbabilityClamp);
  Var ll = add(mul(tape.constant(std::move(labels)), log_p),
               mul(tape.constant(std::move(complement)), log_q));
  return scale(sum(ll), -1.0);
}

AdamState::AdamState(const std::vector<NamedTensor>& params) {
  for (const auto& p : params) {
    m_.emplace_back(p.tensor->rows(), p.tensor->cols());
    v_.emplace_back(p.tensor->rows(), p.tensor->cols());
  }
}

void AdamState::step(const std::vector<NamedTensor>& params, const std::vector<Tensor>& grads,
                     double lr) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("adam: parameter list does not match optimizer state");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].tensor;
    const Tensor& g = grads[k];
    Tensor& m = m_[k];
    Tensor& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kEps);
    }
  }
}

TrainedModel init_model(const ModelConfig& cfg) {
  validate_config(cfg);
  Rng rng(cfg.seed);
  TrainedModel m;
  m.config = cfg;
  m.params = init_network(cfg, rng);
  return m;
}

namespace {

struct Prepared {
  const EmbeddedGraph* graph;
  GraphIndex index;
  std::vector<PairSample> pairs;
};

Var forward_scores(Tape& tape, const TrainedModel& m, const EmbeddedGraph& eg,
                   const GraphIndex& index) {
  Var a = network_forward(tape.constant(eg.h0), index, m.params, m.config);
  return score_nodes(a, m.params);
}

void check_dims(const TrainedModel& m, const EmbeddedGraph& eg) {
  if (eg.h0.cols() != m.config.dim) {
    throw ShapeError("commit '" + eg.graph.commit_id + "' has embedding dim " +
                     std::to_string(eg.h0.cols()) + " but the model expects " +
                     std::to_string(m.config.dim));
  }
}

// Forward + backward + one optimizer step; returns the loss before the step.
double step_on(TrainedModel& m, AdamState& adam, const std::vector<NamedTensor>& named,
               const Prepared& item, std::span<const PairSample> pairs) {
  Tape tape;
  Var scores = forward_scores(tape, m, *item.graph, item.index);
  Var loss = pairwise_loss(scores, pairs, m.config.sigma);
  const double value = loss.value()(0, 0);
  tape.backward(loss);
  std::vector<Tensor> grads;
  grads.reserve(named.size());
  for (const auto& p : named) grads.push_back(tape.grad(*p.tensor));
  adam.step(named, grads, m.config.lr);
  return value;
}

}  // namespace

double commit_loss(const TrainedModel& m, const EmbeddedGraph& eg) {
  check_dims(m, eg);
  auto pairs = build_pairs(eg.graph, m.config.include_tie_pairs);
  if (pairs.empty()) return 0.0;
  Tape tape;
  GraphIndex index(eg.graph);
  return pairwise_loss(forward_scores(tape, m, eg, index), pairs, m.config.sigma).value()(0, 0);
}

void train_epochs(TrainedModel& m, std::span<const EmbeddedGraph> data, std::size_t epochs,
                  std::uint64_t seed, const TrainOptions& opts) {
  std::vector<Prepared> items;
  items.reserve(data.size());
  for (const auto& eg : data) {
    check_dims(m, eg);
    if (eg.graph.num_root_causes() == 0) {
      throw ValidationError("training commit '" + eg.graph.commit_id + "' has no root-cause line");
    }
    items.push_back({&eg, GraphIndex(eg.graph), build_pairs(eg.graph, m.config.include_tie_pairs)});
  }

  std::vector<NamedTensor> named = named_tensors(m.params);
  AdamState adam(named);
  Rng rng(seed);
  std::vector<std::size_t> order(items.size());

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t counted = 0;
    for (std::size_t idx : order) {
      const Prepared& item = items[idx];
      if (item.pairs.empty()) continue;
      double loss = 0.0;
      try {
        if (m.config.step == StepUnit::Commit) {
          loss = step_on(m, adam, named, item, item.pairs);
        } else {
          for (std::size_t k = 0; k < item.pairs.size(); ++k)
            loss += step_on(m, adam, named, item, std::span(item.pairs).subspan(k, 1));
        }
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch + 1) +
                           ", commit '" + item.graph->graph.commit_id + "': " + e.what());
      }
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                           ", commit '" + item.graph->graph.commit_id + "'");
      }
      total += loss;
      ++counted;
    }
    const double mean = counted ? total / static_cast<double>(counted) : 0.0;
    m.training_log.push_back(mean);
    if (opts.on_epoch) opts.on_epoch(epoch + 1, mean);
  }
}

TrainedModel train(std::span<const EmbeddedGraph> data, const ModelConfig& cfg,
                   const TrainOptions& opts) {
  TrainedModel m = init_model(cfg);
  // Shuffling uses its own stream, independent of initialization.
  train_epochs(m, data, cfg.epochs, cfg.seed ^ 0x9e3779b97f4a7c15ULL, opts);
  return m;
}

std::vector<RankedLine> rank_commit(const TrainedModel& m, const EmbeddedGraph& eg) {
  check_dims(m, eg);
  if (eg.graph.num_deleted() == 0) {
    throw ValidationError("commit '" + eg.graph.commit_id + "' has no deleted lines to rank");
  }
  Tape tape;
  GraphIndex index(eg.graph);
  const Tensor& s = forward_scores(tape, m, eg, index).value();
  std::vector<RankedLine> out;
  for (const auto& n : eg.graph.nodes)
    if (n.kind == NodeKind::Deleted) out.push_back({n.id, s(n.id, 0)});
  std::sort(out.begin(), out.end(), [](const RankedLine& a, const RankedLine& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.node < b.node;
  });
  return out;
}

std::vector<std::vector<RankedLine>> rank_all_serial(const TrainedModel& m,
                                                     std::span<const EmbeddedGraph> graphs) {
  std::vector<std::vector<RankedLine>> out(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i)
    if (graphs[i].graph.num_deleted() > 0) out[i] = rank_commit(m, graphs[i]);
  return out;
}

std::vector<std::vector<RankedLine>> rank_all(const TrainedModel& m,
                                              std::span<const EmbeddedGraph> graphs,
                                              [[maybe_unused]] int jobs) {
  std::vector<std::vector<RankedLine>> out(graphs.size());
  const auto n = static_cast<std::ptrdiff_t>(graphs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(jobs, 1))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& eg = graphs[static_cast<std::size_t>(i)];
      if (eg.graph.num_deleted() > 0) out[static_cast<std::size_t>(i)] = rank_commit(m, eg);
    } catch (...) {
#pragma omp critical(rcd_rank_all_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace rcd
