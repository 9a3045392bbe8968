#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rcd/commit_graph.hpp"
#include "rcd/embedding.hpp"
#include "rcd/params.hpp"
#include "rcd/ranker.hpp"

namespace rcd {

struct CommitRanking {
  std::string commit_id;
  std::vector<std::size_t> ranked;  // best first
  std::set<std::size_t> truth;
};

CommitRanking make_commit_ranking(const CommitGraph& g, std::span<const RankedLine> ranked);

// Truth lines found in the top n, over all truth lines.
double recall_at_n(std::span<const CommitRanking> rs, std::size_t n);

enum class MfrMode {
  First,  // best-placed truth line per commit
  All,    // every truth line's position
};

// 1-based position of the best-placed truth line of each commit.
std::vector<std::size_t> first_ranks(std::span<const CommitRanking> rs);
double mfr(std::span<const CommitRanking> rs, MfrMode mode = MfrMode::First);

struct Classification {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Top-k lines of every commit are the positive predictions.
Classification classification_at_k(std::span<const CommitRanking> rs, std::size_t k);

inline constexpr std::size_t kReportedDepths[] = {1, 2, 3};

struct EvalReport {
  std::map<std::size_t, double> recall_at;
  double mfr = 0.0;
  std::vector<std::size_t> per_commit_first_rank;
  std::optional<std::map<std::size_t, Classification>> classification;
};

struct EvalOptions {
  bool classification = false;
  MfrMode mfr_mode = MfrMode::First;
};

EvalReport evaluate_rankings(std::span<const CommitRanking> rs, const EvalOptions& opts = {});

// Ranks every graph with the model and evaluates.
EvalReport evaluate_model(const TrainedModel& m, std::span<const EmbeddedGraph> graphs,
                          const EvalOptions& opts = {}, int jobs = 1);

// Arithmetic mean of the numeric fields; first ranks are concatenated.
EvalReport mean_report(std::span<const EvalReport> reports);

using Folds = std::vector<std::vector<std::string>>;

// Seeded shuffle then round-robin assignment, or, when chronological is set,
// a timestamp sort cut into contiguous balanced folds.
Folds kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed, bool chronological = false);

struct CvOptions {
  std::size_t k = 10;
  std::uint64_t seed = 42;
  bool chronological = false;
  int jobs = 1;
  EvalOptions eval;
};

struct CvReport {
  EvalReport mean;
  std::vector<EvalReport> per_fold;
};

// Trains on k-1 folds and evaluates on the remaining one, for every fold.
// `embedded` must hold the graphs of `ds` (matched by commit id).
CvReport cross_validate(const Dataset& ds, std::span<const EmbeddedGraph> embedded,
                        const ModelConfig& cfg, const CvOptions& opts = {});

struct ModeReport {
  Mode mode;
  CvReport report;
};

// cross_validate once per network mode.
std::vector<ModeReport> mode_sweep(const Dataset& ds, std::span<const EmbeddedGraph> embedded,
                                   const ModelConfig& cfg, const CvOptions& opts = {});

// Train on the union of the training projects, evaluate on the held-out one.
EvalReport cross_project(std::span<const std::vector<EmbeddedGraph>> train_projects,
                         std::span<const EmbeddedGraph> test_project, const ModelConfig& cfg,
                         const EvalOptions& opts = {}, int jobs = 1);

// {"recall@1", "recall@2", "recall@3", "mfr", "per_commit_first_rank",
//  optional "classification": {"1": {"precision", "recall", "f1"}, ...}}
std::string report_to_json(const EvalReport& r);
// A report plus "per_fold": [report, ...].
std::string cv_report_to_json(const CvReport& r);

// Fixed-width table with Recall@1..3 and MFR columns, one row per entry.
std::string render_table(std::span<const std::pair<std::string, EvalReport>> rows);

}  // namespace rcd
