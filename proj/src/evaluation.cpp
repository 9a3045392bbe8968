#include "rcd/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "rcd/error.hpp"
#include "rcd/rng.hpp"

namespace rcd {

using json = nlohmann::json;

CommitRanking make_commit_ranking(const CommitGraph& g, std::span<const RankedLine> ranked) {
  CommitRanking r;
  r.commit_id = g.commit_id;
  for (const auto& line : ranked) r.ranked.push_back(line.node);
  for (const auto& n : g.nodes)
    if (n.is_root_cause) r.truth.insert(n.id);
  return r;
}

namespace {

void require_nonempty(std::span<const CommitRanking> rs, const char* what) {
  if (rs.empty()) throw ValidationError(std::string(what) + ": no commits to evaluate");
}

std::size_t hits_in_top(const CommitRanking& r, std::size_t n) {
  const std::size_t limit = std::min(n, r.ranked.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < limit; ++i) hits += r.truth.count(r.ranked[i]);
  return hits;
}

}  // namespace

double recall_at_n(std::span<const CommitRanking> rs, std::size_t n) {
  require_nonempty(rs, "recall_at_n");
  if (n == 0) throw ValidationError("recall_at_n: n must be at least 1");
  std::size_t hits = 0, total = 0;
  for (const auto& r : rs) {
    hits += hits_in_top(r, n);
    total += r.truth.size();
  }
  if (total == 0) throw ValidationError("recall_at_n: no root-cause lines in the input");
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<std::size_t> first_ranks(std::span<const CommitRanking> rs) {
  std::vector<std::size_t> out;
  for (const auto& r : rs) {
    if (r.truth.empty()) {
      throw ValidationError("commit '" + r.commit_id + "' has no root-cause line");
    }
    auto it = std::find_if(r.ranked.begin(), r.ranked.end(),
                           [&](std::size_t id) { return r.truth.count(id) > 0; });
    if (it == r.ranked.end()) {
      throw ValidationError("commit '" + r.commit_id + "': root-cause line missing from ranking");
    }
    out.push_back(static_cast<std::size_t>(it - r.ranked.begin()) + 1);
  }
  return out;
}

double mfr(std::span<const CommitRanking> rs, MfrMode mode) {
  require_nonempty(rs, "mfr");
  if (mode == MfrMode::First) {
    const auto ranks = first_ranks(rs);
    const double total = std::accumulate(ranks.begin(), ranks.end(), 0.0);
    return total / static_cast<double>(ranks.size());
  }
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& r : rs) {
    if (r.truth.empty()) throw ValidationError("commit '" + r.commit_id + "' has no root-cause line");
    for (std::size_t t : r.truth) {
      auto it = std::find(r.ranked.begin(), r.ranked.end(), t);
      if (it == r.ranked.end()) {
        throw ValidationError("commit '" + r.commit_id + "': root-cause line missing from ranking");
      }
      total += static_cast<double>(it - r.ranked.begin()) + 1.0;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

Classification classification_at_k(std::span<const CommitRanking> rs, std::size_t k) {
  require_nonempty(rs, "classification_at_k");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& r : rs) {
    const std::size_t predicted = std::min(k, r.ranked.size());
    const std::size_t hits = hits_in_top(r, k);
    tp += hits;
    fp += predicted - hits;
    fn += r.truth.size() - hits;
  }
  Classification c;
  if (tp + fp > 0) c.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn > 0) c.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (c.precision + c.recall > 0.0) c.f1 = 2.0 * c.precision * c.recall / (c.precision + c.recall);
  return c;
}

EvalReport evaluate_rankings(std::span<const CommitRanking> rs, const EvalOptions& opts) {
  EvalReport r;
  for (std::size_t n : kReportedDepths) r.recall_at[n] = recall_at_n(rs, n);
  r.mfr = mfr(rs, opts.mfr_mode);
  r.per_commit_first_rank = first_ranks(rs);
  if (opts.classification) {
    r.classification.emplace();
    for (std::size_t k : kReportedDepths) (*r.classification)[k] = classification_at_k(rs, k);
  }
  return r;
}

EvalReport evaluate_model(const TrainedModel& m, std::span<const EmbeddedGraph> graphs,
                          const EvalOptions& opts, int jobs) {
  const auto ranked = rank_all(m, graphs, jobs);
  std::vector<CommitRanking> rs;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    if (graphs[i].graph.num_deleted() == 0) continue;
    rs.push_back(make_commit_ranking(graphs[i].graph, ranked[i]));
  }
  return evaluate_rankings(rs, opts);
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  if (reports.empty()) throw ValidationError("mean_report: no reports");
  const double n = static_cast<double>(reports.size());
  EvalReport out;
  const bool cls = std::all_of(reports.begin(), reports.end(),
                               [](const EvalReport& r) { return r.classification.has_value(); });
  if (cls) out.classification.emplace();
  for (const auto& r : reports) {
    for (const auto& [depth, v] : r.recall_at) out.recall_at[depth] += v / n;
    out.mfr += r.mfr / n;
    out.per_commit_first_rank.insert(out.per_commit_first_rank.end(),
                                     r.per_commit_first_rank.begin(),
                                     r.per_commit_first_rank.end());
    if (cls) {
      for (const auto& [k, c] : *r.classification) {
        auto& acc = (*out.classification)[k];
        acc.precision += c.precision / n;
        acc.recall += c.recall / n;
        acc.f1 += c.f1 / n;
      }
    }
  }
  return out;
}

Folds kfold_split(const Dataset& ds, std::size_t k, std::uint64_t seed, bool chronological) {
  const std::size_t n = ds.graphs.size();
  if (k < 2) throw ConfigError("k-fold split needs k >= 2");
  if (n < k) {
    throw ValidationError("cannot split " + std::to_string(n) + " commits into " +
                          std::to_string(k) + " folds");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Folds folds(k);

  if (chronological) {
    for (const auto& g : ds.graphs) {
      if (!g.timestamp) {
        throw ValidationError("chronological folds need a timestamp on every commit; '" +
                              g.commit_id + "' has none");
      }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return *ds.graphs[a].timestamp < *ds.graphs[b].timestamp;
    });
    const std::size_t base = n / k, extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
      const std::size_t size = base + (f < extra ? 1 : 0);
      for (std::size_t i = 0; i < size; ++i) folds[f].push_back(ds.graphs[order[pos++]].commit_id);
    }
    return folds;
  }

  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t p = 0; p < n; ++p) folds[p % k].push_back(ds.graphs[order[p]].commit_id);
  return folds;
}

CvReport cross_validate(const Dataset& ds, std::span<const EmbeddedGraph> embedded,
                        const ModelConfig& cfg, const CvOptions& opts) {
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < embedded.size(); ++i) by_id[embedded[i].graph.commit_id] = i;
  const Folds folds = kfold_split(ds, opts.k, opts.seed, opts.chronological);
  for (const auto& fold : folds)
    for (const auto& id : fold)
      if (!by_id.count(id)) throw ValidationError("commit '" + id + "' has no embedded graph");

  CvReport out;
  out.per_fold.resize(folds.size());
  std::exception_ptr failure;
  const auto nf = static_cast<std::ptrdiff_t>(folds.size());
#pragma omp parallel for schedule(dynamic) num_threads(std::max(opts.jobs, 1))
  for (std::ptrdiff_t f = 0; f < nf; ++f) {
    try {
      std::vector<EmbeddedGraph> train_set, test_set;
      for (std::size_t g = 0; g < folds.size(); ++g) {
        auto& dst = g == static_cast<std::size_t>(f) ? test_set : train_set;
        for (const auto& id : folds[g]) dst.push_back(embedded[by_id.at(id)]);
      }
      TrainedModel m = train(train_set, cfg);
      out.per_fold[static_cast<std::size_t>(f)] = evaluate_model(m, test_set, opts.eval, 1);
    } catch (...) {
#pragma omp critical(rcd_cv_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  out.mean = mean_report(out.per_fold);
  return out;
}

std::vector<ModeReport> mode_sweep(const Dataset& ds, std::span<const EmbeddedGraph> embedded,
                                   const ModelConfig& cfg, const CvOptions& opts) {
  std::vector<ModeReport> out;
  for (Mode m : {Mode::Full, Mode::AggregationOnly, Mode::RetentionOnly}) {
    ModelConfig c = cfg;
    c.mode = m;
    out.push_back({m, cross_validate(ds, embedded, c, opts)});
  }
  return out;
}

EvalReport cross_project(std::span<const std::vector<EmbeddedGraph>> train_projects,
                         std::span<const EmbeddedGraph> test_project, const ModelConfig& cfg,
                         const EvalOptions& opts, int jobs) {
  std::vector<EmbeddedGraph> train_set;
  for (const auto& project : train_projects)
    train_set.insert(train_set.end(), project.begin(), project.end());
  if (train_set.empty()) throw ValidationError("cross_project: empty training set");
  TrainedModel m = train(train_set, cfg);
  return evaluate_model(m, test_project, opts, jobs);
}

namespace {

json report_json(const EvalReport& r) {
  json j;
  for (const auto& [depth, v] : r.recall_at) j["recall@" + std::to_string(depth)] = v;
  j["mfr"] = r.mfr;
  j["per_commit_first_rank"] = r.per_commit_first_rank;
  if (r.classification) {
    json c;
    for (const auto& [k, v] : *r.classification)
      c[std::to_string(k)] = {{"precision", v.precision}, {"recall", v.recall}, {"f1", v.f1}};
    j["classification"] = std::move(c);
  }
  return j;
}

}  // namespace

std::string report_to_json(const EvalReport& r) { return report_json(r).dump(2) + "\n"; }

std::string cv_report_to_json(const CvReport& r) {
  json j = report_json(r.mean);
  j["per_fold"] = json::array();
  for (const auto& f : r.per_fold) j["per_fold"].push_back(report_json(f));
  return j.dump(2) + "\n";
}

std::string render_table(std::span<const std::pair<std::string, EvalReport>> rows) {
  std::size_t width = 8;
  for (const auto& [name, _] : rows) width = std::max(width, name.size());
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %9s  %9s  %9s  %7s\n", static_cast<int>(width), "Run",
                "Recall@1", "Recall@2", "Recall@3", "MFR");
  os << buf;
  for (const auto& [name, r] : rows) {
    auto at = [&](std::size_t n) {
      auto it = r.recall_at.find(n);
      return it == r.recall_at.end() ? 0.0 : it->second;
    };
    std::snprintf(buf, sizeof buf, "%-*s  %9.3f  %9.3f  %9.3f  %7.3f\n", static_cast<int>(width),
                  name.c_str(), at(1), at(2), at(3), r.mfr);
    os << buf;
    if (r.classification) {
      for (const auto& [k, c] : *r.classification) {
        std::snprintf(buf, sizeof buf, "%-*s  top-%zu precision=%.3f recall=%.3f f1=%.3f\n",
                      static_cast<int>(width), "", k, c.precision, c.recall, c.f1);
        os << buf;
      }
    }
  }
  return os.str();
}

}  // namespace rcd
