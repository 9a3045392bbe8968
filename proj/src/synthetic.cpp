#include "rcd/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <set>
#include <tuple>

#include "rcd/embedding.hpp"
#include "rcd/error.hpp"
#include "rcd/rng.hpp"

namespace rcd {

namespace {

constexpr std::array<std::string_view, 12> kSignal = {
    "lock",   "unlock", "mutex",   "release", "acquire", "nullptr",
    "free",   "refcnt", "barrier", "atomic",  "deref",   "dangling"};

constexpr std::array<std::string_view, 24> kNoise = {
    "i",      "count", "size",   "append", "print", "value",  "index",  "buffer",
    "result", "name",  "format", "total",  "list",  "update", "config", "item",
    "offset", "width", "height", "render", "parse", "token",  "label",  "path"};

std::string_view pick(std::span<const std::string_view> vocab, Rng& rng) {
  return vocab[static_cast<std::size_t>(rng.below(vocab.size()))];
}

// "a . b ( c , d ) ;" style line from the given token pools.
std::string make_line(Rng& rng, std::span<const std::string_view> primary, std::size_t n_primary,
                      std::size_t n_noise) {
  std::vector<std::string_view> toks;
  for (std::size_t i = 0; i < n_primary; ++i) toks.push_back(pick(primary, rng));
  for (std::size_t i = 0; i < n_noise; ++i) toks.push_back(pick(kNoise, rng));
  rng.shuffle(std::span<std::string_view>(toks));
  std::string line;
  static constexpr std::array<std::string_view, 4> kSeparators = {" . ", " ( ", " , ", " = "};
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i > 0) line += kSeparators[static_cast<std::size_t>(rng.below(kSeparators.size()))];
    line += toks[i];
  }
  line += " ;";
  return line;
}

std::string noise_line(Rng& rng) { return make_line(rng, kNoise, 5, 0); }
std::string signal_line(Rng& rng) { return make_line(rng, kSignal, 3, 2); }

}  // namespace

std::span<const std::string_view> signal_vocabulary() { return kSignal; }
std::span<const std::string_view> noise_vocabulary() { return kNoise; }

std::size_t count_signal_tokens(std::string_view text) {
  std::size_t count = 0;
  for (const auto& tok : tokenize(text))
    if (std::find(kSignal.begin(), kSignal.end(), tok) != kSignal.end()) ++count;
  return count;
}

void validate_gen_config(const GenConfig& cfg) {
  if (cfg.deleted_per_commit < 2) throw ConfigError("deleted_per_commit must be at least 2");
  if (cfg.added_per_commit < 1) throw ConfigError("added_per_commit must be at least 1");
  if (!(cfg.edge_density >= 0.0 && cfg.edge_density <= 1.0))
    throw ConfigError("edge_density must lie in [0, 1]");
  if (!(cfg.signal_strength >= 0.0 && cfg.signal_strength <= 1.0))
    throw ConfigError("signal_strength must lie in [0, 1]");
}

Dataset generate(const GenConfig& cfg) {
  validate_gen_config(cfg);
  Rng rng(cfg.seed);
  Dataset ds;
  ds.name = cfg.name;
  const std::size_t nd = cfg.deleted_per_commit, na = cfg.added_per_commit, n = nd + na;

  for (std::size_t c = 0; c < cfg.n_commits; ++c) {
    CommitGraph g;
    char id[32];
    std::snprintf(id, sizeof id, "synthetic-%05zu", c);
    g.commit_id = id;
    g.timestamp = 1'600'000'000 + static_cast<std::int64_t>(c) * 3600;

    const auto root = static_cast<std::size_t>(rng.below(nd));
    const bool signal = rng.bernoulli(cfg.signal_strength);
    const auto source = nd + static_cast<std::size_t>(rng.below(na));
    const bool text_signal = signal && !cfg.structure_only;

    for (std::size_t i = 0; i < n; ++i) {
      LineNode node;
      node.id = i;
      node.kind = i < nd ? NodeKind::Deleted : NodeKind::Added;
      node.is_root_cause = i == root;
      const bool signal_text = text_signal && (i == root || i == source);
      node.text = signal_text ? signal_line(rng) : noise_line(rng);
      g.nodes.push_back(std::move(node));
    }

    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> present;
    auto add_edge = [&](std::size_t s, std::size_t d, EdgeKind k) {
      if (present.emplace(s, d, ordinal(k)).second) g.edges.push_back({s, d, k});
    };

    // Sequential control flow inside each version.
    for (std::size_t i = 0; i + 1 < nd; ++i) add_edge(i, i + 1, EdgeKind::ControlFlow);
    for (std::size_t i = nd; i + 1 < n; ++i) add_edge(i, i + 1, EdgeKind::ControlFlow);
    // Matched lines across versions.
    for (std::size_t a = nd; a < n; ++a)
      if (rng.bernoulli(0.5)) add_edge(static_cast<std::size_t>(rng.below(nd)), a, EdgeKind::LineMapping);

    constexpr std::array<EdgeKind, 4> kRandomKinds = {EdgeKind::ControlFlow, EdgeKind::DataDependency,
                                                      EdgeKind::Call, EdgeKind::ClassMemberRef};
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t d = 0; d < n; ++d) {
        if (s == d || !rng.bernoulli(cfg.edge_density)) continue;
        const EdgeKind k = kRandomKinds[static_cast<std::size_t>(rng.below(kRandomKinds.size()))];
        if (k == EdgeKind::DataDependency && s >= nd && d < nd) continue;
        add_edge(s, d, k);
      }
    }

    if (signal) add_edge(source, root, EdgeKind::DataDependency);
    ds.graphs.push_back(std::move(g));
  }
  return ds;
}

}  // namespace rcd
