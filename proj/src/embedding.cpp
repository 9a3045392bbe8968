#include "rcd/embedding.hpp"

#include <cctype>
#include <cmath>
#include <exception>

#include "rcd/error.hpp"

namespace rcd {

std::uint64_t feature_hash(std::string_view feature) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ kFeatureHashSeed;
  for (unsigned char c : feature) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      cur.push_back(ch);
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

std::vector<double> embed_hash(std::string_view text, std::size_t dim) {
  if (dim == 0) throw ConfigError("embedding dim must be positive");
  std::vector<double> v(dim, 0.0);
  const auto tokens = tokenize(text);
  auto add = [&](const std::string& feature) {
    const std::uint64_t h = feature_hash(feature);
    v[h % dim] += (h >> 63) ? 1.0 : -1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add("u:" + tokens[i]);
    if (i + 1 < tokens.size()) add("b:" + tokens[i] + " " + tokens[i + 1]);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw ConfigError("embedding dim must be positive");
}

std::vector<double> HashingEmbedder::embed(std::string_view text) const {
  return embed_hash(text, dim_);
}

std::vector<double> PrecomputedOnly::embed(std::string_view) const {
  throw ValidationError("node has no precomputed embedding and the provider cannot embed text");
}

EmbeddedGraph embed_graph(const CommitGraph& g, const EmbeddingProvider& p) {
  const std::size_t d = p.dim();
  EmbeddedGraph eg{g, Tensor(g.nodes.size(), d)};
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const LineNode& node = g.nodes[i];
    std::vector<double> row;
    if (node.embedding) {
      if (node.embedding->size() != d) {
        throw ValidationError("commit '" + g.commit_id + "' node " + std::to_string(node.id) +
                              ": embedding length " + std::to_string(node.embedding->size()) +
                              " does not match dim " + std::to_string(d));
      }
      row = *node.embedding;
    } else if (node.text) {
      row = p.embed(*node.text);
    } else {
      throw ValidationError("commit '" + g.commit_id + "' node " + std::to_string(node.id) +
                            " has neither text nor embedding");
    }
    for (std::size_t c = 0; c < d; ++c) {
      if (!std::isfinite(row[c])) {
        throw ValidationError("commit '" + g.commit_id + "' node " + std::to_string(node.id) +
                              " has a non-finite embedding value");
      }
      eg.h0(i, c) = row[c];
    }
  }
  return eg;
}

std::vector<EmbeddedGraph> embed_dataset(const Dataset& d, const EmbeddingProvider& p,
                                         [[maybe_unused]] int jobs) {
  std::vector<EmbeddedGraph> out(d.graphs.size());
  const auto n = static_cast<std::ptrdiff_t>(d.graphs.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(jobs < 1 ? 1 : jobs)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = embed_graph(d.graphs[static_cast<std::size_t>(i)], p);
    } catch (...) {
#pragma omp critical(rcd_embed_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::size_t precomputed_dim(const Dataset& d) {
  std::size_t dim = 0;
  for (const auto& g : d.graphs) {
    for (const auto& n : g.nodes) {
      if (!n.embedding) continue;
      if (dim == 0) {
        dim = n.embedding->size();
      } else if (n.embedding->size() != dim) {
        throw ValidationError("commit '" + g.commit_id + "' node " + std::to_string(n.id) +
                              ": embedding length " + std::to_string(n.embedding->size()) +
                              " differs from " + std::to_string(dim));
      }
    }
  }
  return dim;
}

}  // namespace rcd
