#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rcd/commit_graph.hpp"
#include "rcd/tensor.hpp"

namespace rcd {

// Maps one source line to its initial D-dimensional vector.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<double> embed(std::string_view text) const = 0;
  virtual std::size_t dim() const = 0;
};

// Seed mixed into the FNV-1a offset basis of the feature hash.
inline constexpr std::uint64_t kFeatureHashSeed = 0x5243'4465'7465'6374ULL;

// 64-bit feature hash: FNV-1a over the bytes (offset basis xor kFeatureHashSeed)
// followed by the splitmix64 finalizer.
std::uint64_t feature_hash(std::string_view feature);

// Maximal runs of ASCII letters and digits.
std::vector<std::string> tokenize(std::string_view text);

// Signed feature hashing of token unigrams ("u:tok") and adjacent bigrams
// ("b:tok1 tok2"): bucket = hash % dim, sign = +1 if the top hash bit is set
// else -1. The result is scaled to unit Euclidean norm; no tokens gives the
// zero vector.
std::vector<double> embed_hash(std::string_view text, std::size_t dim);

class HashingEmbedder final : public EmbeddingProvider {
 public:
  explicit HashingEmbedder(std::size_t dim);
  std::vector<double> embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

// Accepts only precomputed vectors; any node that would need its text embedded
// is an error.
class PrecomputedOnly final : public EmbeddingProvider {
 public:
  explicit PrecomputedOnly(std::size_t dim) : dim_(dim) {}
  std::vector<double> embed(std::string_view text) const override;
  std::size_t dim() const override { return dim_; }

 private:
  std::size_t dim_;
};

struct EmbeddedGraph {
  CommitGraph graph;
  Tensor h0;  // nodes x D, row i belongs to node id i
};

EmbeddedGraph embed_graph(const CommitGraph& g, const EmbeddingProvider& p);

// Parallel over graphs when OpenMP is available; output order matches input.
std::vector<EmbeddedGraph> embed_dataset(const Dataset& d, const EmbeddingProvider& p,
                                         int jobs = 1);

// Length of the precomputed vectors in the dataset, or 0 if none carry one.
// Throws ValidationError if the lengths disagree.
std::size_t precomputed_dim(const Dataset& d);

}  // namespace rcd
