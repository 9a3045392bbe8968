#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rcd/embedding.hpp"
#include "rcd/error.hpp"

using namespace rcd;

namespace {

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// Direct transcription of the documented hash: FNV-1a 64 with the seeded
// offset basis, then splitmix64's finalizer.
std::uint64_t reference_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ 0x5243446574656374ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

CommitGraph text_graph() {
  CommitGraph g;
  g.commit_id = "e";
  LineNode a;
  a.id = 0;
  a.text = "int x = 0;";
  a.is_root_cause = true;
  LineNode b;
  b.id = 1;
  b.kind = NodeKind::Added;
  b.text = "return a + b;";
  g.nodes = {a, b};
  return g;
}

}  // namespace

TEST_CASE("embed_hash basics") {
  CHECK(embed_hash("", 8) == std::vector<double>(8, 0.0));
  CHECK(embed_hash(" ;;( ", 8) == std::vector<double>(8, 0.0));
  CHECK(embed_hash("int x = 0;", 16) == embed_hash("int x = 0;", 16));
  CHECK(std::abs(norm(embed_hash("return a + b;", 32)) - 1.0) < 1e-12);
  CHECK_THROWS_AS(embed_hash("x", 0), ConfigError);
}

TEST_CASE("feature hash matches the documented construction") {
  for (const char* s : {"", "u:x", "b:return a", "u:mutex"}) CHECK(feature_hash(s) == reference_hash(s));
}

TEST_CASE("embed_hash follows the documented feature scheme") {
  const std::size_t dim = 16;
  std::vector<double> expect(dim, 0.0);
  for (const char* f : {"u:a", "u:b", "b:a b"}) {
    const std::uint64_t h = reference_hash(f);
    expect[h % dim] += (h >> 63) ? 1.0 : -1.0;
  }
  const double n = norm(expect);
  for (auto& x : expect) x /= n;
  const auto got = embed_hash("a+b", dim);
  for (std::size_t i = 0; i < dim; ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-15));
}

TEST_CASE("tokenize splits on non-alphanumerics") {
  CHECK(tokenize("foo(bar_2, x9);") == std::vector<std::string>{"foo", "bar", "2", "x9"});
  CHECK(tokenize("").empty());
}

TEST_CASE("embed_graph") {
  SUBCASE("text rows equal embed_hash of each line") {
    const auto eg = embed_graph(text_graph(), HashingEmbedder(64));
    REQUIRE(eg.h0.rows() == 2);
    REQUIRE(eg.h0.cols() == 64);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto row = eg.h0.row_span(i);
      CHECK(std::vector<double>(row.begin(), row.end()) == embed_hash(*eg.graph.nodes[i].text, 64));
    }
  }

  SUBCASE("precomputed rows are used verbatim") {
    CommitGraph g = text_graph();
    std::vector<double> v(768);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.001 * static_cast<double>(i) - 0.3;
    for (auto& n : g.nodes) n.embedding = v;
    Dataset d{"pre", {g}};
    CHECK(precomputed_dim(d) == 768);
    const auto eg = embed_graph(g, PrecomputedOnly(768));
    for (std::size_t i = 0; i < 2; ++i) {
      const auto row = eg.h0.row_span(i);
      CHECK(std::vector<double>(row.begin(), row.end()) == v);
    }
  }

  SUBCASE("length mismatch names both lengths") {
    CommitGraph g = text_graph();
    g.nodes[0].embedding = std::vector<double>(767, 0.0);
    try {
      embed_graph(g, HashingEmbedder(768));
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("767") != std::string::npos);
      CHECK(msg.find("768") != std::string::npos);
    }
  }

  SUBCASE("text without a text provider") {
    CHECK_THROWS(embed_graph(text_graph(), PrecomputedOnly(4)));
  }
}

TEST_CASE("embed_dataset keeps order and matches the serial path") {
  Dataset d;
  for (int c = 0; c < 9; ++c) {
    CommitGraph g = text_graph();
    g.commit_id = "c" + std::to_string(c);
    g.nodes[0].text = "line " + std::to_string(c);
    d.graphs.push_back(g);
  }
  HashingEmbedder p(32);
  const auto par = embed_dataset(d, p, 4);
  REQUIRE(par.size() == d.graphs.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    CHECK(par[i].graph.commit_id == d.graphs[i].commit_id);
    CHECK(par[i].h0 == embed_graph(d.graphs[i], p).h0);
  }
}
