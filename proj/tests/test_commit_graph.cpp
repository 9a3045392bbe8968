#include <doctest.h>

#include <algorithm>

#include "rcd/commit_graph.hpp"
#include "rcd/error.hpp"

using namespace rcd;

namespace {

LineNode node(std::size_t id, NodeKind k, bool root = false) {
  LineNode n;
  n.id = id;
  n.kind = k;
  n.text = "x" + std::to_string(id);
  n.is_root_cause = root;
  return n;
}

bool mentions(const std::vector<std::string>& v, const std::string& needle) {
  return std::any_of(v.begin(), v.end(),
                     [&](const std::string& s) { return s.find(needle) != std::string::npos; });
}

const char* kMinimal = R"({
  "name": "mini",
  "graphs": [{
    "commit_id": "c1",
    "nodes": [
      {"id": 0, "kind": "deleted", "text": "free(p);", "is_root_cause": true},
      {"id": 1, "kind": "added", "text": "if (p) free(p);", "is_root_cause": false}
    ],
    "edges": [{"src": 0, "dst": 1, "kind": "line_mapping"}]
  }]
})";

}  // namespace

TEST_CASE("minimal file parses into one graph") {
  Dataset d = parse_dataset(kMinimal);
  REQUIRE(d.graphs.size() == 1);
  CHECK(d.name == "mini");
  CHECK(d.graphs[0].nodes.size() == 2);
  REQUIRE(d.graphs[0].edges.size() == 1);
  CHECK(d.graphs[0].edges[0].kind == EdgeKind::LineMapping);
  CHECK(d.graphs[0].nodes[0].is_root_cause);
  CHECK_FALSE(d.graphs[0].timestamp.has_value());
}

TEST_CASE("unknown edge kind is a schema error naming it") {
  std::string text = kMinimal;
  text.replace(text.find("line_mapping"), 12, "refactor");
  try {
    parse_dataset(text);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("refactor") != std::string::npos);
    CHECK(msg.find("c1") != std::string::npos);
  }
}

TEST_CASE("schema errors for unknown fields and wrong types") {
  std::string extra = kMinimal;
  extra.replace(extra.find("\"commit_id\""), 11, "\"author\": 1, \"commit_id\"");
  CHECK_THROWS_AS(parse_dataset(extra), SchemaError);

  std::string bad_root = kMinimal;
  bad_root.replace(bad_root.find("true"), 4, "\"yes\"");
  CHECK_THROWS_AS(parse_dataset(bad_root), SchemaError);

  CHECK_THROWS_AS(parse_dataset("{not json"), SchemaError);
}

TEST_CASE("root cause on an added line is rejected") {
  std::string text = kMinimal;
  text.replace(text.find("\"is_root_cause\": false"), 22, "\"is_root_cause\": true");
  CHECK_THROWS_AS(parse_dataset(text), ValidationError);
}

TEST_CASE("duplicate commit ids are rejected") {
  Dataset d = parse_dataset(kMinimal);
  d.graphs.push_back(d.graphs[0]);
  CHECK_THROWS_AS(parse_dataset(dataset_to_json(d)), ValidationError);
}

TEST_CASE("validate_graph") {
  CommitGraph g;
  g.commit_id = "v";
  for (std::size_t i = 0; i < 3; ++i) g.nodes.push_back(node(i, NodeKind::Deleted, i == 0));
  g.nodes.push_back(node(3, NodeKind::Added));
  g.nodes.push_back(node(4, NodeKind::Added));
  g.edges = {{0, 1, EdgeKind::ControlFlow}, {1, 3, EdgeKind::LineMapping}, {3, 2, EdgeKind::Call}};

  SUBCASE("well-formed 5-node graph") { CHECK(validate_graph(g).empty()); }

  SUBCASE("dangling edge") {
    g.nodes.resize(3);
    g.edges = {{0, 99, EdgeKind::Call}};
    CHECK(mentions(validate_graph(g), "edge references missing node 99"));
  }

  SUBCASE("no deleted lines") {
    CommitGraph a;
    a.nodes = {node(0, NodeKind::Added)};
    const auto v = validate_graph(a);
    CHECK(mentions(v, "no deleted lines"));
    ValidationOptions relaxed{false, false};
    CHECK(validate_graph(a, relaxed).empty());
  }

  SUBCASE("missing root cause only matters for training") {
    g.nodes[0].is_root_cause = false;
    CHECK(mentions(validate_graph(g), "no root-cause line"));
    CHECK(validate_graph(g, {false, true}).empty());
  }

  SUBCASE("self edge, duplicate, and reversed line mapping") {
    g.edges.push_back({2, 2, EdgeKind::DataDependency});
    g.edges.push_back({0, 1, EdgeKind::ControlFlow});
    g.edges.push_back({3, 0, EdgeKind::LineMapping});
    const auto v = validate_graph(g);
    CHECK(mentions(v, "self-referencing"));
    CHECK(mentions(v, "duplicate edge"));
    CHECK(mentions(v, "line_mapping"));
  }

  SUBCASE("ids must match positions") {
    g.nodes[2].id = 7;
    CHECK_FALSE(validate_graph(g).empty());
  }

  SUBCASE("a node needs text or an embedding") {
    g.nodes[1].text.reset();
    CHECK(mentions(validate_graph(g), "neither text nor embedding"));
  }
}

TEST_CASE("neighbors_in ordering") {
  CommitGraph g;
  for (std::size_t i = 0; i < 4; ++i) g.nodes.push_back(node(i, NodeKind::Deleted, i == 0));

  g.edges = {{0, 2, EdgeKind::ControlFlow}, {1, 2, EdgeKind::DataDependency}};
  CHECK(neighbors_in(g, 2) ==
        std::vector<InEdge>{{0, EdgeKind::ControlFlow}, {1, EdgeKind::DataDependency}});
  CHECK(neighbors_in(g, 3).empty());

  g.edges = {{3, 1, EdgeKind::Call}, {0, 1, EdgeKind::Call}};
  CHECK(neighbors_in(g, 1) == std::vector<InEdge>{{0, EdgeKind::Call}, {3, EdgeKind::Call}});

  g.edges = {{0, 1, EdgeKind::Call}, {0, 1, EdgeKind::ControlFlow}};
  CHECK(neighbors_in(g, 1) ==
        std::vector<InEdge>{{0, EdgeKind::ControlFlow}, {0, EdgeKind::Call}});

  CHECK_THROWS_AS(neighbors_in(g, 9), ValidationError);
}

TEST_CASE("dataset JSON round trip") {
  Dataset d = parse_dataset(kMinimal);
  d.graphs[0].timestamp = 1700000000;
  d.graphs[0].nodes[1].embedding = std::vector<double>{0.1, -2.5e-300, 3.0};
  d.graphs[0].nodes[0].embedding = std::vector<double>{1.0 / 3.0, 0.0, -0.0};
  const std::string text = dataset_to_json(d);
  Dataset back = parse_dataset(text);
  CHECK(back == d);
  CHECK(dataset_to_json(back) == text);
}

TEST_CASE("wire names round trip") {
  for (EdgeKind e : kAllEdgeKinds) CHECK(parse_edge_kind(to_string(e)) == e);
  CHECK(parse_node_kind("deleted") == NodeKind::Deleted);
  CHECK(parse_node_kind("added") == NodeKind::Added);
  CHECK_FALSE(parse_node_kind("removed").has_value());
}
