#include "rcd/commit_graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "rcd/error.hpp"

namespace rcd {

using json = nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNodeKinds> kNodeKindNames = {"deleted", "added"};
constexpr std::array<std::string_view, kEdgeKinds> kEdgeKindNames = {
    "control_flow", "data_dependency", "call", "class_member_ref", "line_mapping"};

[[noreturn]] void schema_fail(const std::string& commit, const std::string& field,
                              const std::string& reason) {
  std::ostringstream os;
  os << "schema violation";
  if (!commit.empty()) os << " in commit '" << commit << "'";
  os << ": field '" << field << "': " << reason;
  throw SchemaError(os.str());
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& commit, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema_fail(commit, where + key, "unknown field");
    }
  }
}

const json& require(const json& obj, const char* key, const std::string& commit,
                    const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_fail(commit, where + key, "missing");
  return *it;
}

std::size_t as_index(const json& v, const std::string& commit, const std::string& field) {
  if (!v.is_number_integer()) schema_fail(commit, field, "expected integer");
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  auto x = v.get<std::int64_t>();
  if (x < 0) schema_fail(commit, field, "expected non-negative integer");
  return static_cast<std::size_t>(x);
}

LineNode parse_node(const json& j, const std::string& commit, std::size_t idx) {
  const std::string where = "nodes[" + std::to_string(idx) + "].";
  if (!j.is_object()) schema_fail(commit, where, "expected object");
  reject_unknown(j, {"id", "kind", "text", "is_root_cause", "embedding"}, commit, where);

  LineNode n;
  n.id = as_index(require(j, "id", commit, where), commit, where + "id");

  const auto& kind = require(j, "kind", commit, where);
  if (!kind.is_string()) schema_fail(commit, where + "kind", "expected string");
  auto nk = parse_node_kind(kind.get<std::string>());
  if (!nk) schema_fail(commit, where + "kind", "unknown node kind '" + kind.get<std::string>() + "'");
  n.kind = *nk;

  if (auto it = j.find("text"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) schema_fail(commit, where + "text", "expected string or null");
    n.text = it->get<std::string>();
  }

  const auto& root = require(j, "is_root_cause", commit, where);
  if (!root.is_boolean()) schema_fail(commit, where + "is_root_cause", "expected boolean");
  n.is_root_cause = root.get<bool>();

  if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) schema_fail(commit, where + "embedding", "expected array or null");
    std::vector<double> v;
    v.reserve(it->size());
    for (const auto& x : *it) {
      if (!x.is_number()) schema_fail(commit, where + "embedding", "expected numbers");
      v.push_back(x.get<double>());
    }
    n.embedding = std::move(v);
  }
  return n;
}

DepEdge parse_edge(const json& j, const std::string& commit, std::size_t idx) {
  const std::string where = "edges[" + std::to_string(idx) + "].";
  if (!j.is_object()) schema_fail(commit, where, "expected object");
  reject_unknown(j, {"src", "dst", "kind"}, commit, where);
  DepEdge e;
  e.src = as_index(require(j, "src", commit, where), commit, where + "src");
  e.dst = as_index(require(j, "dst", commit, where), commit, where + "dst");
  const auto& kind = require(j, "kind", commit, where);
  if (!kind.is_string()) schema_fail(commit, where + "kind", "expected string");
  auto ek = parse_edge_kind(kind.get<std::string>());
  if (!ek) schema_fail(commit, where + "kind", "unknown edge kind '" + kind.get<std::string>() + "'");
  e.kind = *ek;
  return e;
}

CommitGraph parse_graph(const json& j, std::size_t idx) {
  if (!j.is_object()) schema_fail("", "graphs[" + std::to_string(idx) + "]", "expected object");
  CommitGraph g;
  const auto& cid = require(j, "commit_id", "", "graphs[" + std::to_string(idx) + "].");
  if (!cid.is_string()) schema_fail("", "commit_id", "expected string");
  g.commit_id = cid.get<std::string>();
  reject_unknown(j, {"commit_id", "timestamp", "nodes", "edges"}, g.commit_id, "");

  if (auto it = j.find("timestamp"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) schema_fail(g.commit_id, "timestamp", "expected integer or null");
    g.timestamp = it->get<std::int64_t>();
  }
  const auto& nodes = require(j, "nodes", g.commit_id, "");
  if (!nodes.is_array()) schema_fail(g.commit_id, "nodes", "expected array");
  for (std::size_t i = 0; i < nodes.size(); ++i) g.nodes.push_back(parse_node(nodes[i], g.commit_id, i));

  const auto& edges = require(j, "edges", g.commit_id, "");
  if (!edges.is_array()) schema_fail(g.commit_id, "edges", "expected array");
  for (std::size_t i = 0; i < edges.size(); ++i) g.edges.push_back(parse_edge(edges[i], g.commit_id, i));
  return g;
}

json node_to_json(const LineNode& n) {
  json j;
  j["id"] = n.id;
  j["kind"] = to_string(n.kind);
  j["text"] = n.text ? json(*n.text) : json(nullptr);
  j["is_root_cause"] = n.is_root_cause;
  j["embedding"] = n.embedding ? json(*n.embedding) : json(nullptr);
  return j;
}

}  // namespace

std::string_view to_string(NodeKind k) { return kNodeKindNames[ordinal(k)]; }
std::string_view to_string(EdgeKind k) { return kEdgeKindNames[ordinal(k)]; }

std::optional<NodeKind> parse_node_kind(std::string_view s) {
  for (std::size_t i = 0; i < kNodeKinds; ++i)
    if (kNodeKindNames[i] == s) return static_cast<NodeKind>(i);
  return std::nullopt;
}

std::optional<EdgeKind> parse_edge_kind(std::string_view s) {
  for (std::size_t i = 0; i < kEdgeKinds; ++i)
    if (kEdgeKindNames[i] == s) return static_cast<EdgeKind>(i);
  return std::nullopt;
}

std::size_t CommitGraph::num_deleted() const {
  return static_cast<std::size_t>(std::count_if(
      nodes.begin(), nodes.end(), [](const LineNode& n) { return n.kind == NodeKind::Deleted; }));
}

std::size_t CommitGraph::num_root_causes() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const LineNode& n) { return n.is_root_cause; }));
}

std::vector<std::string> validate_graph(const CommitGraph& g, const ValidationOptions& opts) {
  std::vector<std::string> out;
  const std::size_t n = g.nodes.size();

  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = g.nodes[i];
    if (node.id != i) {
      out.push_back("node at position " + std::to_string(i) + " has id " +
                    std::to_string(node.id) + " (ids must be dense 0..n-1)");
    }
    if (node.is_root_cause && node.kind != NodeKind::Deleted) {
      out.push_back("node " + std::to_string(node.id) + " is an added line marked as root cause");
    }
    if (!node.text && !node.embedding) {
      out.push_back("node " + std::to_string(node.id) + " has neither text nor embedding");
    }
    if (node.embedding) {
      for (double x : *node.embedding) {
        if (!std::isfinite(x)) {
          out.push_back("node " + std::to_string(node.id) + " has a non-finite embedding value");
          break;
        }
      }
    }
  }

  if (opts.require_deleted && g.num_deleted() == 0) out.push_back("no deleted lines");
  if (opts.require_root_cause && g.num_root_causes() == 0) out.push_back("no root-cause line");

  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
  for (const auto& e : g.edges) {
    if (e.src >= n) out.push_back("edge references missing node " + std::to_string(e.src));
    if (e.dst >= n) out.push_back("edge references missing node " + std::to_string(e.dst));
    if (e.src == e.dst) out.push_back("self-referencing edge on node " + std::to_string(e.src));
    if (!seen.emplace(e.src, e.dst, ordinal(e.kind)).second) {
      out.push_back("duplicate edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                    " (" + std::string(to_string(e.kind)) + ")");
    }
    if (e.kind == EdgeKind::LineMapping && e.src < n && e.dst < n &&
        (g.nodes[e.src].kind != NodeKind::Deleted || g.nodes[e.dst].kind != NodeKind::Added)) {
      out.push_back("line_mapping edge " + std::to_string(e.src) + "->" + std::to_string(e.dst) +
                    " must run from a deleted to an added line");
    }
  }
  return out;
}

std::vector<InEdge> neighbors_in(const CommitGraph& g, std::size_t target) {
  if (target >= g.nodes.size()) {
    throw ValidationError("unknown node id " + std::to_string(target) + " in commit '" +
                          g.commit_id + "'");
  }
  std::vector<InEdge> in;
  for (const auto& e : g.edges)
    if (e.dst == target) in.push_back({e.src, e.kind});
  std::sort(in.begin(), in.end(), [](const InEdge& a, const InEdge& b) {
    return std::pair(a.src, ordinal(a.kind)) < std::pair(b.src, ordinal(b.kind));
  });
  return in;
}

Dataset parse_dataset(std::string_view json_text, const ValidationOptions& opts) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("malformed JSON: ") + e.what());
  }
  if (!root.is_object()) schema_fail("", "<root>", "expected object");
  reject_unknown(root, {"name", "graphs"}, "", "");

  Dataset d;
  const auto& name = require(root, "name", "", "");
  if (!name.is_string()) schema_fail("", "name", "expected string");
  d.name = name.get<std::string>();
  const auto& graphs = require(root, "graphs", "", "");
  if (!graphs.is_array()) schema_fail("", "graphs", "expected array");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    CommitGraph g = parse_graph(graphs[i], i);
    if (!ids.insert(g.commit_id).second) {
      throw ValidationError("duplicate commit_id '" + g.commit_id + "'");
    }
    auto violations = validate_graph(g, opts);
    if (!violations.empty()) {
      std::string msg = "invariant violation in commit '" + g.commit_id + "': " + violations.front();
      for (std::size_t k = 1; k < violations.size(); ++k) msg += "; " + violations[k];
      throw ValidationError(msg);
    }
    d.graphs.push_back(std::move(g));
  }
  return d;
}

Dataset load_dataset(const std::filesystem::path& path, const ValidationOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading dataset '" + path.string() + "'");
  return parse_dataset(buf.str(), opts);
}

std::string dataset_to_json(const Dataset& d) {
  json root;
  root["name"] = d.name;
  root["graphs"] = json::array();
  for (const auto& g : d.graphs) {
    json jg;
    jg["commit_id"] = g.commit_id;
    jg["timestamp"] = g.timestamp ? json(*g.timestamp) : json(nullptr);
    jg["nodes"] = json::array();
    for (const auto& n : g.nodes) jg["nodes"].push_back(node_to_json(n));
    jg["edges"] = json::array();
    for (const auto& e : g.edges) {
      jg["edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"kind", to_string(e.kind)}});
    }
    root["graphs"].push_back(std::move(jg));
  }
  return root.dump(1) + "\n";
}

void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + path.string() + "'");
  out << dataset_to_json(d);
  if (!out) throw IoError("failed writing dataset '" + path.string() + "'");
}

}  // namespace rcd
