#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rcd {

enum class NodeKind : std::uint8_t { Deleted = 0, Added = 1 };
inline constexpr std::size_t kNodeKinds = 2;

enum class EdgeKind : std::uint8_t {
  ControlFlow = 0,
  DataDependency = 1,
  Call = 2,
  ClassMemberRef = 3,
  LineMapping = 4,
};
inline constexpr std::size_t kEdgeKinds = 5;

inline constexpr std::array<EdgeKind, kEdgeKinds> kAllEdgeKinds = {
    EdgeKind::ControlFlow, EdgeKind::DataDependency, EdgeKind::Call,
    EdgeKind::ClassMemberRef, EdgeKind::LineMapping};

constexpr std::size_t ordinal(NodeKind k) { return static_cast<std::size_t>(k); }
constexpr std::size_t ordinal(EdgeKind k) { return static_cast<std::size_t>(k); }

// Wire names used by the dataset JSON ("deleted", "control_flow", ...).
std::string_view to_string(NodeKind k);
std::string_view to_string(EdgeKind k);
std::optional<NodeKind> parse_node_kind(std::string_view s);
std::optional<EdgeKind> parse_edge_kind(std::string_view s);

struct LineNode {
  std::size_t id = 0;
  NodeKind kind = NodeKind::Deleted;
  std::optional<std::string> text;
  bool is_root_cause = false;
  // Precomputed initial vector; when present it takes precedence over text.
  std::optional<std::vector<double>> embedding;

  bool operator==(const LineNode&) const = default;
};

struct DepEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeKind kind = EdgeKind::ControlFlow;

  bool operator==(const DepEdge&) const = default;
};

struct CommitGraph {
  std::string commit_id;
  std::vector<LineNode> nodes;
  std::vector<DepEdge> edges;
  std::optional<std::int64_t> timestamp;

  std::size_t num_deleted() const;
  std::size_t num_root_causes() const;
  bool operator==(const CommitGraph&) const = default;
};

struct Dataset {
  std::string name;
  std::vector<CommitGraph> graphs;

  bool operator==(const Dataset&) const = default;
};

struct ValidationOptions {
  // Training data needs at least one root-cause line per graph; inference does not.
  bool require_root_cause = true;
  // Inference loading may keep graphs without deleted lines so callers can skip them.
  bool require_deleted = true;
};

// Empty vector means the graph is valid.
std::vector<std::string> validate_graph(const CommitGraph& g,
                                        const ValidationOptions& opts = {});

struct InEdge {
  std::size_t src;
  EdgeKind kind;
  bool operator==(const InEdge&) const = default;
};

// Incoming edges of `target`, sorted by (source id, edge kind ordinal).
std::vector<InEdge> neighbors_in(const CommitGraph& g, std::size_t target);

Dataset load_dataset(const std::filesystem::path& path,
                     const ValidationOptions& opts = {});
Dataset parse_dataset(std::string_view json_text,
                      const ValidationOptions& opts = {});
std::string dataset_to_json(const Dataset& d);
void save_dataset(const Dataset& d, const std::filesystem::path& path);

}  // namespace rcd
