#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cliquemr/types.hpp"

namespace cliquemr {

/// Immutable undirected simple graph on nodes 1..n.
class Graph {
 public:
  Graph() = default;
  /// Builds from an edge list. Throws std::invalid_argument on self-loops,
  /// duplicates or out-of-range endpoints.
  Graph(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges);

  std::size_t n() const { return adjacency_.size(); }
  std::size_t m() const { return m_; }
  std::size_t max_degree() const { return max_degree_; }
  std::size_t degree(NodeId u) const { return adjacency_[u - 1].size(); }
  /// Sorted ascending.
  std::span<const NodeId> neighbors(NodeId u) const { return adjacency_[u - 1]; }
  bool has_edge(NodeId u, NodeId v) const;
  /// All edges as (u, v) with u < v, lexicographically sorted.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  /// Subgraph induced by `nodes`, relabelled 1..k in ascending ID order.
  /// The returned vector maps new label - 1 to original ID.
  std::pair<Graph, std::vector<NodeId>> induced(std::vector<NodeId> nodes) const;

  bool operator==(const Graph& other) const { return adjacency_ == other.adjacency_; }

 private:
  std::vector<std::vector<NodeId>> adjacency_;
  std::size_t m_ = 0;
  std::size_t max_degree_ = 0;
};

/// Partial node -> color map. Color 0 is never assigned.
struct Coloring {
  std::map<NodeId, Color> assignment;

  std::size_t palette_count() const;
  Color max_color() const;
  std::size_t distinct_colors() const;
};

Graph generate_graph(std::size_t n, double edge_prob, std::uint64_t seed,
                     std::optional<std::size_t> max_degree = std::nullopt);

Graph read_edge_list(const std::string& text);
std::string write_edge_list(const Graph& g);

/// Connected components of G[subset], each sorted, ordered by smallest member.
std::vector<std::vector<NodeId>> oracle_components(const Graph& g, const std::vector<NodeId>& subset);

/// True iff no edge has both endpoints assigned the same color.
bool is_proper(const Graph& g, const Coloring& c);
/// True iff proper and every node is assigned.
bool is_total_proper(const Graph& g, const Coloring& c);

/// BFS distances from `source`; unreachable nodes get SIZE_MAX. Index by id-1.
std::vector<std::size_t> bfs_distances(const Graph& g, NodeId source);

std::string write_coloring(const Coloring& c);

}  // namespace cliquemr
