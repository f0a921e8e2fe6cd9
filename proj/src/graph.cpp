#include "cliquemr/graph.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cliquemr/rng.hpp"

namespace cliquemr {

Graph::Graph(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges) : adjacency_(n) {
  for (auto [u, v] : edges) {
    if (u == v) throw std::invalid_argument("self-loop at node " + std::to_string(u));
    if (u < 1 || v < 1 || u > n || v > n) throw std::invalid_argument("edge endpoint out of range");
    adjacency_[u - 1].push_back(v);
    adjacency_[v - 1].push_back(u);
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end());
    if (std::adjacent_find(adj.begin(), adj.end()) != adj.end())
      throw std::invalid_argument("duplicate edge");
    max_degree_ = std::max(max_degree_, adj.size());
  }
  m_ = edges.size();
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  if (u < 1 || u > n()) return false;
  auto adj = neighbors(u);
  return std::binary_search(adj.begin(), adj.end(), v);
}

std::vector<std::pair<NodeId, NodeId>> Graph::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(m_);
  for (NodeId u = 1; u <= n(); ++u)
    for (NodeId v : neighbors(u))
      if (u < v) out.emplace_back(u, v);
  return out;
}

std::pair<Graph, std::vector<NodeId>> Graph::induced(std::vector<NodeId> nodes) const {
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::vector<std::pair<NodeId, NodeId>> sub;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (NodeId v : neighbors(nodes[i])) {
      if (v <= nodes[i]) continue;
      auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
      if (it != nodes.end() && *it == v)
        sub.emplace_back(static_cast<NodeId>(i + 1), static_cast<NodeId>(it - nodes.begin() + 1));
    }
  }
  return {Graph(nodes.size(), sub), nodes};
}

std::size_t Coloring::palette_count() const { return max_color(); }

Color Coloring::max_color() const {
  Color best = 0;
  for (const auto& [node, color] : assignment) best = std::max(best, color);
  return best;
}

std::size_t Coloring::distinct_colors() const {
  std::set<Color> seen;
  for (const auto& [node, color] : assignment) seen.insert(color);
  return seen.size();
}

Graph generate_graph(std::size_t n, double edge_prob, std::uint64_t seed,
                     std::optional<std::size_t> max_degree) {
  if (n < 1) throw std::invalid_argument("generate_graph: n must be >= 1");
  if (!(edge_prob >= 0.0 && edge_prob <= 1.0))
    throw std::invalid_argument("generate_graph: edge_prob must lie in [0, 1]");
  SplitMix64 rng(derive_seed(seed, 0x67726170ULL));
  std::vector<std::size_t> deg(n, 0);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId u = 1; u <= n; ++u) {
    for (NodeId v = u + 1; v <= n; ++v) {
      if (!(rng.unit() < edge_prob)) continue;
      if (max_degree && (deg[u - 1] >= *max_degree || deg[v - 1] >= *max_degree)) continue;
      ++deg[u - 1];
      ++deg[v - 1];
      edges.emplace_back(u, v);
    }
  }
  return Graph(n, edges);
}

namespace {

bool parse_uint(std::string_view tok, std::uint64_t& out) {
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

}  // namespace

Graph read_edge_list(const std::string& text) {
  std::vector<std::string_view> lines;
  std::string_view rest(text);
  while (!rest.empty()) {
    auto nl = rest.find('\n');
    lines.push_back(rest.substr(0, nl));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  if (lines.empty()) throw ParseError(1, "missing header \"n m\"");

  auto header = split_ws(lines[0]);
  std::uint64_t n = 0, m = 0;
  if (header.size() != 2 || !parse_uint(header[0], n) || !parse_uint(header[1], m) || n < 1)
    throw ParseError(1, "malformed header, expected \"n m\"");

  std::set<std::pair<NodeId, NodeId>> seen;
  std::vector<std::pair<NodeId, NodeId>> edges;
  std::size_t line_no = 1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    line_no = i + 1;
    auto toks = split_ws(lines[i]);
    if (toks.empty()) continue;
    std::uint64_t u = 0, v = 0;
    if (toks.size() != 2 || !parse_uint(toks[0], u) || !parse_uint(toks[1], v))
      throw ParseError(line_no, "malformed edge line, expected \"u v\"");
    if (u < 1 || v < 1 || u > n || v > n) throw ParseError(line_no, "node ID out of range 1.." + std::to_string(n));
    if (u == v) throw ParseError(line_no, "self-loop");
    if (u > v) std::swap(u, v);
    if (!seen.emplace(u, v).second) throw ParseError(line_no, "duplicate edge");
    edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  }
  if (edges.size() != m)
    throw ParseError(line_no, "header declares " + std::to_string(m) + " edges, found " + std::to_string(edges.size()));
  return Graph(n, edges);
}

std::string write_edge_list(const Graph& g) {
  std::ostringstream out;
  out << g.n() << ' ' << g.m() << '\n';
  for (auto [u, v] : g.edges()) out << u << ' ' << v << '\n';
  return out.str();
}

std::vector<std::vector<NodeId>> oracle_components(const Graph& g, const std::vector<NodeId>& subset) {
  std::vector<char> in(g.n() + 1, 0), seen(g.n() + 1, 0);
  for (NodeId u : subset) in[u] = 1;
  std::vector<NodeId> order(subset);
  std::sort(order.begin(), order.end());
  std::vector<std::vector<NodeId>> comps;
  for (NodeId s : order) {
    if (seen[s]) continue;
    std::vector<NodeId> comp{s};
    seen[s] = 1;
    for (std::size_t i = 0; i < comp.size(); ++i) {
      for (NodeId v : g.neighbors(comp[i])) {
        if (in[v] && !seen[v]) {
          seen[v] = 1;
          comp.push_back(v);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

bool is_proper(const Graph& g, const Coloring& c) {
  for (auto [u, v] : g.edges()) {
    auto a = c.assignment.find(u), b = c.assignment.find(v);
    if (a != c.assignment.end() && b != c.assignment.end() && a->second == b->second) return false;
  }
  for (const auto& [node, color] : c.assignment)
    if (color == 0 || node < 1 || node > g.n()) return false;
  return true;
}

bool is_total_proper(const Graph& g, const Coloring& c) {
  return c.assignment.size() == g.n() && is_proper(g, c);
}

std::vector<std::size_t> bfs_distances(const Graph& g, NodeId source) {
  constexpr auto kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(g.n(), kInf);
  std::queue<NodeId> q;
  dist[source - 1] = 0;
  q.push(source);
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop();
    for (NodeId v : g.neighbors(u)) {
      if (dist[v - 1] == kInf) {
        dist[v - 1] = dist[u - 1] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

std::string write_coloring(const Coloring& c) {
  std::ostringstream out;
  for (const auto& [node, color] : c.assignment) out << node << ' ' << color << '\n';
  return out.str();
}

}  // namespace cliquemr
