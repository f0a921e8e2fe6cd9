#include <numeric>

#include "cliquemr/graph.hpp"
#include "cliquemr/rng.hpp"
#include "doctest.h"

using namespace cliquemr;

namespace {

// Union-find pass, kept separate from the BFS in oracle_components.
std::vector<std::vector<NodeId>> uf_components(const Graph& g, const std::vector<NodeId>& subset) {
  std::vector<NodeId> parent(g.n() + 1);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  std::vector<char> in(g.n() + 1, 0);
  for (NodeId u : subset) in[u] = 1;
  for (auto [u, v] : g.edges())
    if (in[u] && in[v]) {
      NodeId a = find(u), b = find(v);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::map<NodeId, std::vector<NodeId>> groups;
  for (NodeId u = 1; u <= g.n(); ++u)
    if (in[u]) groups[find(u)].push_back(u);
  std::vector<std::vector<NodeId>> out;
  for (auto& [r, m] : groups) out.push_back(m);
  return out;
}

}  // namespace

TEST_SUITE("graph") {
  TEST_CASE("generator extremes") {
    auto empty = generate_graph(4, 0.0, 7);
    CHECK(empty.n() == 4);
    CHECK(empty.m() == 0);
    auto tri = generate_graph(3, 1.0, 1);
    CHECK(tri.m() == 3);
    CHECK(tri.has_edge(1, 2));
    CHECK(tri.has_edge(1, 3));
    CHECK(tri.has_edge(2, 3));
  }

  TEST_CASE("generator regression value") {
    auto g = generate_graph(256, 0.25, 42);
    // pinned; mean 8160, sd ~78
    CHECK(g.m() == 8028);
    CHECK(std::abs(static_cast<double>(g.m()) - 8160.0) <= 4 * 78.2);
  }

  TEST_CASE("generator invariants over seeds") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      auto g = generate_graph(50, 0.2, seed);
      std::size_t deg_sum = 0, dmax = 0;
      for (NodeId u = 1; u <= g.n(); ++u) {
        auto nb = g.neighbors(u);
        CHECK(std::is_sorted(nb.begin(), nb.end()));
        CHECK(std::adjacent_find(nb.begin(), nb.end()) == nb.end());
        for (NodeId v : nb) {
          CHECK(v != u);
          CHECK(v >= 1);
          CHECK(v <= g.n());
          CHECK(g.has_edge(v, u));
        }
        deg_sum += nb.size();
        dmax = std::max(dmax, nb.size());
      }
      CHECK(deg_sum == 2 * g.m());
      CHECK(dmax == g.max_degree());
    }
    CHECK(generate_graph(80, 0.3, 5) == generate_graph(80, 0.3, 5));
    CHECK_FALSE(generate_graph(80, 0.3, 5) == generate_graph(80, 0.3, 6));
  }

  TEST_CASE("degree cap") {
    auto g = generate_graph(200, 0.1, 3, 6);
    CHECK(g.max_degree() <= 6);
  }

  TEST_CASE("edge list parsing") {
    auto p = read_edge_list("3 2\n1 2\n2 3\n");
    CHECK(p.n() == 3);
    CHECK(p.m() == 2);
    CHECK(p.has_edge(1, 2));
    CHECK(p.has_edge(2, 3));
    CHECK_FALSE(p.has_edge(1, 3));
    CHECK_THROWS_AS(read_edge_list("2 1\n1 1\n"), ParseError);
    CHECK_THROWS_AS(read_edge_list("3 2\n1 2\n1 2\n"), ParseError);
    CHECK_THROWS_AS(read_edge_list("3 1\n1 4\n"), ParseError);
    CHECK_THROWS_AS(read_edge_list("3 2\n1 2\n"), ParseError);
    CHECK_THROWS_AS(read_edge_list("x\n"), ParseError);
    try {
      read_edge_list("4 2\n1 2\n3 3\n");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }

  TEST_CASE("edge list round trip") {
    CHECK(write_edge_list(read_edge_list("3 2\n3 2\n2 1\n")) == "3 2\n1 2\n2 3\n");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto g = generate_graph(40, 0.15, seed);
      auto text = write_edge_list(g);
      CHECK(read_edge_list(text) == g);
      CHECK(write_edge_list(read_edge_list(text)) == text);
    }
  }

  TEST_CASE("components") {
    Graph path(3, {{1, 2}, {2, 3}});
    CHECK(oracle_components(path, {1, 3}) == std::vector<std::vector<NodeId>>{{1}, {3}});
    Graph k3(3, {{1, 2}, {1, 3}, {2, 3}});
    CHECK(oracle_components(k3, {1, 2, 3}) == std::vector<std::vector<NodeId>>{{1, 2, 3}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto g = generate_graph(64, 0.05, seed);
      std::vector<NodeId> subset;
      SplitMix64 rng(seed);
      for (NodeId u = 1; u <= 64; ++u)
        if (rng.unit() < 0.7) subset.push_back(u);
      auto comps = oracle_components(g, subset);
      CHECK(comps == uf_components(g, subset));
      std::size_t total = 0;
      for (auto& c : comps) total += c.size();
      CHECK(total == subset.size());
    }
  }

  TEST_CASE("properness checks") {
    Graph path(3, {{1, 2}, {2, 3}});
    Coloring c;
    c.assignment = {{1, 1}, {2, 2}};
    CHECK(is_proper(path, c));
    CHECK_FALSE(is_total_proper(path, c));
    c.assignment[3] = 1;
    CHECK(is_total_proper(path, c));
    CHECK(c.distinct_colors() == 2);
    CHECK(c.palette_count() >= c.max_color());
    c.assignment[3] = 2;
    CHECK_FALSE(is_proper(path, c));
  }

  TEST_CASE("bfs distances") {
    Graph path(4, {{1, 2}, {2, 3}});
    auto d = bfs_distances(path, 1);
    CHECK(d[0] == 0);
    CHECK(d[2] == 2);
    CHECK(d[3] == SIZE_MAX);
  }

  TEST_CASE("bad construction") {
    CHECK_THROWS_AS(Graph(3, {{1, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph(3, {{1, 2}, {2, 1}}), std::invalid_argument);
    CHECK_THROWS_AS(Graph(3, {{1, 4}}), std::invalid_argument);
  }
}
