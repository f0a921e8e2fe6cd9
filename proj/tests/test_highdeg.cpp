#include <cmath>

#include "cliquemr/highdeg.hpp"
#include "cliquemr/rng.hpp"
#include "doctest.h"

using namespace cliquemr;

namespace {

std::size_t palette_bound(std::size_t beta, std::size_t delta) {
  const std::size_t groups = (delta + beta - 1) / beta;
  return (5 * beta + 1) * groups + delta + 1;
}

Coloring run(const Graph& g, std::uint64_t seed, HighDegParams p = {}) {
  auto r = run_cc(HighDegProgram(p), g, seed);
  return coloring_from_outputs(r.outputs);
}

}  // namespace

TEST_SUITE("highdeg") {
  TEST_CASE("default beta") {
    CHECK(default_beta(2) == 1);
    CHECK(default_beta(256) == 8);
    CHECK(default_beta(257) == 9);
    CHECK(default_beta(512) == 9);
  }

  TEST_CASE("trial predicate") {
    CHECK(trial_succeeded(0, 1));
    CHECK(trial_succeeded(0, 9));
    CHECK(trial_succeeded(18, 9));
    CHECK_FALSE(trial_succeeded(19, 9));
  }

  TEST_CASE("classify_groups examples") {
    std::vector<GroupDegreeReport> one_edge{{1, 1, 1}, {2, 1, 1}, {3, 2, 0}};
    auto rep = classify_groups(one_edge, 2, 3);
    CHECK(rep.edge_count[0] == 1);
    CHECK(rep.node_count[0] == 2);
    CHECK(rep.good[0]);
    CHECK(rep.bad_count() == 0);

    // degree sum 2(n+1) in one group: n+1 edges, not good
    const std::size_t n = 4;
    std::vector<GroupDegreeReport> heavy{{1, 1, 3}, {2, 1, 3}, {3, 1, 2}, {4, 1, 2}};
    auto h = classify_groups(heavy, 1, n);
    CHECK(h.edge_count[0] == n + 1);
    CHECK_FALSE(h.good[0]);
    CHECK(h.bad_count() == 1);

    std::vector<GroupDegreeReport> odd{{1, 1, 1}};
    CHECK_THROWS_AS(classify_groups(odd, 1, 2), EngineFault);
    std::vector<GroupDegreeReport> dup{{1, 1, 0}, {1, 1, 0}};
    CHECK_THROWS_AS(classify_groups(dup, 1, 2), EngineFault);
  }

  TEST_CASE("classify_groups against induced subgraphs") {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      auto g = generate_graph(128, 0.3, seed);
      const std::size_t groups = 1 + seed % 9;
      SplitMix64 rng(seed + 99);
      std::vector<std::size_t> grp(g.n() + 1);
      for (NodeId u = 1; u <= g.n(); ++u) grp[u] = 1 + rng.uniform(groups);
      std::vector<GroupDegreeReport> reports;
      for (NodeId u = 1; u <= g.n(); ++u) {
        std::size_t d = 0;
        for (NodeId v : g.neighbors(u)) d += grp[v] == grp[u];
        reports.push_back({u, grp[u], d});
      }
      auto rep = classify_groups(reports, groups, g.n());
      for (std::size_t k = 1; k <= groups; ++k) {
        std::vector<NodeId> members;
        for (NodeId u = 1; u <= g.n(); ++u)
          if (grp[u] == k) members.push_back(u);
        auto [sub, labels] = g.induced(members);
        CHECK(rep.node_count[k - 1] == members.size());
        CHECK(rep.edge_count[k - 1] == sub.m());
        CHECK(rep.max_degree[k - 1] == sub.max_degree());
        CHECK(static_cast<bool>(rep.good[k - 1]) == (sub.m() <= g.n()));
      }
    }
  }

  TEST_CASE("greedy coloring") {
    Graph path(3, {{1, 2}, {2, 3}});
    auto c = color_subgraph_greedy(path, std::vector<NodeId>{1, 2, 3}, 0);
    CHECK(c.assignment == std::map<NodeId, Color>{{1, 1}, {2, 2}, {3, 1}});
    Graph k4(4, {{1, 2}, {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
    auto d = color_subgraph_greedy(k4, std::vector<NodeId>{1, 2, 3, 4}, 10);
    CHECK(d.assignment == std::map<NodeId, Color>{{1, 11}, {2, 12}, {3, 13}, {4, 14}});
  }

  TEST_CASE("residual coloring") {
    Graph g(4, {{1, 2}, {3, 4}});
    auto none = residual_collect_and_color(g, {}, 5, 10);
    REQUIRE(none);
    CHECK(none->assignment.empty());
    auto edge = residual_collect_and_color(g, {1, 2}, 5, 10);
    REQUIRE(edge);
    CHECK(edge->assignment == std::map<NodeId, Color>{{1, 6}, {2, 7}});
    CHECK_FALSE(residual_collect_and_color(g, {1, 2, 3, 4}, 0, 1.0));
  }

  TEST_CASE("K5 with beta 1") {
    Graph k5(5, {{1, 2}, {1, 3}, {1, 4}, {1, 5}, {2, 3}, {2, 4}, {2, 5}, {3, 4}, {3, 5}, {4, 5}});
    HighDegParams p;
    p.beta = 1;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) CHECK(is_total_proper(k5, run(k5, seed, p)));
  }

  TEST_CASE("empty graph exits after one trial") {
    Graph g(16, {});
    auto r = run_cc(HighDegProgram{}, g, 1);
    CHECK(is_total_proper(g, coloring_from_outputs(r.outputs)));
    auto st = highdeg_stats(r.final_memory);
    CHECK(st.trials == 1);
    CHECK(st.bad_groups == 0);
  }

  TEST_CASE("G(256, 0.5), beta 8, seed 3") {
    auto g = generate_graph(256, 0.5, 3);
    HighDegParams p;
    p.beta = 8;
    auto c = run(g, 3, p);
    CHECK(is_total_proper(g, c));
    CHECK(c.distinct_colors() <= palette_bound(8, g.max_degree()));
    CHECK(c.max_color() <= palette_bound(8, g.max_degree()));
  }

  TEST_CASE("round count is affine in trials") {
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
      auto g = generate_graph(128, 0.3 + 0.05 * (seed % 4), seed);
      HighDegParams p;
      p.beta = 2 + seed % 3;  // small beta forces retries now and then
      auto r = run_cc(HighDegProgram(p), g, seed);
      auto st = highdeg_stats(r.final_memory);
      CHECK(r.rounds_used == 8 + 3 * st.trials);
      CHECK(is_total_proper(g, coloring_from_outputs(r.outputs)));
    }
  }

  TEST_CASE("good groups respect the edge threshold") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      auto g = generate_graph(128, 0.5, seed);
      auto r = run_cc(HighDegProgram{}, g, seed);
      auto st = highdeg_stats(r.final_memory);
      CHECK(trial_succeeded(st.bad_groups, st.beta));
      CHECK(st.residual_edges <= 100.0 * 128 * std::pow(st.beta, 4) / st.delta);
    }
  }

  TEST_CASE("Delta >= beta^4 with small beta uses at most 8 Delta colors") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto g = generate_graph(256, 0.5, seed);
      for (std::size_t beta : {2, 3}) {
        REQUIRE(g.max_degree() >= std::pow(beta, 4));
        HighDegParams p;
        p.beta = beta;
        auto c = run(g, seed, p);
        CHECK(is_total_proper(g, c));
        CHECK(c.distinct_colors() <= 8 * g.max_degree());
      }
    }
  }
}
