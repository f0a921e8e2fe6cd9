// One line per acceptance criterion. Exit status is 0 only when every
// criterion passes, or when exactly the criteria named by --expect-fail fail.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "cliquemr/highdeg.hpp"
#include "cliquemr/lowdeg.hpp"
#include "cliquemr/programs.hpp"
#include "cliquemr/rng.hpp"
#include "cliquemr/runner.hpp"
#include "cliquemr/simulation.hpp"

using namespace cliquemr;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

unsigned workers() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CLIQUEMR_THREADS")) hw = std::max(1, std::atoi(env));
  return hw;
}

void parallel(std::size_t count, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(workers(), count); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next++) < count;) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::size_t pow4(std::size_t b) { return b * b * b * b; }

// Shared runs for criteria 1, 2, 9.
struct Job {
  std::string alg;
  std::size_t n;
  double p;
  std::uint64_t seed;
  std::size_t beta = 0;
  std::size_t iterations = 0;
};

struct Done {
  Job job;
  std::size_t delta = 0;
  std::size_t beta = 0;
  std::size_t colors = 0;
  bool proper = false;
  std::string error;
  HighDegStats high;
  LowDegStats low;
  Graph g;
};

Done run_job(const Job& j) {
  Done d{j};
  try {
    d.g = generate_graph(j.n, j.p, j.seed);
    d.delta = d.g.max_degree();
    d.beta = j.beta ? j.beta : default_beta(j.n);
    CCResult r;
    if (j.alg == "highdeg") {
      HighDegParams hp;
      hp.beta = j.beta;
      r = run_cc(HighDegProgram(hp), d.g, j.seed);
      d.high = highdeg_stats(r.final_memory);
    } else {
      LowDegParams lp;
      lp.iterations = j.iterations;
      r = run_cc(LowDegProgram(lp), d.g, j.seed, lowdeg_cc_config(j.n));
      d.low = lowdeg_stats(r.final_memory);
    }
    auto c = coloring_from_outputs(r.outputs);
    d.proper = is_total_proper(d.g, c);
    d.colors = c.distinct_colors();
    // colors are 1-based and palettes are contiguous, so the largest color bounds the count
    d.colors = std::max<std::size_t>(d.colors, c.max_color());
  } catch (const std::exception& e) {
    d.error = e.what();
  }
  return d;
}

std::vector<Done> run_all(const std::vector<Job>& jobs) {
  std::vector<Done> out(jobs.size());
  parallel(jobs.size(), [&](std::size_t i) { out[i] = run_job(jobs[i]); });
  return out;
}

std::vector<Job> main_jobs() {
  std::vector<Job> jobs;
  for (std::size_t n : {128, 256, 512})
    for (double p : {0.25, 0.5})
      for (std::uint64_t s = 1; s <= 30; ++s) jobs.push_back({"highdeg", n, p, s});
  // sparse enough that Delta stays far below beta^4
  for (std::uint64_t s = 1; s <= 60; ++s) jobs.push_back({"lowdeg", 128, 0.04, s});
  for (std::uint64_t s = 1; s <= 60; ++s) jobs.push_back({"lowdeg", 256, 0.02, s});
  return jobs;
}

Outcome c1(const std::vector<Done>& runs, double seconds) {
  std::size_t bad = 0, regime = 0;
  std::string first;
  for (const auto& d : runs) {
    if (!d.error.empty() || !d.proper) {
      ++bad;
      if (first.empty()) first = d.job.alg + " n=" + std::to_string(d.job.n) + " seed=" + std::to_string(d.job.seed) +
                                 (d.error.empty() ? " improper" : " " + d.error);
    }
    if (d.job.alg == "lowdeg" && d.delta > pow4(d.beta)) ++regime;
  }
  std::ostringstream s;
  s << runs.size() << " runs, " << bad << " improper or failed, " << regime << " lowdeg runs outside delta<=beta^4, "
    << static_cast<int>(seconds) << "s";
  if (!first.empty()) s << "; first: " << first;
  return {bad == 0 && regime == 0 && seconds < 300.0, s.str()};
}

Outcome c2(const std::vector<Done>& runs) {
  std::size_t bad = 0, checked_8 = 0;
  for (const auto& d : runs) {
    if (!d.error.empty()) continue;
    const std::size_t D = d.delta, b = d.beta;
    if (d.job.alg == "highdeg") {
      const std::size_t bound = (5 * b + 1) * ((D + b - 1) / b) + D + 1;
      if (d.colors > bound) ++bad;
      if (D >= pow4(b)) {
        ++checked_8;
        if (d.colors > 8 * D) ++bad;
      }
    } else if (d.colors > D + 1) {
      ++bad;
    }
  }
  std::ostringstream s;
  s << bad << " palette-bound violations; " << checked_8 << " runs in the delta>=beta^4 regime checked against 8*delta";
  return {bad == 0 && checked_8 > 0, s.str()};
}

Outcome c3_c4(const std::vector<Done>& runs, bool trials) {
  std::vector<std::size_t> t;
  std::size_t over = 0, restarts = 0, errors = 0;
  for (const auto& d : runs) {
    if (!d.error.empty()) {
      ++errors;
      continue;
    }
    t.push_back(d.high.trials);
    restarts += d.high.residual_restarts;
    const double cap = 100.0 * static_cast<double>(d.job.n) * static_cast<double>(pow4(d.beta)) /
                       static_cast<double>(std::max<std::size_t>(d.delta, 1));
    if (static_cast<double>(d.high.residual_edges) > cap) ++over;
  }
  std::sort(t.begin(), t.end());
  std::ostringstream s;
  if (trials) {
    double mean = 0;
    for (auto x : t) mean += static_cast<double>(x);
    mean /= std::max<std::size_t>(t.size(), 1);
    const std::size_t p95 = t.empty() ? 0 : t[std::min(t.size() - 1, (t.size() * 95 + 99) / 100 - 1)];
    s << runs.size() << " seeds, mean trials " << mean << ", p95 " << p95;
    return {errors == 0 && runs.size() >= 100 && mean <= 3.0 && p95 <= 6, s.str()};
  }
  const double ok = 1.0 - static_cast<double>(over) / static_cast<double>(std::max<std::size_t>(runs.size(), 1));
  s << over << " runs over the residual bound (" << ok * 100 << "% within), " << restarts << " restarts, " << errors
    << " crashes";
  return {errors == 0 && ok >= 0.99, s.str()};
}

Outcome c5(const std::vector<Done>& runs) {
  std::size_t considered = 0, over = 0;
  for (const auto& d : runs) {
    if (d.job.alg != "highdeg" || d.job.n < 256 || !d.error.empty()) continue;
    ++considered;
    if (d.high.max_group_neighbors > 5 * d.beta) ++over;
  }
  const double frac = static_cast<double>(over) / static_cast<double>(std::max<std::size_t>(considered, 1));
  std::ostringstream s;
  s << over << " of " << considered << " runs had a node with more than 5*beta neighbors in one group";
  return {considered > 0 && frac <= 0.05, s.str()};
}

Outcome c6() {
  std::atomic<std::size_t> bad{0}, runs{0};
  std::mutex mu;
  std::string first;
  const std::vector<std::size_t> ns{128, 256};
  parallel(3 * ns.size() * 20, [&](std::size_t idx) {
    const std::size_t prog = idx % 3, n = ns[(idx / 3) % 2];
    const std::uint64_t seed = 1 + idx / 6;
    IdleProgram idle;
    DegreeBroadcastProgram deg;
    HighDegProgram high;
    const CCProgram* p = prog == 0 ? static_cast<const CCProgram*>(&idle) : prog == 1 ? static_cast<const CCProgram*>(&deg) : &high;
    std::string why;
    try {
      auto g = generate_graph(n, 0.5, seed);
      CCConfig cc;
      cc.trace_memory = true;
      auto a = run_cc(*p, g, seed, cc);
      auto sc = sim_config_for(g, 0.0, std::nullopt, cc);
      sc.trace = true;
      auto b = simulate(*p, g, sc, seed);
      auto eq = compare_backends(a, b);
      if (!eq.match) why = eq.detail;
      if (b.mr_rounds_used != 4 + 3 * a.rounds_used) why = "mr rounds " + std::to_string(b.mr_rounds_used);
      for (const auto& m : b.metrics)
        if (m.peak_words > sc.mr.eta) why = "peak over eta";
    } catch (const std::exception& e) {
      why = e.what();
    }
    ++runs;
    if (!why.empty()) {
      ++bad;
      std::lock_guard l(mu);
      if (first.empty()) first = p->name() + " n=" + std::to_string(n) + " seed=" + std::to_string(seed) + ": " + why;
    }
  });
  std::ostringstream s;
  s << runs << " runs, " << bad << " mismatches" << (first.empty() ? "" : "; first: " + first);
  return {bad == 0, s.str()};
}

Outcome c7() {
  auto g = generate_graph(256, 0.5, 1);
  auto r = run_cc(HighDegProgram{}, g, 1);
  auto lw = check_lightweight(r.profile, kLightK * static_cast<double>(g.m()), kLightN * static_cast<double>(g.n()), {});
  std::ostringstream s;
  s << "K=" << kLightK << "*|E|, N=" << kLightN << "*n: " << (lw.pass ? "within" : lw.reason);
  return {lw.pass, s.str()};
}

// radius_factor 1 is the criterion as stated; 2 is the radius replay needs.
Outcome c8(std::size_t radius_factor) {
  std::atomic<std::size_t> mism{0}, checked{0};
  std::vector<std::atomic<std::size_t>> per_t(5);
  parallel(20 * 4, [&](std::size_t idx) {
    const std::uint64_t seed = 1 + idx / 4;
    const std::size_t T = 1 + idx % 4;
    auto g = generate_graph(128, 0.05, seed, 8);
    auto rs = draw_all_rs(g, seed, T);
    auto global = rand_col_global(g, rs, T);
    GatherResult balls;
    try {
      auto cfg = lowdeg_cc_config(g.n());
      // whole-graph balls at radius 8 outgrow the default relaxation
      if (radius_factor > 1) cfg.route_capacity_factor *= 4;
      balls = gather_balls(g, radius_factor * T, seed, T, cfg);
    } catch (const std::exception&) {
      checked += g.n();
      mism += g.n();
      per_t[T] += g.n();
      return;
    }
    for (NodeId u = 1; u <= g.n(); ++u) {
      auto r = replay_locally(balls.balls[u - 1], T, g.max_degree());
      ++checked;
      const bool same = r.color == global.color[u - 1] && (r.color != 0 || r.palette == global.palette[u - 1]);
      if (!same) {
        ++mism;
        ++per_t[T];
      }
    }
  });
  std::ostringstream s;
  s << "radius " << (radius_factor == 1 ? "T" : "2T, routing capacity 16n^2") << ": " << mism << " of " << checked
    << " node replays differ (by T=1..4: " << per_t[1] << "," << per_t[2] << "," << per_t[3] << "," << per_t[4] << ")";
  return {mism == 0, s.str()};
}

Outcome c9(const std::vector<Done>& runs) {
  std::size_t lowruns = 0, nonempty = 0, bad = 0;
  for (const auto& d : runs) {
    if (d.job.alg != "lowdeg" || !d.error.empty()) continue;
    ++lowruns;
    const auto& st = d.low;
    auto comps = oracle_components(d.g, st.uncolored_nodes);
    if (!comps.empty()) ++nonempty;
    for (const auto& c : comps)
      for (NodeId v : c)
        if (st.cluster[v - 1] != st.cluster[c.front() - 1]) ++bad;
    const auto& h = st.min_size_history;
    for (std::size_t k = 0; k + 1 < h.size(); ++k)
      if (h[k + 1] < std::min(d.job.n, h[k] * h[k])) ++bad;
  }
  std::ostringstream s;
  s << lowruns << " lowdeg runs (" << nonempty << " with uncolored nodes), " << bad << " violations";
  return {bad == 0 && nonempty > 0, s.str()};
}

Outcome c10() {
  std::size_t bad_groups = 0, bad_part = 0, bad_balls = 0;
  SplitMix64 rng(2024);
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 5 + rng.uniform(40), groups = 1 + rng.uniform(6);
    auto g = generate_graph(n, rng.unit(), rng.next());
    std::vector<std::size_t> grp(n);
    for (auto& x : grp) x = 1 + rng.uniform(groups);
    std::vector<GroupDegreeReport> reports;
    for (NodeId u = 1; u <= n; ++u) {
      std::size_t d = 0;
      for (NodeId v : g.neighbors(u)) d += grp[v - 1] == grp[u - 1];
      reports.push_back({u, grp[u - 1], d});
    }
    auto rep = classify_groups(reports, groups, n);
    for (std::size_t q = 1; q <= groups; ++q) {
      std::vector<NodeId> members;
      for (NodeId u = 1; u <= n; ++u)
        if (grp[u - 1] == q) members.push_back(u);
      std::size_t e = 0;
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) e += g.has_edge(members[a], members[b]);
      if (rep.edge_count[q - 1] != e || rep.node_count[q - 1] != members.size() || bool(rep.good[q - 1]) != (e <= n))
        ++bad_groups;
    }
  }
  for (int k = 0; k < 1000; ++k) {
    const std::size_t len = 1 + rng.uniform(60), eta = 4 + rng.uniform(40);
    std::vector<std::size_t> loads(len);
    for (auto& l : loads) l = 1 + rng.uniform(eta);
    auto f = compute_partition(loads, eta);
    std::size_t part = 0, sum = 0;
    for (std::size_t i = 0; i < len; ++i) {
      if (i == 0 || sum + loads[i] > eta) ++part, sum = 0;
      sum += loads[i];
      if (f.part[i] != part) {
        ++bad_part;
        break;
      }
    }
  }
  std::atomic<std::size_t> ball_bad{0};
  parallel(1000, [&](std::size_t k) {
    SplitMix64 r(9000 + k);
    const std::size_t n = 8 + r.uniform(40), radius = r.uniform(4), T = 1 + r.uniform(3);
    auto g = generate_graph(n, 0.02 + 0.2 * r.unit(), r.next(), 6);
    auto got = gather_balls(g, radius, k, T, lowdeg_cc_config(n));
    for (NodeId u = 1; u <= n; ++u) {
      auto dist = bfs_distances(g, u);
      std::vector<NodeId> want;
      for (NodeId v = 1; v <= n; ++v)
        if (dist[v - 1] <= radius) want.push_back(v);
      const auto& ball = got.balls[u - 1];
      bool ok = ball.ids() == want;
      for (const auto& m : ball.members) {
        auto nb = g.neighbors(m.id);
        ok = ok && std::equal(nb.begin(), nb.end(), m.adj.begin(), m.adj.end()) &&
             m.rs == draw_rs(k, m.id, T, g.max_degree());
      }
      if (!ok) {
        ++ball_bad;
        break;
      }
    }
  });
  bad_balls = ball_bad;
  std::ostringstream s;
  s << "1000 instances each; mismatches: classify_groups " << bad_groups << ", compute_partition " << bad_part
    << ", gather_balls " << bad_balls;
  return {bad_groups + bad_part + bad_balls == 0, s.str()};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expect_fail;
  for (int i = 1; i < argc; ++i)
    if (!std::strcmp(argv[i], "--expect-fail") && i + 1 < argc) expect_fail.insert(std::atoi(argv[++i]));

  std::set<int> failed;
  auto report = [&](int id, const std::string& label, const Outcome& o) {
    std::printf("criterion %2d %-5s %s: %s\n", id, o.pass ? "PASS" : "FAIL", label.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) failed.insert(id);
  };

  auto t0 = std::chrono::steady_clock::now();
  auto runs = run_all(main_jobs());
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(1, "properness", c1(runs, secs));

  std::vector<Job> low_beta;
  for (std::size_t b : {2, 3})
    for (std::uint64_t s = 1; s <= 10; ++s) low_beta.push_back({"highdeg", 256, 0.5, s, b});
  auto extra = run_all(low_beta);
  std::vector<Done> c2_runs = runs;
  c2_runs.insert(c2_runs.end(), extra.begin(), extra.end());
  report(2, "palette bound", c2(c2_runs));

  std::vector<Job> sweep;
  for (std::uint64_t s = 1; s <= 100; ++s) sweep.push_back({"highdeg", 512, 0.5, 1000 + s});
  auto sweep_runs = run_all(sweep);
  report(3, "expected trials", c3_c4(sweep_runs, true));
  report(4, "residual bound", c3_c4(sweep_runs, false));
  report(5, "in-group degree", c5(runs));
  report(6, "simulation exact", c6());
  report(7, "lightweight", c7());
  report(8, "replay radius T", c8(1));
  std::printf("  (supplementary) replay at %s\n", c8(2).detail.c_str());

  // also exercise the merge path: one iteration leaves nodes uncolored
  std::vector<Job> merge_jobs;
  for (std::uint64_t s = 1; s <= 20; ++s) merge_jobs.push_back({"lowdeg", 128, 0.05, s, 0, 1});
  auto merge_runs = run_all(merge_jobs);
  std::vector<Done> c9_runs;
  for (auto& d : runs)
    if (d.job.alg == "lowdeg") c9_runs.push_back(d);
  c9_runs.insert(c9_runs.end(), merge_runs.begin(), merge_runs.end());
  report(9, "containment", c9(c9_runs));
  report(10, "oracle equivalence", c10());

  std::printf("%zu of 10 criteria failed", failed.size());
  if (!expect_fail.empty()) {
    std::printf("; expected to fail:");
    for (int id : expect_fail) std::printf(" %d", id);
  }
  std::printf("\n");
  return failed == expect_fail ? 0 : 1;
}
