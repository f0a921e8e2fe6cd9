#include "cliquemr/lowdeg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>
#include <set>

#include "cliquemr/highdeg.hpp"
#include "cliquemr/words.hpp"

namespace cliquemr {

std::size_t default_iterations(std::size_t n) {
  if (n < 4) return 1;
  double t = std::ceil(2.0 * std::log2(std::log2(static_cast<double>(n))) - 1e-9);
  return std::max<std::size_t>(1, static_cast<std::size_t>(t));
}

std::size_t default_component_cap(std::size_t n) {
  std::size_t b = default_beta(n);
  return b * b * b;
}

std::size_t rs_bits_per_iteration(std::size_t delta) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::bit_width(delta)));
}

std::size_t rs_word_count(std::size_t iterations, std::size_t delta) {
  return (iterations * rs_bits_per_iteration(delta) + 63) / 64;
}

std::vector<Word> draw_rs(std::uint64_t seed, NodeId u, std::size_t iterations, std::size_t delta) {
  // Round 2 is the first round in which a node knows delta.
  SplitMix64 rng = node_stream(seed, u, 2);
  std::vector<Word> rs(rs_word_count(iterations, delta));
  for (auto& w : rs) w = rng.next();
  return rs;
}

std::vector<std::vector<Word>> draw_all_rs(const Graph& g, std::uint64_t seed, std::size_t iterations) {
  std::vector<std::vector<Word>> out(g.n());
  for (NodeId u = 1; u <= g.n(); ++u) out[u - 1] = draw_rs(seed, u, iterations, g.max_degree());
  return out;
}

Word rs_draw(std::span<const Word> rs, std::size_t iteration, std::size_t bits) {
  const std::size_t lo = iteration * bits;
  if (lo + bits > rs.size() * 64) {
    throw EngineFault("random string too short: need " + std::to_string(lo + bits) + " bits, have " +
                      std::to_string(rs.size() * 64));
  }
  Word value = 0;
  for (std::size_t j = 0; j < bits; ++j) {
    std::size_t bit = lo + j;
    value |= ((rs[bit / 64] >> (bit % 64)) & 1ULL) << j;
  }
  return value;
}

PaletteState PaletteState::initial(std::size_t n, std::size_t delta) {
  PaletteState s;
  s.delta = delta;
  std::vector<Color> full(delta + 1);
  std::iota(full.begin(), full.end(), Color{1});
  s.palette.assign(n, full);
  s.color.assign(n, 0);
  return s;
}

std::vector<NodeId> PaletteState::uncolored() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < color.size(); ++i)
    if (color[i] == 0) out.push_back(static_cast<NodeId>(i + 1));
  return out;
}

namespace {

// One iteration over an abstract adjacency (indices 0..k-1).
void iterate_once(const std::vector<std::vector<std::size_t>>& adj, const std::vector<const std::vector<Word>*>& rs,
                  std::vector<std::vector<Color>>& palette, std::vector<Color>& color, std::size_t iteration,
                  std::size_t bits) {
  const std::size_t k = adj.size();
  std::vector<Color> trial(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (color[i] != 0 || palette[i].empty()) continue;
    Word draw = rs_draw(*rs[i], iteration, bits);
    trial[i] = palette[i][draw % palette[i].size()];
  }
  std::vector<char> keep(k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (trial[i] == 0) continue;
    keep[i] = 1;
    for (std::size_t j : adj[i])
      if (trial[j] == trial[i]) keep[i] = 0;
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!keep[i]) continue;
    color[i] = trial[i];
    for (std::size_t j : adj[i]) {
      auto& p = palette[j];
      auto it = std::lower_bound(p.begin(), p.end(), trial[i]);
      if (it != p.end() && *it == trial[i]) p.erase(it);
    }
  }
}

}  // namespace

PaletteState rand_col_step_global(const PaletteState& state, const Graph& g, const std::vector<std::vector<Word>>& rs,
                                  std::size_t iteration) {
  std::vector<std::vector<std::size_t>> adj(g.n());
  std::vector<const std::vector<Word>*> r(g.n());
  for (NodeId u = 1; u <= g.n(); ++u) {
    for (NodeId v : g.neighbors(u)) adj[u - 1].push_back(v - 1);
    r[u - 1] = &rs[u - 1];
  }
  PaletteState next = state;
  iterate_once(adj, r, next.palette, next.color, iteration, rs_bits_per_iteration(state.delta));
  return next;
}

PaletteState rand_col_global(const Graph& g, const std::vector<std::vector<Word>>& rs, std::size_t iterations) {
  PaletteState s = PaletteState::initial(g.n(), g.max_degree());
  for (std::size_t i = 0; i < iterations; ++i) s = rand_col_step_global(s, g, rs, i);
  return s;
}

std::vector<NodeId> LabeledBall::ids() const {
  std::vector<NodeId> out;
  for (const auto& m : members) out.push_back(m.id);
  return out;
}

const BallMember* LabeledBall::find(NodeId id) const {
  auto it = std::lower_bound(members.begin(), members.end(), id,
                             [](const BallMember& m, NodeId x) { return m.id < x; });
  return it != members.end() && it->id == id ? &*it : nullptr;
}

ReplayResult replay_locally(const LabeledBall& ball, std::size_t iterations, std::size_t delta) {
  const std::size_t k = ball.members.size();
  const BallMember* center = ball.find(ball.center);
  if (!center) throw EngineFault("ball does not contain its center");
  std::vector<std::vector<std::size_t>> adj(k);
  std::vector<const std::vector<Word>*> rs(k);
  for (std::size_t i = 0; i < k; ++i) {
    rs[i] = &ball.members[i].rs;
    for (NodeId v : ball.members[i].adj)
      if (const BallMember* m = ball.find(v)) adj[i].push_back(static_cast<std::size_t>(m - ball.members.data()));
  }
  std::vector<Color> full(delta + 1);
  std::iota(full.begin(), full.end(), Color{1});
  std::vector<std::vector<Color>> palette(k, full);
  std::vector<Color> color(k, 0);
  const std::size_t bits = rs_bits_per_iteration(delta);
  for (std::size_t it = 0; it < iterations; ++it) iterate_once(adj, rs, palette, color, it, bits);
  const std::size_t c = static_cast<std::size_t>(center - ball.members.data());
  return {color[c], palette[c]};
}

// ---------------------------------------------------------------- clustering

ClusterPartition initial_partition(std::size_t n) {
  ClusterPartition p;
  p.cluster.resize(n);
  std::iota(p.cluster.begin(), p.cluster.end(), NodeId{1});
  p.fragment = p.cluster;
  p.min_size_history.push_back(n ? 1 : 0);
  return p;
}

std::vector<std::vector<NodeId>> ClusterPartition::clusters() const {
  std::map<NodeId, std::vector<NodeId>> by;
  for (std::size_t i = 0; i < cluster.size(); ++i) by[cluster[i]].push_back(static_cast<NodeId>(i + 1));
  std::vector<std::vector<NodeId>> out;
  for (auto& [id, members] : by) out.push_back(std::move(members));
  return out;
}

std::vector<std::vector<NodeId>> ClusterPartition::components(const std::vector<char>& in_u) const {
  std::map<NodeId, std::vector<NodeId>> by;
  for (std::size_t i = 0; i < fragment.size(); ++i)
    if (in_u[i]) by[fragment[i]].push_back(static_cast<NodeId>(i + 1));
  std::vector<std::vector<NodeId>> out;
  for (auto& [id, members] : by) out.push_back(std::move(members));
  return out;
}

std::vector<MergeCandidate> weight1_candidates(const Graph& g, const std::vector<char>& in_u,
                                               const ClusterPartition& part) {
  std::map<std::pair<NodeId, NodeId>, std::pair<NodeId, NodeId>> best;
  for (NodeId u = 1; u <= g.n(); ++u) {
    if (!in_u[u - 1]) continue;
    for (NodeId v : g.neighbors(u)) {
      if (!in_u[v - 1] || part.fragment[u - 1] == part.fragment[v - 1]) continue;
      auto key = std::make_pair(part.cluster[u - 1], part.fragment[v - 1]);
      std::pair<NodeId, NodeId> e{std::min(u, v), std::max(u, v)};
      auto it = best.find(key);
      if (it == best.end() || e < it->second) best[key] = e;
    }
  }
  std::vector<MergeCandidate> out;
  for (auto& [k, e] : best) out.push_back({k.first, k.second, e.first, e.second});
  return out;
}

namespace {

struct UnionFind {
  std::vector<NodeId> parent;
  explicit UnionFind(std::size_t n) : parent(n + 1) { std::iota(parent.begin(), parent.end(), NodeId{0}); }
  NodeId find(NodeId x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(NodeId a, NodeId b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (b < a) std::swap(a, b);
    parent[b] = a;
    return true;
  }
};

std::vector<NodeId> relabel_by_min(UnionFind& uf, std::size_t n) {
  std::vector<NodeId> low(n + 1, 0);
  for (NodeId v = 1; v <= n; ++v) {
    NodeId r = uf.find(v);
    if (low[r] == 0 || v < low[r]) low[r] = v;
  }
  std::vector<NodeId> out(n);
  for (NodeId v = 1; v <= n; ++v) out[v - 1] = low[uf.find(v)];
  return out;
}

}  // namespace

void merge_phase(ClusterPartition& part, const std::vector<MergeCandidate>& candidates, std::size_t n) {
  std::map<NodeId, std::size_t> size;
  for (NodeId c : part.cluster) ++size[c];
  struct Edge {
    Word w;
    NodeId a, b;
    auto operator<=>(const Edge&) const = default;
  };
  std::vector<Edge> chosen;
  std::map<NodeId, std::set<NodeId>> reached;
  for (const auto& c : candidates) {
    chosen.push_back({1, c.a, c.b});
    NodeId other = part.cluster[c.a - 1] == c.cluster ? part.cluster[c.b - 1] : part.cluster[c.a - 1];
    if (other != c.cluster) reached[c.cluster].insert(other);
  }
  // Weight-n edges: the lightest one between clusters X and Y joins their leaders.
  for (auto [x, sx] : size) {
    const auto& r = reached[x];
    std::size_t need = sx > r.size() ? sx - r.size() : 0;
    for (auto it = size.begin(); need > 0 && it != size.end(); ++it) {
      NodeId y = it->first;
      if (y == x || r.count(y)) continue;
      chosen.push_back({static_cast<Word>(n), std::min(x, y), std::max(x, y)});
      --need;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());

  UnionFind clusters(n), fragments(n);
  for (NodeId v = 1; v <= n; ++v) {
    clusters.unite(v, part.cluster[v - 1]);
    fragments.unite(v, part.fragment[v - 1]);
  }
  for (const auto& e : chosen) {
    if (clusters.unite(e.a, e.b)) part.tree.emplace_back(e.a, e.b, e.w);
    if (e.w == 1) fragments.unite(e.a, e.b);
  }
  part.cluster = relabel_by_min(clusters, n);
  part.fragment = relabel_by_min(fragments, n);
  ++part.phases;
  std::map<NodeId, std::size_t> after;
  for (NodeId c : part.cluster) ++after[c];
  std::size_t smallest = n;
  for (auto [c, s] : after) smallest = std::min(smallest, s);
  part.min_size_history.push_back(smallest);
}

ClusterPartition cluster_merge(const Graph& g, const std::vector<char>& in_u, std::size_t max_phases) {
  ClusterPartition part = initial_partition(g.n());
  for (;;) {
    auto cands = weight1_candidates(g, in_u, part);
    if (cands.empty()) {
      part.stable = true;
      break;
    }
    if (part.phases >= max_phases) break;
    merge_phase(part, cands, g.n());
  }
  return part;
}

namespace {

// Greedy over one component: ascending ID, smallest palette color not used by
// an already colored component neighbor.
std::map<NodeId, Color> color_component(const std::map<NodeId, std::vector<Color>>& palettes,
                                        const std::map<NodeId, std::vector<NodeId>>& nbrs) {
  std::map<NodeId, Color> out;
  for (const auto& [u, pal] : palettes) {
    std::set<Color> taken;
    auto it = nbrs.find(u);
    if (it != nbrs.end())
      for (NodeId v : it->second)
        if (auto c = out.find(v); c != out.end()) taken.insert(c->second);
    Color pick = 0;
    for (Color c : pal)
      if (!taken.count(c)) {
        pick = c;
        break;
      }
    if (pick == 0) throw EngineFault("component coloring: palette of node " + std::to_string(u) + " exhausted");
    out[u] = pick;
  }
  return out;
}

}  // namespace

Coloring ship_and_color_components(const Graph& g, const ClusterPartition& part, const PaletteState& state,
                                   std::size_t cap) {
  if (!part.stable) throw EngineFault("component split on a partition that still has weight-1 edges between pieces");
  std::vector<char> in_u(g.n());
  for (NodeId u = 1; u <= g.n(); ++u) in_u[u - 1] = state.colored(u) ? 0 : 1;
  Coloring out;
  for (const auto& comp : part.components(in_u)) {
    if (comp.size() > cap) {
      throw EngineFault("uncolored component of size " + std::to_string(comp.size()) + " exceeds cap " +
                        std::to_string(cap));
    }
    std::map<NodeId, std::vector<Color>> pal;
    std::map<NodeId, std::vector<NodeId>> nb;
    for (NodeId u : comp) {
      pal[u] = state.palette[u - 1];
      for (NodeId v : g.neighbors(u))
        if (in_u[v - 1]) nb[u].push_back(v);
    }
    for (auto [u, c] : color_component(pal, nb)) out.assignment[u] = c;
  }
  return out;
}

// ------------------------------------------------------------- the program

namespace {

enum Phase : Word {
  kDegrees = 1,
  kGather,
  kColors,
  kConfirm,    // conflicts settled, palettes rebuilt
  kLeader,     // leaders combine candidates
  kMerge,      // node 1 merges, everyone else waits
  kAnnounce,   // everyone learns its new cluster / fragment, broadcasts it
  kRefresh,    // everyone records all clusters / fragments, next phase starts
  kShip,       // owners color their component
  kFinal,
  kGathered,   // gather-only runs end here
};

constexpr NodeId kSplitter = 1;

struct State {
  Word phase = kDegrees;
  Word delta = 0, iters = 0, radius = 0, bits = 0, rs_words = 0, t = 0, t_next = 0;
  Word color = 0, phases = 0, stable = 0, components = 0, max_component = 0;
  std::vector<Word> rs;
  std::vector<Word> ball;  // flattened records, sorted by id
  std::vector<Word> nbrs;
  std::vector<Word> colors, palette, cluster, fragment;
  std::vector<Word> stash;     // words this node addressed to itself
  std::vector<Word> decision;  // splitter's copy of its own announcement
  std::vector<Word> history;   // splitter: smallest cluster size per phase

  void encode(std::vector<Word>& mem) const {
    mem.clear();
    WordWriter w(mem);
    for (Word f : {phase, delta, iters, radius, bits, rs_words, t, t_next, color, phases, stable, components,
                   max_component})
      w.put(f);
    for (const auto* s : {&rs, &ball, &nbrs, &colors, &palette, &cluster, &fragment, &stash, &decision, &history})
      w.put_seq(*s);
  }

  static State decode(std::span<const Word> mem) {
    State s;
    WordReader r(mem);
    for (Word* f : {&s.phase, &s.delta, &s.iters, &s.radius, &s.bits, &s.rs_words, &s.t, &s.t_next, &s.color,
                    &s.phases, &s.stable, &s.components, &s.max_component})
      *f = r.get();
    for (auto* v : {&s.rs, &s.ball, &s.nbrs, &s.colors, &s.palette, &s.cluster, &s.fragment, &s.stash, &s.decision,
                    &s.history})
      *v = r.get_seq<Word>();
    return s;
  }
};

// Record: [id, deg, adj..., rs words...]; rs length is global.
void append_record(std::vector<Word>& out, const BallMember& m) {
  out.push_back(m.id);
  out.push_back(m.adj.size());
  out.insert(out.end(), m.adj.begin(), m.adj.end());
  out.insert(out.end(), m.rs.begin(), m.rs.end());
}

std::vector<BallMember> parse_records(std::span<const Word> words, std::size_t rs_words) {
  std::vector<BallMember> out;
  std::size_t i = 0;
  while (i < words.size()) {
    if (i + 2 > words.size()) throw EngineFault("truncated ball record");
    BallMember m;
    m.id = static_cast<NodeId>(words[i]);
    std::size_t deg = words[i + 1];
    if (i + 2 + deg + rs_words > words.size()) throw EngineFault("truncated ball record");
    for (std::size_t j = 0; j < deg; ++j) m.adj.push_back(static_cast<NodeId>(words[i + 2 + j]));
    m.rs.assign(words.begin() + i + 2 + deg, words.begin() + i + 2 + deg + rs_words);
    i += 2 + deg + rs_words;
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<Word> encode_records(const std::vector<BallMember>& ms) {
  std::vector<Word> out;
  for (const auto& m : ms) append_record(out, m);
  return out;
}

void merge_records(std::vector<BallMember>& into, std::vector<BallMember> more) {
  for (auto& m : more) into.push_back(std::move(m));
  std::sort(into.begin(), into.end(), [](const BallMember& a, const BallMember& b) { return a.id < b.id; });
  into.erase(std::unique(into.begin(), into.end(), [](const BallMember& a, const BallMember& b) { return a.id == b.id; }),
             into.end());
}

// Hop distance from `center` inside the ball, SIZE_MAX when unreachable there.
std::map<NodeId, std::size_t> ball_distances(const std::vector<BallMember>& ms, NodeId center) {
  std::map<NodeId, const BallMember*> by;
  for (const auto& m : ms) by[m.id] = &m;
  std::map<NodeId, std::size_t> dist;
  std::deque<NodeId> q{center};
  dist[center] = 0;
  while (!q.empty()) {
    NodeId u = q.front();
    q.pop_front();
    auto it = by.find(u);
    if (it == by.end()) continue;
    for (NodeId v : it->second->adj) {
      if (!by.count(v) || dist.count(v)) continue;
      dist[v] = dist[u] + 1;
      q.push_back(v);
    }
  }
  return dist;
}

std::vector<BallMember> within(const std::vector<BallMember>& ms, const std::map<NodeId, std::size_t>& dist,
                               std::size_t r) {
  std::vector<BallMember> out;
  for (const auto& m : ms) {
    auto it = dist.find(m.id);
    if (it != dist.end() && it->second <= r) out.push_back(m);
  }
  return out;
}

struct Ctx {
  const LowDegParams& params;
  NodeContext& ctx;
  State& s;
};

void start_merge_phase(Ctx& c);

void finish_gather(Ctx& c) {
  auto& s = c.s;
  auto ms = parse_records(s.ball, s.rs_words);
  auto dist = ball_distances(ms, c.ctx.id());
  ms = within(ms, dist, s.radius);
  s.ball = encode_records(ms);
  if (c.params.gather_only) {
    s.phase = kGathered;
    c.ctx.halt();
    return;
  }
  LabeledBall ball{c.ctx.id(), s.radius, std::move(ms)};
  auto res = replay_locally(ball, s.iters, s.delta);
  c.ctx.charge(ball.members.size() * (s.iters + 1));
  s.color = res.color;
  s.ball.clear();
  c.ctx.broadcast({s.color});
  s.phase = kColors;
}

// One doubling step: t -> min(2t, R) (0 -> 1 first).
void gather_step(Ctx& c) {
  auto& s = c.s;
  const NodeId me = c.ctx.id();
  const std::size_t n = c.ctx.n();
  if (c.params.volume_guard > 0) {
    double vol = std::pow(static_cast<double>(s.delta), 2.0 * static_cast<double>(s.t) + 3.0);
    if (vol > c.params.volume_guard * static_cast<double>(n)) {
      throw EngineFault("ball gathering volume guard violated: delta^(2t+3) = " + std::to_string(vol) + " at t=" +
                        std::to_string(s.t));
    }
  }
  auto ms = parse_records(s.ball, s.rs_words);
  if (s.t == 0) {
    s.t_next = 1;
    auto rec = encode_records(ms);
    for (Word v : s.nbrs) c.ctx.route_stream(static_cast<NodeId>(v), rec);
  } else {
    s.t_next = std::min<Word>(2 * s.t, s.radius);
    auto dist = ball_distances(ms, me);
    auto payload = encode_records(within(ms, dist, s.t_next - s.t));
    for (auto [v, d] : dist)
      if (d == s.t && v != me) c.ctx.route_stream(v, payload);
  }
  c.ctx.charge(s.ball.size());
  s.phase = kGather;
}

void on_gather(Ctx& c) {
  auto& s = c.s;
  auto ms = parse_records(s.ball, s.rs_words);
  for (NodeId src : c.ctx.inbox().senders()) merge_records(ms, parse_records(c.ctx.inbox().stream_from(src), s.rs_words));
  s.ball = encode_records(ms);
  s.t = s.t_next;
  if (s.t >= s.radius)
    finish_gather(c);
  else
    gather_step(c);
}

bool in_u(const State& s, NodeId v) { return s.colors[v - 1] == 0; }

// Candidates of this node: best weight-1 edge per foreign fragment.
std::map<Word, std::pair<Word, Word>> own_candidates(const State& s, NodeId me) {
  std::map<Word, std::pair<Word, Word>> best;
  if (!in_u(s, me)) return best;
  for (Word v : s.nbrs) {
    if (!in_u(s, static_cast<NodeId>(v)) || s.fragment[v - 1] == s.fragment[me - 1]) continue;
    auto e = std::make_pair(std::min<Word>(me, v), std::max<Word>(me, v));
    Word q = s.fragment[v - 1];
    auto it = best.find(q);
    if (it == best.end() || e < it->second) best[q] = e;
  }
  return best;
}

void fold_triples(std::map<Word, std::pair<Word, Word>>& best, std::span<const Word> words) {
  for (std::size_t i = 0; i + 3 <= words.size(); i += 3) {
    auto e = std::make_pair(words[i + 1], words[i + 2]);
    auto it = best.find(words[i]);
    if (it == best.end() || e < it->second) best[words[i]] = e;
  }
}

std::vector<Word> flatten(const std::map<Word, std::pair<Word, Word>>& best) {
  std::vector<Word> out;
  for (auto& [q, e] : best) {
    out.push_back(q);
    out.push_back(e.first);
    out.push_back(e.second);
  }
  return out;
}

void start_merge_phase(Ctx& c) {
  auto& s = c.s;
  const NodeId me = c.ctx.id();
  auto words = flatten(own_candidates(s, me));
  const NodeId leader = static_cast<NodeId>(s.cluster[me - 1]);
  s.stash.clear();
  if (leader == me)
    s.stash = std::move(words);
  else if (!words.empty())
    c.ctx.route_stream(leader, words);
  s.phase = kLeader;
}

void on_leader(Ctx& c) {
  auto& s = c.s;
  const NodeId me = c.ctx.id();
  if (s.cluster[me - 1] == me) {
    std::map<Word, std::pair<Word, Word>> best;
    fold_triples(best, s.stash);
    for (NodeId src : c.ctx.inbox().senders()) fold_triples(best, c.ctx.inbox().stream_from(src));
    auto words = flatten(best);
    if (me == kSplitter)
      s.stash = std::move(words);
    else if (!words.empty())
      c.ctx.route_stream(kSplitter, words);
  }
  s.phase = kMerge;
}

ClusterPartition partition_from(const State& s) {
  ClusterPartition p;
  p.phases = s.phases;
  for (Word c : s.cluster) p.cluster.push_back(static_cast<NodeId>(c));
  for (Word f : s.fragment) p.fragment.push_back(static_cast<NodeId>(f));
  for (Word h : s.history) p.min_size_history.push_back(h);
  return p;
}

void on_merge(Ctx& c, const LowDegParams& params) {
  auto& s = c.s;
  const NodeId me = c.ctx.id();
  const std::size_t n = c.ctx.n();
  if (me != kSplitter) {
    s.phase = kAnnounce;
    return;
  }
  std::vector<MergeCandidate> cands;
  auto add = [&](Word cluster, std::span<const Word> words) {
    for (std::size_t i = 0; i + 3 <= words.size(); i += 3)
      cands.push_back({static_cast<NodeId>(cluster), static_cast<NodeId>(words[i]), static_cast<NodeId>(words[i + 1]),
                       static_cast<NodeId>(words[i + 2])});
  };
  add(me, s.stash);
  for (NodeId src : c.ctx.inbox().senders()) add(src, c.ctx.inbox().stream_from(src));
  s.stash.clear();
  if (cands.empty()) {
    // Every weight-1 edge is inside a fragment: split and ship.
    s.stable = 1;
    std::vector<char> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = s.colors[i] == 0;
    auto comps = partition_from(s).components(u);
    s.components = comps.size();
    s.max_component = 0;
    for (const auto& comp : comps) s.max_component = std::max<Word>(s.max_component, comp.size());
    const std::size_t cap = params.component_cap ? params.component_cap : default_component_cap(n);
    if (s.max_component > cap) {
      throw EngineFault("uncolored component of size " + std::to_string(s.max_component) + " exceeds cap " +
                        std::to_string(cap));
    }
    s.decision = {0};
    c.ctx.broadcast({0});
    s.phase = kAnnounce;
    return;
  }
  if (s.phases >= params.max_phases) throw EngineFault("cluster merging did not settle within max_phases");
  auto part = partition_from(s);
  merge_phase(part, cands, n);
  c.ctx.charge(cands.size() + n);
  s.phases = part.phases;
  s.history.assign(part.min_size_history.begin(), part.min_size_history.end());
  for (NodeId v = 1; v <= n; ++v) {
    std::vector<Word> msg{1, part.cluster[v - 1], part.fragment[v - 1]};
    if (v == me)
      s.decision = msg;
    else
      c.ctx.send(v, msg);
  }
  s.phase = kAnnounce;
}

void start_shipping(Ctx& c) {
  auto& s = c.s;
  const NodeId me = c.ctx.id();
  s.stash.clear();
  if (in_u(s, me)) {
    std::vector<Word> rec{me, s.palette.size()};
    rec.insert(rec.end(), s.palette.begin(), s.palette.end());
    std::vector<Word> un;
    for (Word v : s.nbrs)
      if (in_u(s, static_cast<NodeId>(v))) un.push_back(v);
    rec.push_back(un.size());
    rec.insert(rec.end(), un.begin(), un.end());
    const NodeId owner = static_cast<NodeId>(s.fragment[me - 1]);
    if (owner == me)
      s.stash = std::move(rec);
    else
      c.ctx.route_stream(owner, rec);
  }
  s.phase = kShip;
}

void on_announce(Ctx& c) {
  auto& s = c.s;
  const NodeId me = c.ctx.id();
  std::vector<Word> msg = s.decision;
  if (me != kSplitter) {
    for (const auto& m : c.ctx.inbox().all())
      if (m.src == kSplitter) msg = m.payload;
  }
  if (msg.empty()) throw EngineFault("lowdeg: node " + std::to_string(me) + " missed the merge announcement");
  s.decision.clear();
  if (msg[0] == 0) {
    start_shipping(c);
    return;
  }
  s.cluster[me - 1] = msg[1];
  s.fragment[me - 1] = msg[2];
  c.ctx.broadcast({msg[1], msg[2]});
  s.phase = kRefresh;
}

void on_refresh(Ctx& c) {
  auto& s = c.s;
  for (const auto& m : c.ctx.inbox().all())
    if (m.broadcast) {
      s.cluster[m.src - 1] = m.payload.at(0);
      s.fragment[m.src - 1] = m.payload.at(1);
    }
  start_merge_phase(c);
}

void on_ship(Ctx& c) {
  auto& s = c.s;
  const NodeId me = c.ctx.id();
  if (in_u(s, me) && s.fragment[me - 1] == me) {
    std::map<NodeId, std::vector<Color>> pal;
    std::map<NodeId, std::vector<NodeId>> nb;
    auto take = [&](std::span<const Word> w) {
      std::size_t i = 0;
      while (i < w.size()) {
        NodeId u = static_cast<NodeId>(w[i]);
        std::size_t pc = w[i + 1];
        auto& p = pal[u];
        for (std::size_t j = 0; j < pc; ++j) p.push_back(static_cast<Color>(w[i + 2 + j]));
        std::size_t uc = w[i + 2 + pc];
        auto& q = nb[u];
        for (std::size_t j = 0; j < uc; ++j) q.push_back(static_cast<NodeId>(w[i + 3 + pc + j]));
        i += 3 + pc + uc;
      }
    };
    take(s.stash);
    for (NodeId src : c.ctx.inbox().senders()) take(c.ctx.inbox().stream_from(src));
    c.ctx.charge(pal.size());
    for (auto [u, col] : color_component(pal, nb)) {
      if (u == me)
        s.color = col;
      else
        c.ctx.send(u, {col});
    }
  }
  s.stash.clear();
  s.phase = kFinal;
}

}  // namespace

void LowDegProgram::step(NodeContext& ctx) const {
  auto& mem = ctx.memory();
  const NodeId me = ctx.id();
  const std::size_t n = ctx.n();
  State s;
  if (ctx.round() == 1) {
    WordReader r(mem);
    Word deg = r.get();
    for (Word i = 0; i < deg; ++i) s.nbrs.push_back(r.get());
    ctx.broadcast({deg});
    s.phase = kDegrees;
    s.encode(mem);
    return;
  }
  s = State::decode(mem);
  Ctx c{params_, ctx, s};
  switch (s.phase) {
    case kDegrees: {
      Word delta = s.nbrs.size();
      for (const auto& m : ctx.inbox().all())
        if (m.broadcast) delta = std::max(delta, m.payload.at(0));
      s.delta = delta;
      s.iters = params_.iterations ? params_.iterations : default_iterations(n);
      s.radius = params_.gather_radius >= 0 ? static_cast<Word>(params_.gather_radius) : s.iters;
      s.bits = rs_bits_per_iteration(delta);
      s.rs_words = rs_word_count(s.iters, delta);
      for (Word i = 0; i < s.rs_words; ++i) s.rs.push_back(ctx.rng().next());
      BallMember self{me, {}, s.rs};
      for (Word v : s.nbrs) self.adj.push_back(static_cast<NodeId>(v));
      s.ball = encode_records({self});
      s.t = 0;
      if (s.radius == 0)
        finish_gather(c);
      else
        gather_step(c);
      break;
    }
    case kGather:
      on_gather(c);
      break;
    case kColors: {
      // A replay from a ball thinner than 2T can be wrong near the rim; the
      // larger ID of a same-colored pair gives its color up.
      if (s.color)
        for (const auto& m : ctx.inbox().all())
          if (m.broadcast && m.src < me && m.payload.at(0) == s.color &&
              std::binary_search(s.nbrs.begin(), s.nbrs.end(), Word{m.src}))
            s.color = 0;
      ctx.broadcast({s.color});
      s.phase = kConfirm;
      break;
    }
    case kConfirm: {
      s.colors.assign(n, 0);
      s.colors[me - 1] = s.color;
      for (const auto& m : ctx.inbox().all())
        if (m.broadcast) s.colors[m.src - 1] = m.payload.at(0);
      std::set<Word> used;
      for (Word v : s.nbrs)
        if (s.colors[v - 1]) used.insert(s.colors[v - 1]);
      s.palette.clear();
      if (s.color == 0)
        for (Word col = 1; col <= s.delta + 1; ++col)
          if (!used.count(col)) s.palette.push_back(col);
      s.cluster.resize(n);
      std::iota(s.cluster.begin(), s.cluster.end(), Word{1});
      s.fragment = s.cluster;
      if (me == kSplitter) s.history = {1};
      start_merge_phase(c);
      break;
    }
    case kLeader:
      on_leader(c);
      break;
    case kMerge:
      on_merge(c, params_);
      break;
    case kAnnounce:
      on_announce(c);
      break;
    case kRefresh:
      on_refresh(c);
      break;
    case kShip:
      on_ship(c);
      break;
    case kFinal:
      if (s.color == 0)
        for (const auto& m : ctx.inbox().all())
          if (!m.broadcast && !m.payload.empty()) s.color = m.payload[0];
      if (s.color == 0) throw EngineFault("lowdeg: node " + std::to_string(me) + " finished uncolored");
      if (me != kSplitter) s.colors.clear();  // the splitter keeps the post-replay colors for stats
      s.palette.clear();
      ctx.halt();
      break;
    default:
      throw EngineFault("lowdeg: corrupt phase word");
  }
  s.encode(mem);
}

std::vector<Word> LowDegProgram::output(std::span<const Word> memory) const {
  State s = State::decode(memory);
  if (params_.gather_only) {
    std::vector<Word> out{s.radius, s.rs_words};
    out.insert(out.end(), s.ball.begin(), s.ball.end());
    return out;
  }
  return {s.color};
}

CCConfig lowdeg_cc_config(std::size_t n, CCConfig base) {
  base.route_capacity_factor = std::max(base.route_capacity_factor, 4.0 * static_cast<double>(n));
  return base;
}

LabeledBall ball_from_output(NodeId center, std::span<const Word> output) {
  if (output.size() < 2) throw EngineFault("not a gather-only output");
  LabeledBall b;
  b.center = center;
  b.radius = output[0];
  b.members = parse_records(output.subspan(2), output[1]);
  return b;
}

GatherResult gather_balls(const Graph& g, std::size_t radius, std::uint64_t seed, std::size_t iterations,
                          CCConfig config) {
  LowDegParams p;
  p.iterations = iterations;
  p.gather_radius = static_cast<long>(radius);
  p.gather_only = true;
  LowDegProgram prog(p);
  auto res = run_cc(prog, g, seed, config);
  GatherResult out;
  out.rounds = res.rounds_used;
  for (NodeId u = 1; u <= g.n(); ++u) out.balls.push_back(ball_from_output(u, res.outputs[u - 1]));
  return out;
}

LowDegStats lowdeg_stats(const std::vector<std::vector<Word>>& final_memory) {
  LowDegStats st;
  if (final_memory.empty()) return st;
  State s = State::decode(final_memory[0]);
  st.iterations = s.iters;
  st.radius = s.radius;
  st.delta = s.delta;
  st.phases = s.phases;
  st.components = s.components;
  st.max_component = s.max_component;
  st.min_size_history.assign(s.history.begin(), s.history.end());
  for (Word c : s.cluster) st.cluster.push_back(static_cast<NodeId>(c));
  for (std::size_t i = 0; i < s.colors.size(); ++i)
    if (s.colors[i] == 0) st.uncolored_nodes.push_back(static_cast<NodeId>(i + 1));
  st.uncolored = st.uncolored_nodes.size();
  return st;
}

}  // namespace cliquemr
