#include "cliquemr/highdeg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

#include "cliquemr/words.hpp"

namespace cliquemr {

std::size_t default_beta(std::size_t n) {
  if (n <= 2) return 1;
  return static_cast<std::size_t>(std::bit_width(n - 1));
}

std::size_t GroupReport::bad_count() const {
  std::size_t bad = 0;
  for (char g : good) bad += g ? 0 : 1;
  return bad;
}

GroupReport classify_groups(std::span<const GroupDegreeReport> reports, std::size_t groups, std::size_t n) {
  GroupReport out;
  out.n = n;
  out.node_count.assign(groups, 0);
  out.edge_count.assign(groups, 0);
  out.max_degree.assign(groups, 0);
  out.good.assign(groups, 1);
  std::vector<std::size_t> sum(groups, 0);
  std::set<NodeId> seen;
  for (const auto& r : reports) {
    if (!seen.insert(r.node).second) throw EngineFault("group census: node " + std::to_string(r.node) + " reported twice");
    if (r.group < 1 || r.group > groups) throw EngineFault("group census: group index out of range");
    auto k = r.group - 1;
    ++out.node_count[k];
    sum[k] += r.in_group_degree;
    out.max_degree[k] = std::max(out.max_degree[k], r.in_group_degree);
  }
  for (std::size_t k = 0; k < groups; ++k) {
    if (sum[k] % 2 != 0) {
      throw EngineFault("group census: odd in-group degree sum " + std::to_string(sum[k]) + " in group " +
                        std::to_string(k + 1));
    }
    out.edge_count[k] = sum[k] / 2;
    out.good[k] = out.edge_count[k] <= n ? 1 : 0;
  }
  return out;
}

bool trial_succeeded(std::size_t bad_count, std::size_t beta) { return bad_count <= 2 * beta; }

Coloring color_subgraph_greedy(const Graph& sub, std::span<const NodeId> labels, Color palette_base) {
  if (labels.size() != sub.n()) throw std::invalid_argument("label count does not match subgraph size");
  std::vector<std::size_t> order(sub.n());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return labels[a] < labels[b]; });
  std::vector<Color> local(sub.n(), 0);
  std::vector<char> used;
  for (auto i : order) {
    auto nb = sub.neighbors(static_cast<NodeId>(i + 1));
    used.assign(nb.size() + 2, 0);
    for (NodeId v : nb) {
      Color c = local[v - 1];
      if (c != 0 && c < used.size()) used[c] = 1;
    }
    Color c = 1;
    while (used[c]) ++c;
    local[i] = c;
  }
  Coloring out;
  for (std::size_t i = 0; i < sub.n(); ++i) out.assignment[labels[i]] = palette_base + local[i];
  return out;
}

Coloring color_subgraph_greedy(const Graph& g, const std::vector<NodeId>& nodes, Color palette_base) {
  auto [sub, labels] = g.induced(nodes);
  return color_subgraph_greedy(sub, std::span<const NodeId>(labels), palette_base);
}

std::optional<Coloring> residual_collect_and_color(const Graph& g, const std::vector<NodeId>& residual,
                                                   Color palette_base, double cap) {
  auto [sub, labels] = g.induced(residual);
  if (static_cast<double>(sub.m()) > cap) return std::nullopt;
  return color_subgraph_greedy(sub, std::span<const NodeId>(labels), palette_base);
}

namespace {

enum Phase : Word {
  kDegrees = 1,
  kGroups,
  kReports,      // node 1 only
  kWaitReports,  // everyone else
  kVerdict,
  kMarkers,
  kCount,      // node 1 only
  kWaitCount,  // everyone else
  kGo,
  kColor,
  kFinal,
};

enum Role : Word { kMember = 0, kRecipient = 1, kCollector = 2 };

constexpr NodeId kCoordinator = 1;

struct State {
  Word phase = kDegrees;
  Word delta = 0, beta = 0, groups = 0, group = 0, in_deg = 0, max_gn = 0;
  Word trials = 0, restarts = 0;
  Word good = 0, role = kMember, base = 0, residual = 0, color = 0;
  // coordinator bookkeeping
  Word bad_groups = 0, resid_nodes = 0, resid_edges = 0, max_in_group = 0;
  std::vector<NodeId> nbrs, same, resid_nbrs;
  std::vector<Word> verdict;     // coordinator's copy of what it told everyone
  std::vector<Word> own_stream;  // stream a node addressed to itself
  std::vector<Word> reports;     // coordinator: [group, in_deg] per node

  void encode(std::vector<Word>& mem) const {
    mem.clear();
    WordWriter w(mem);
    w.put(phase).put(delta).put(beta).put(groups).put(group).put(in_deg).put(max_gn);
    w.put(trials).put(restarts).put(good).put(role).put(base).put(residual).put(color);
    w.put(bad_groups).put(resid_nodes).put(resid_edges).put(max_in_group);
    w.put_seq(nbrs).put_seq(same).put_seq(resid_nbrs).put_seq(verdict).put_seq(own_stream).put_seq(reports);
  }

  static State decode(std::span<const Word> mem) {
    State s;
    WordReader r(mem);
    for (Word* f : {&s.phase, &s.delta, &s.beta, &s.groups, &s.group, &s.in_deg, &s.max_gn, &s.trials, &s.restarts,
                    &s.good, &s.role, &s.base, &s.residual, &s.color, &s.bad_groups, &s.resid_nodes,
                    &s.resid_edges, &s.max_in_group})
      *f = r.get();
    s.nbrs = r.get_seq<NodeId>();
    s.same = r.get_seq<NodeId>();
    s.resid_nbrs = r.get_seq<NodeId>();
    s.verdict = r.get_seq<Word>();
    s.own_stream = r.get_seq<Word>();
    s.reports = r.get_seq<Word>();
    return s;
  }
};

struct Thresholds {
  std::size_t beta, allowed_bad;
  double residual_cap;
};

Thresholds thresholds(const HighDegParams& p, std::size_t n, std::size_t delta) {
  Thresholds t;
  t.beta = p.beta ? p.beta : default_beta(n);
  t.allowed_bad = p.trial_threshold ? p.trial_threshold : 2 * t.beta;
  if (p.residual_cap > 0) {
    t.residual_cap = p.residual_cap;
  } else {
    double b = static_cast<double>(t.beta);
    t.residual_cap = 100.0 * static_cast<double>(n) * b * b * b * b / static_cast<double>(std::max<std::size_t>(1, delta));
  }
  return t;
}

NodeId collector_of(const State& s, std::size_t n) {
  return static_cast<NodeId>(std::min<std::size_t>(s.groups + 1, n));
}

void start_trial(State& s, NodeContext& ctx) {
  ++s.trials;
  s.group = ctx.rng().uniform(s.groups) + 1;
  s.good = 0;
  s.role = kMember;
  s.base = 0;
  s.residual = 0;
  s.same.clear();
  s.resid_nbrs.clear();
  s.own_stream.clear();
  s.verdict.clear();
  s.reports.clear();
  for (NodeId v : s.nbrs) ctx.send(v, {s.group});
  s.phase = kGroups;
}

// Coordinator, after the census: either a retry broadcast or per-node assignments.
void decide_trial(State& s, NodeContext& ctx, const HighDegParams& params) {
  const std::size_t n = ctx.n();
  std::vector<GroupDegreeReport> reps;
  reps.reserve(n);
  for (NodeId v = 1; v <= n; ++v) reps.push_back({v, s.reports[2 * (v - 1)], s.reports[2 * (v - 1) + 1]});
  auto census = classify_groups(reps, s.groups, n);
  auto t = thresholds(params, n, s.delta);
  s.bad_groups = census.bad_count();
  if (s.bad_groups > t.allowed_bad) {
    s.verdict = {0};
    ctx.broadcast({0});
    s.phase = kVerdict;
    return;
  }
  // Palette offsets: good groups first, residual after all of them.
  std::vector<Word> base(s.groups, 0);
  Word running = 0;
  s.max_in_group = 0;
  for (std::size_t k = 0; k < s.groups; ++k) {
    if (!census.good[k] || census.node_count[k] == 0) continue;
    base[k] = running;
    running += census.max_degree[k] + 1;
    s.max_in_group = std::max<Word>(s.max_in_group, census.max_degree[k]);
  }
  const NodeId collector = collector_of(s, n);
  for (NodeId v = 1; v <= n; ++v) {
    Word kv = s.reports[2 * (v - 1)];
    Word good = census.good[kv - 1];
    Word role = kMember, b = 0;
    if (v <= s.groups && census.good[v - 1] && census.node_count[v - 1] > 0) {
      role = kRecipient;
      b = base[v - 1];
    } else if (v == collector && s.bad_groups > 0) {
      role = kCollector;
      b = running;
    }
    std::vector<Word> msg{1, good, role, b};
    if (v == kCoordinator)
      s.verdict = msg;
    else
      ctx.send(v, msg);
  }
  // Per-recipient sink load of the later routing step.
  s.reports.resize(2 * n + 2 * s.groups);
  for (std::size_t k = 0; k < s.groups; ++k) {
    s.reports[2 * n + 2 * k] = census.good[k] ? census.node_count[k] : 0;
    s.reports[2 * n + 2 * k + 1] = census.good[k] ? census.edge_count[k] : 0;
  }
  s.phase = kVerdict;
}

void apply_verdict(State& s, NodeContext& ctx, std::span<const Word> v) {
  if (v.empty() || v[0] == 0) {
    start_trial(s, ctx);
    return;
  }
  s.good = v[1];
  s.role = v[2];
  s.base = v[3];
  s.residual = s.good ? 0 : 1;
  if (s.residual)
    for (NodeId u : s.nbrs) ctx.send(u, {1});
  s.phase = kMarkers;
}

std::span<const Word> message_from(const Inbox& inbox, NodeId src) {
  for (const auto& m : inbox.all())
    if (m.src == src) return m.payload;
  return {};
}

void send_stream(State& s, NodeContext& ctx) {
  const NodeId me = ctx.id();
  const NodeId dst = s.good ? static_cast<NodeId>(s.group) : collector_of(s, ctx.n());
  const auto& list = s.good ? s.same : s.resid_nbrs;
  std::vector<Word> stream{me, 0};
  for (NodeId v : list)
    if (v > me) stream.push_back(v);
  stream[1] = stream.size() - 2;
  if (dst == me)
    s.own_stream = std::move(stream);
  else
    ctx.route_stream(dst, stream);
}

void color_received(State& s, NodeContext& ctx) {
  std::vector<std::vector<Word>> streams;
  for (NodeId src : ctx.inbox().senders()) streams.push_back(ctx.inbox().stream_from(src));
  if (!s.own_stream.empty()) streams.push_back(s.own_stream);
  std::vector<NodeId> members;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (const auto& st : streams) {
    std::size_t i = 0;
    while (i + 2 <= st.size()) {
      NodeId u = static_cast<NodeId>(st[i]);
      std::size_t cnt = st[i + 1];
      members.push_back(u);
      for (std::size_t j = 0; j < cnt; ++j) edges.emplace_back(u, static_cast<NodeId>(st[i + 2 + j]));
      i += 2 + cnt;
    }
  }
  std::sort(members.begin(), members.end());
  auto label = [&](NodeId u) {
    auto it = std::lower_bound(members.begin(), members.end(), u);
    if (it == members.end() || *it != u) throw EngineFault("colorer received an edge to a non-member");
    return static_cast<NodeId>(it - members.begin() + 1);
  };
  std::vector<std::pair<NodeId, NodeId>> local;
  local.reserve(edges.size());
  for (auto [a, b] : edges) local.emplace_back(label(a), label(b));
  ctx.charge(members.size() + edges.size());
  Graph sub(members.size(), local);
  auto col = color_subgraph_greedy(sub, std::span<const NodeId>(members), static_cast<Color>(s.base));
  for (auto [u, c] : col.assignment) {
    if (u == ctx.id())
      s.color = c;
    else
      ctx.send(u, {c});
  }
}

}  // namespace

void HighDegProgram::step(NodeContext& ctx) const {
  auto& mem = ctx.memory();
  const NodeId me = ctx.id();
  const std::size_t n = ctx.n();
  State s;
  if (ctx.round() == 1) {
    WordReader r(mem);
    const Word deg = r.get();
    for (Word i = 0; i < deg; ++i) s.nbrs.push_back(static_cast<NodeId>(r.get()));
    ctx.broadcast({deg});
    s.phase = kDegrees;
    s.encode(mem);
    return;
  }
  s = State::decode(mem);
  const Inbox& in = ctx.inbox();

  switch (s.phase) {
    case kDegrees: {
      Word delta = s.nbrs.size();
      for (const auto& m : in.all())
        if (m.broadcast) delta = std::max(delta, m.payload.at(0));
      s.delta = delta;
      auto t = thresholds(params_, n, delta);
      s.beta = t.beta;
      s.groups = std::max<Word>(1, (delta + t.beta - 1) / t.beta);
      start_trial(s, ctx);
      break;
    }
    case kGroups: {
      std::map<Word, Word> per_group;
      for (const auto& m : in.all()) {
        Word k = m.payload.at(0);
        ++per_group[k];
        if (k == s.group) s.same.push_back(m.src);
      }
      for (auto [k, c] : per_group) s.max_gn = std::max(s.max_gn, c);
      s.in_deg = s.same.size();
      ctx.charge(s.nbrs.size());
      if (me == kCoordinator) {
        s.reports.assign(2 * n, 0);
        s.reports[0] = s.group;
        s.reports[1] = s.in_deg;
        s.phase = kReports;
      } else {
        ctx.send(kCoordinator, {s.group, s.in_deg});
        s.phase = kWaitReports;
      }
      break;
    }
    case kReports: {
      for (const auto& m : in.all()) {
        s.reports[2 * (m.src - 1)] = m.payload.at(0);
        s.reports[2 * (m.src - 1) + 1] = m.payload.at(1);
      }
      ctx.charge(n);
      decide_trial(s, ctx, params_);
      break;
    }
    case kWaitReports:
      s.phase = kVerdict;
      break;
    case kVerdict: {
      if (me == kCoordinator) {
        auto v = s.verdict;
        apply_verdict(s, ctx, v);
      } else {
        std::vector<Word> v;
        for (const auto& m : in.all())
          if (m.src == kCoordinator) v = m.payload;
        if (v.empty()) throw EngineFault("highdeg: node " + std::to_string(me) + " got no trial verdict");
        apply_verdict(s, ctx, v);
      }
      break;
    }
    case kMarkers: {
      if (s.residual)
        for (const auto& m : in.all()) s.resid_nbrs.push_back(m.src);
      const Word r_deg = s.residual ? s.resid_nbrs.size() : 0;
      if (me == kCoordinator) {
        s.resid_nodes = s.residual;
        s.resid_edges = r_deg;  // degree sum for now, halved at the count step
        s.phase = kCount;
      } else {
        if (s.residual) ctx.send(kCoordinator, {r_deg});
        s.phase = kWaitCount;
      }
      break;
    }
    case kCount: {
      for (const auto& m : in.all()) {
        ++s.resid_nodes;
        s.resid_edges += m.payload.at(0);
      }
      if (s.resid_edges % 2 != 0) throw EngineFault("highdeg: odd residual degree sum");
      s.resid_edges /= 2;
      auto t = thresholds(params_, n, s.delta);
      const std::size_t cap_words = ctx.config().route_capacity_words(n);
      bool ok = static_cast<double>(s.resid_edges) <= t.residual_cap &&
                2 * s.resid_nodes + s.resid_edges <= cap_words;
      for (std::size_t k = 0; ok && k < s.groups; ++k) {
        Word nodes = s.reports[2 * n + 2 * k], edges = s.reports[2 * n + 2 * k + 1];
        if (2 * nodes + edges > cap_words) ok = false;
      }
      s.verdict = {ok ? Word{1} : Word{0}};
      ctx.broadcast(s.verdict);
      s.phase = kGo;
      break;
    }
    case kWaitCount:
      s.phase = kGo;
      break;
    case kGo: {
      Word go = 0;
      if (me == kCoordinator) {
        go = s.verdict.at(0);
      } else {
        auto v = message_from(in, kCoordinator);
        if (v.empty()) throw EngineFault("highdeg: node " + std::to_string(me) + " got no residual verdict");
        go = v[0];
      }
      if (!go) {
        ++s.restarts;
        start_trial(s, ctx);
        break;
      }
      send_stream(s, ctx);
      s.phase = kColor;
      break;
    }
    case kColor:
      if (s.role != kMember) color_received(s, ctx);
      s.phase = kFinal;
      break;
    case kFinal:
      if (s.color == 0) {
        for (const auto& m : in.all())
          if (!m.broadcast && !m.payload.empty()) s.color = static_cast<Color>(m.payload[0]);
      }
      if (s.color == 0) throw EngineFault("highdeg: node " + std::to_string(me) + " finished uncolored");
      ctx.halt();
      break;
    default:
      throw EngineFault("highdeg: corrupt phase word");
  }
  s.encode(mem);
}

std::vector<Word> HighDegProgram::output(std::span<const Word> memory) const {
  return {State::decode(memory).color};
}

HighDegStats highdeg_stats(const std::vector<std::vector<Word>>& final_memory) {
  HighDegStats st;
  if (final_memory.empty()) return st;
  auto c = State::decode(final_memory[0]);
  st.beta = c.beta;
  st.delta = c.delta;
  st.groups = c.groups;
  st.trials = c.trials;
  st.residual_restarts = c.restarts;
  st.bad_groups = c.bad_groups;
  st.residual_nodes = c.resid_nodes;
  st.residual_edges = c.resid_edges;
  st.max_in_group_degree = c.max_in_group;
  for (const auto& mem : final_memory) st.max_group_neighbors = std::max<std::size_t>(st.max_group_neighbors, State::decode(mem).max_gn);
  return st;
}

Coloring coloring_from_outputs(const std::vector<std::vector<Word>>& outputs) {
  Coloring c;
  for (std::size_t i = 0; i < outputs.size(); ++i)
    if (!outputs[i].empty() && outputs[i][0] != 0) c.assignment[static_cast<NodeId>(i + 1)] = static_cast<Color>(outputs[i][0]);
  return c;
}

}  // namespace cliquemr
