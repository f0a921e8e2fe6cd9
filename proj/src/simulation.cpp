#include "cliquemr/simulation.hpp"

#include <algorithm>
#include <map>

namespace cliquemr {

PartitionFunction compute_partition(std::span<const std::size_t> loads, std::size_t eta,
                                    std::optional<std::size_t> max_parts) {
  PartitionFunction f;
  f.part.resize(loads.size());
  std::size_t current = 0;
  for (std::size_t x = 0; x < loads.size(); ++x) {
    if (loads[x] > eta) {
      throw EngineFault("partition: node " + std::to_string(x + 1) + " alone needs " + std::to_string(loads[x]) +
                        " words > " + std::to_string(eta));
    }
    if (f.part_load.empty() || current + loads[x] > eta) {
      f.part_load.push_back(0);
      current = 0;
    }
    current += loads[x];
    f.part_load.back() = current;
    f.part[x] = f.part_load.size();
  }
  if (max_parts && f.parts() > *max_parts) {
    throw EngineFault("infeasible configuration: partition needs " + std::to_string(f.parts()) +
                      " reducers but only " + std::to_string(*max_parts) + " exist");
  }
  return f;
}

SimConfig sim_config_for(const Graph& g, double eps, std::optional<double> c, CCConfig cc, double c_eta) {
  SimConfig s;
  s.mr = MRConfig::for_graph(g.n(), g.m(), eps, c, c_eta);
  s.cc = cc;
  return s;
}

std::size_t replicated_reserve(std::size_t n, std::size_t n_r) { return 20 * n + 3 * n_r + 8; }

std::size_t partition_budget(const MRConfig& mr) {
  const std::size_t reserve = replicated_reserve(mr.n, mr.n_r);
  if (mr.eta <= reserve) throw EngineFault("infeasible configuration: eta leaves no room beyond replicated data");
  return mr.eta - reserve;
}

std::vector<KVTuple> graph_to_tuples(const Graph& g) {
  std::vector<KVTuple> out;
  out.reserve(g.n() + g.m());
  for (NodeId u = 1; u <= g.n(); ++u) out.push_back(make_tuple(u, {tag_word(tag::kNode, u)}));
  for (auto [u, v] : g.edges()) out.push_back(make_tuple(u, {tag_word(tag::kEdge, u), v}));
  return out;
}

namespace {

constexpr std::size_t kStateChunk = 3;
constexpr std::size_t kMsgChunk = 2;
constexpr std::size_t kStateTupleWords = 1 + 2 + kStateChunk;
constexpr std::size_t kStatusTupleWords = 1 + 4;
constexpr std::size_t kMsgTupleWords = 1 + 3 + kMsgChunk;

std::size_t state_words(std::size_t memsize) {
  return (memsize + kStateChunk - 1) / kStateChunk * kStateTupleWords + kStatusTupleWords;
}

Word self_key(const ReduceContext& ctx) { return ctx.key()[0]; }

void emit(ReduceContext& ctx, std::initializer_list<Word> value) {
  ctx.emit_value(std::span<const Word>(value.begin(), value.size()));
}

void emit_state(ReduceContext& ctx, NodeId u, Round i, const std::vector<Word>& mem, bool halted) {
  for (std::size_t a = 0; a < mem.size(); a += kStateChunk) {
    Word w[kStateChunk] = {0, 0, 0};
    for (std::size_t j = 0; j < kStateChunk && a + j < mem.size(); ++j) w[j] = mem[a + j];
    emit(ctx, {tag_word(tag::kState, u), (Word{i} << 32) | a, w[0], w[1], w[2]});
  }
  emit(ctx, {tag_word(tag::kStatus, u), i, halted ? Word{1} : Word{0}, mem.size()});
}

struct LocalNode {
  bool from_graph = false;
  bool has_status = false;
  bool halted = false;
  Word memsize = 0;
  std::vector<NodeId> nbrs;
  std::vector<const KVTuple*> state;
};

std::vector<Word> rebuild_memory(NodeId u, const LocalNode& node) {
  if (!node.has_status) {
    if (!node.from_graph) throw EngineFault("simulation: node " + std::to_string(u) + " has neither state nor input");
    return initial_memory(node.nbrs);
  }
  std::vector<Word> mem(node.memsize, 0);
  for (const KVTuple* t : node.state) {
    std::size_t addr = t->v[1] & 0xFFFFFFFFULL;
    for (std::size_t j = 0; j < kStateChunk && addr + j < mem.size(); ++j) mem[addr + j] = t->v[2 + j];
  }
  return mem;
}

struct Gathered {
  std::map<NodeId, LocalNode> nodes;
  std::map<NodeId, std::vector<const KVTuple*>> msgs_to;
  std::vector<const KVTuple*> bcasts;
  std::vector<const KVTuple*> passthrough;
  std::optional<Word> wait;
};

Gathered gather(std::span<const KVTuple> in) {
  Gathered g;
  for (const auto& t : in) {
    NodeId u = node_of(t);
    switch (tag_of(t)) {
      case tag::kNode:
        g.nodes[u].from_graph = true;
        break;
      case tag::kEdge:
        g.nodes[u].nbrs.push_back(static_cast<NodeId>(t.v[1]));
        break;
      case tag::kState:
        g.nodes[u].state.push_back(&t);
        break;
      case tag::kStatus: {
        auto& nd = g.nodes[u];
        nd.has_status = true;
        nd.halted = t.v[2] != 0;
        nd.memsize = t.v[3];
        break;
      }
      case tag::kMsg:
        g.msgs_to[static_cast<NodeId>(t.v[1])].push_back(&t);
        break;
      case tag::kBcast:
        g.bcasts.push_back(&t);
        break;
      case tag::kWait:
        g.wait = t.v[1];
        break;
      case tag::kDegree:
        break;  // only needed by the first rounds
      case tag::kMeta:
      case tag::kDone:
        g.passthrough.push_back(&t);
        break;
      default:
        throw EngineFault("simulation step: unexpected tuple kind " + std::to_string(tag_of(t)));
    }
  }
  return g;
}

std::vector<Received> rebuild_inbox(NodeId u, const std::vector<const KVTuple*>& msgs,
                                    const std::vector<const KVTuple*>& bcasts) {
  std::vector<Received> items;
  // msgs are sorted by (src, dst, seq, part)
  for (std::size_t k = 0; k < msgs.size();) {
    const KVTuple* t = msgs[k];
    NodeId src = node_of(*t);
    Word meta = t->v[2];
    std::uint32_t seq = static_cast<std::uint32_t>(meta >> 16);
    std::size_t len = meta & 0xFF;
    Received r{src, seq, false, {}};
    while (k < msgs.size() && node_of(*msgs[k]) == src && (msgs[k]->v[2] >> 16) == seq) {
      r.payload.push_back(msgs[k]->v[3]);
      r.payload.push_back(msgs[k]->v[4]);
      ++k;
    }
    r.payload.resize(len);
    items.push_back(std::move(r));
  }
  for (const KVTuple* b : bcasts) {
    NodeId src = node_of(*b);
    if (src == u) continue;
    std::size_t len = b->v[1];
    items.push_back(Received{src, 0, true, std::vector<Word>(b->v.begin() + 2, b->v.begin() + 2 + len)});
  }
  return items;
}

// Reduce j-1: the clique round's local computation for every node held here.
void step_reducer(std::span<const KVTuple> in, ReduceContext& ctx, Round i, const CCProgram& program,
                  const SimConfig& cfg, std::uint64_t seed) {
  const std::size_t n = cfg.mr.n;
  Gathered g = gather(in);
  for (const KVTuple* t : g.passthrough) ctx.emit(*t);
  std::map<NodeId, std::size_t> count;
  std::size_t working = 0;

  if (g.wait) {
    // Routing still in flight: nobody computes, everything stays put.
    if (*g.wait > 1) emit(ctx, {tag_word(tag::kWait, 0), *g.wait - 1});
    for (const KVTuple* b : g.bcasts) ctx.emit(*b);
    for (auto& [dst, list] : g.msgs_to)
      for (const KVTuple* t : list) {
        ctx.emit(*t);
        count[dst] += kMsgTupleWords;
      }
    for (auto& [u, node] : g.nodes) {
      auto mem = rebuild_memory(u, node);
      emit_state(ctx, u, i, mem, node.halted);
      emit(ctx, {tag_word(tag::kSize, u), state_words(mem.size()), node.halted ? Word{1} : Word{0}});
    }
  } else {
    for (auto& [dst, list] : g.msgs_to)
      if (!g.nodes.count(dst))
        throw EngineFault("simulation: message for node " + std::to_string(dst) + " reached the wrong reducer");
    static const std::vector<const KVTuple*> kNone;
    for (auto& [u, node] : g.nodes) {
      auto mem = rebuild_memory(u, node);
      bool halted = node.halted;
      Word flags = 0;
      if (!halted) {
        auto it = g.msgs_to.find(u);
        Inbox inbox(rebuild_inbox(u, it == g.msgs_to.end() ? kNone : it->second, g.bcasts));
        // broadcasts are read from the reducer's single copy
        working += mem.size();
        for (const auto& r : inbox.all())
          if (!r.broadcast) working += r.payload.size();
        NodeContext nctx(u, n, i, mem, inbox, node_stream(seed, u, i), cfg.cc);
        program.step(nctx);
        Outbox out = nctx.take_outbox();
        validate_outbox(u, out, n, i, cfg.cc);
        halted = out.halted;
        if (out.any_routed()) flags |= 2;
        for (const auto& m : out.messages) {
          const std::size_t len = m.payload.size();
          const std::size_t parts = std::max<std::size_t>(1, (len + kMsgChunk - 1) / kMsgChunk);
          for (std::size_t p = 0; p < parts; ++p) {
            Word w0 = p * kMsgChunk < len ? m.payload[p * kMsgChunk] : 0;
            Word w1 = p * kMsgChunk + 1 < len ? m.payload[p * kMsgChunk + 1] : 0;
            Word meta = (Word{m.seq} << 16) | (p << 8) | len;
            emit(ctx, {tag_word(tag::kMsg, u), m.dst, meta, w0, w1});
            count[m.dst] += kMsgTupleWords;
          }
        }
        if (out.broadcast) {
          Word w[4] = {0, 0, 0, 0};
          for (std::size_t j = 0; j < out.broadcast->size(); ++j) w[j] = (*out.broadcast)[j];
          emit(ctx, {tag_word(tag::kBcastR, u), out.broadcast->size(), w[0], w[1], w[2], w[3]});
        }
      }
      if (halted) flags |= 1;
      emit_state(ctx, u, i, mem, halted);
      emit(ctx, {tag_word(tag::kSize, u), state_words(mem.size()), flags});
    }
  }
  for (auto [v, c] : count) emit(ctx, {tag_word(tag::kCount, v), c});
  for (const KVTuple* b : g.bcasts) working += b->vlen;
  ctx.note_working(working);
}

// Map j: counts, messages and states go to reducer (node mod n_r)+1, sizes to every reducer.
void count_map(const KVTuple& t, MapEmitter& out, std::size_t n_r) {
  switch (tag_of(t)) {
    case tag::kCount:
      out.emit(make_tuple(node_of(t) % n_r + 1, t.value()));
      break;
    case tag::kSize:
      for (std::size_t r = 1; r <= n_r; ++r) out.emit(make_tuple(r, t.value()));
      break;
    // Parked until the next partition is known: messages by destination,
    // node state by owner, so no reducer keeps what its step produced.
    case tag::kMsg:
      out.emit(make_tuple(t.v[1] % n_r + 1, t.value()));
      break;
    case tag::kState:
    case tag::kStatus:
      out.emit(make_tuple(node_of(t) % n_r + 1, t.value()));
      break;
    default:
      out.emit(t);
  }
}

// Reduce j: per-destination totals, plus the global halting / routing verdict.
void count_reducer(std::span<const KVTuple> in, ReduceContext& ctx, const SimConfig& cfg) {
  std::map<NodeId, Word> agg;
  std::size_t sizes = 0, halted = 0;
  bool routed = false;
  for (const auto& t : in) {
    switch (tag_of(t)) {
      case tag::kCount:
        agg[node_of(t)] += t.v[1];
        break;
      case tag::kSize:
        ++sizes;
        halted += t.v[2] & 1;
        routed = routed || (t.v[2] & 2);
        ctx.emit(t);
        break;
      default:
        ctx.emit(t);
    }
  }
  for (auto [v, c] : agg) emit(ctx, {tag_word(tag::kAgg, v), c});
  if (sizes != cfg.mr.n) throw EngineFault("simulation: reducer " + std::to_string(self_key(ctx)) + " saw " +
                                           std::to_string(sizes) + " size tuples, expected " + std::to_string(cfg.mr.n));
  if (halted == sizes) {
    emit(ctx, {tag_word(tag::kDone, 0)});
  } else if (routed && cfg.cc.route_rounds > 1) {
    emit(ctx, {tag_word(tag::kWait, 0), cfg.cc.route_rounds - 1});
  }
}

// Map j+1: aggregated counts to every reducer.
void agg_map(const KVTuple& t, MapEmitter& out, std::size_t n_r) {
  if (tag_of(t) == tag::kAgg) {
    for (std::size_t r = 1; r <= n_r; ++r) out.emit(make_tuple(r, t.value()));
  } else {
    out.emit(t);
  }
}

// Reduce j+1: next partition function, then everything gets its routing prefix.
void place_reducer(std::span<const KVTuple> in, ReduceContext& ctx, const SimConfig& cfg, Round i,
                   PartitionFunction* published) {
  const std::size_t n = cfg.mr.n;
  std::vector<std::size_t> loads(n, 0);
  for (const auto& t : in) {
    auto k = tag_of(t);
    if (k == tag::kSize) loads[node_of(t) - 1] += t.v[1];
    if (k == tag::kAgg) loads[node_of(t) - 1] += t.v[1];
  }
  auto f = compute_partition(loads, partition_budget(cfg.mr), cfg.mr.n_r);
  f.round = i;
  ctx.note_working(n);
  for (NodeId v = 1; v <= n; ++v) emit(ctx, {tag_word(tag::kMeta, v), f.part[v - 1]});
  for (const auto& t : in) {
    auto F = [&] { return static_cast<Word>(f.part[node_of(t) - 1]); };
    switch (tag_of(t)) {
      case tag::kState:
        emit(ctx, {tag_word(tag::kStateR, node_of(t)), F(), t.v[1], t.v[2], t.v[3], t.v[4]});
        break;
      case tag::kStatus:
        emit(ctx, {tag_word(tag::kStatusR, node_of(t)), F(), t.v[1], t.v[2], t.v[3]});
        break;
      case tag::kMsg: {
        NodeId dst = static_cast<NodeId>(t.v[1]);
        emit(ctx, {tag_word(tag::kMsgR, node_of(t)), f.part[dst - 1], dst, t.v[2], t.v[3], t.v[4]});
        break;
      }
      case tag::kSize:
      case tag::kAgg:
      case tag::kMeta:
        break;
      default:
        ctx.emit(t);
    }
  }
  if (published && self_key(ctx) == 1) *published = f;
}

// Final reduce: decode each node's memory into its output.
void collect_reducer(std::span<const KVTuple> in, ReduceContext& ctx, const CCProgram& program) {
  Gathered g;
  for (const auto& t : in) {
    NodeId u = node_of(t);
    if (tag_of(t) == tag::kState) g.nodes[u].state.push_back(&t);
    if (tag_of(t) == tag::kStatus) {
      g.nodes[u].has_status = true;
      g.nodes[u].memsize = t.v[3];
    }
  }
  for (auto& [u, node] : g.nodes) {
    auto out = program.output(rebuild_memory(u, node));
    const std::size_t chunks = std::max<std::size_t>(1, (out.size() + 2) / 3);
    for (std::size_t c = 0; c < chunks; ++c) {
      Word w[3] = {0, 0, 0};
      for (std::size_t j = 0; j < 3 && 3 * c + j < out.size(); ++j) w[j] = out[3 * c + j];
      emit(ctx, {tag_word(tag::kOut, u), c, out.size(), w[0], w[1], w[2]});
    }
  }
}

std::uint64_t balance_hash(std::uint64_t seed, const KVTuple& t) {
  std::uint64_t h = mix64(seed);
  for (Word w : t.value()) h = mix64(h ^ w);
  return h;
}

MRRoundResult run_round(std::vector<KVTuple>& tuples, Mapper m, Reducer r, const SimConfig& cfg, std::size_t idx) {
  MRRoundSpec spec{std::move(m), std::move(r)};
  return run_mr_round(tuples, spec, cfg.mr, idx);
}

}  // namespace

void delivery_map(const KVTuple& t, MapEmitter& out, std::size_t n_r) {
  const NodeId u = node_of(t);
  switch (tag_of(t)) {
    case tag::kNodeR:
      out.emit(make_tuple(t.v[1], {tag_word(tag::kNode, u)}));
      break;
    case tag::kEdgeR:
      out.emit(make_tuple(t.v[1], {tag_word(tag::kEdge, u), t.v[2]}));
      break;
    case tag::kStateR:
      out.emit(make_tuple(t.v[1], {tag_word(tag::kState, u), t.v[2], t.v[3], t.v[4], t.v[5]}));
      break;
    case tag::kStatusR:
      out.emit(make_tuple(t.v[1], {tag_word(tag::kStatus, u), t.v[2], t.v[3], t.v[4]}));
      break;
    case tag::kMsgR:
      out.emit(make_tuple(t.v[1], {tag_word(tag::kMsg, u), t.v[2], t.v[3], t.v[4], t.v[5]}));
      break;
    case tag::kBcastR: {
      KVTuple copy = t;
      copy.v[0] = tag_word(tag::kBcast, u);
      for (std::size_t r = 1; r <= n_r; ++r) out.emit(make_tuple(r, copy.value()));
      break;
    }
    default:
      out.emit(t);
  }
}

InitResult init_stage(const Graph& g, const SimConfig& cfg, std::uint64_t seed) {
  const std::size_t n_r = cfg.mr.n_r;
  const std::size_t n = g.n();
  if (cfg.mr.n != n) throw std::invalid_argument("MRConfig n does not match graph");
  const auto input = graph_to_tuples(g);

  for (unsigned attempt = 0;; ++attempt) {
    const std::uint64_t sub = derive_seed(seed, 0x696e6974ULL + attempt);
    InitResult res;
    res.attempts = attempt + 1;
    try {
      std::vector<KVTuple> t = input;
      // Map 1 / Reduce 1: random reducer per tuple, partial degrees.
      auto r1 = run_round(
          t, [&](const KVTuple& x, MapEmitter& out) { out.emit(make_tuple(balance_hash(sub, x) % n_r + 1, x.value())); },
          [](std::span<const KVTuple> in, ReduceContext& ctx) {
            std::map<NodeId, Word> d;
            for (const auto& x : in) {
              ctx.emit(x);
              if (tag_of(x) == tag::kNode) d[node_of(x)] += 0;
              if (tag_of(x) == tag::kEdge) {
                ++d[node_of(x)];
                ++d[static_cast<NodeId>(x.v[1])];
              }
            }
            ctx.note_working(2 * d.size());
            for (auto [u, c] : d) emit(ctx, {tag_word(tag::kPartialDegree, u), c});
          },
          cfg, 1);
      res.metrics.push_back(r1.metrics);
      // Map 2 / Reduce 2: partial degrees meet at (u mod n_r)+1.
      auto r2 = run_round(
          r1.tuples,
          [&](const KVTuple& x, MapEmitter& out) {
            if (tag_of(x) == tag::kPartialDegree)
              out.emit(make_tuple(node_of(x) % n_r + 1, x.value()));
            else
              out.emit(x);
          },
          [](std::span<const KVTuple> in, ReduceContext& ctx) {
            std::map<NodeId, Word> d;
            for (const auto& x : in) {
              if (tag_of(x) == tag::kPartialDegree)
                d[node_of(x)] += x.v[1];
              else
                ctx.emit(x);
            }
            for (auto [u, c] : d) emit(ctx, {tag_word(tag::kDegree, u), c});
          },
          cfg, 2);
      res.metrics.push_back(r2.metrics);
      // Map 3 / Reduce 3: every reducer learns all degrees and evaluates F0.
      PartitionFunction f0;
      auto r3 = run_round(
          r2.tuples,
          [&](const KVTuple& x, MapEmitter& out) {
            if (tag_of(x) == tag::kDegree)
              for (std::size_t r = 1; r <= n_r; ++r) out.emit(make_tuple(r, x.value()));
            else
              out.emit(x);
          },
          [&](std::span<const KVTuple> in, ReduceContext& ctx) {
            std::vector<std::size_t> loads(n, 0);
            std::size_t seen = 0;
            for (const auto& x : in)
              if (tag_of(x) == tag::kDegree) {
                // H(0) of u ships as NODE (2 words) plus one EDGE (3 words) per neighbor.
                loads[node_of(x) - 1] = 2 + 3 * x.v[1];
                ++seen;
              }
            if (seen != n) throw EngineFault("init: reducer saw " + std::to_string(seen) + " degrees");
            auto f = compute_partition(loads, partition_budget(cfg.mr), n_r);
            for (NodeId v = 1; v <= n; ++v) emit(ctx, {tag_word(tag::kMeta, v), f.part[v - 1]});
            for (const auto& x : in) {
              NodeId u = node_of(x);
              switch (tag_of(x)) {
                case tag::kNode:
                  emit(ctx, {tag_word(tag::kNodeR, u), f.part[u - 1]});
                  break;
                case tag::kEdge: {
                  NodeId v = static_cast<NodeId>(x.v[1]);
                  emit(ctx, {tag_word(tag::kEdgeR, u), f.part[u - 1], v});
                  emit(ctx, {tag_word(tag::kEdgeR, v), f.part[v - 1], u});
                  break;
                }
                default:
                  ctx.emit(x);
              }
            }
            if (self_key(ctx) == 1) f0 = f;
          },
          cfg, 3);
      res.metrics.push_back(r3.metrics);
      res.tuples = std::move(r3.tuples);
      res.f0 = std::move(f0);
      return res;
    } catch (const EngineFault& e) {
      // Only the randomized placement is retried; anything else is final.
      const std::string what = e.what();
      const bool balancing = what.find("reducer memory exceeded") != std::string::npos &&
                             (what.find("round 1") != std::string::npos || what.find("round 2") != std::string::npos);
      if (!balancing || attempt >= cfg.init_retries) throw;
    }
  }
}

std::vector<std::vector<Word>> memories_from_tuples(std::span<const KVTuple> tuples, std::size_t n) {
  std::vector<LocalNode> nodes(n);
  for (const auto& t : tuples) {
    auto k = tag_of(t);
    if (k != tag::kState && k != tag::kStatus) continue;
    NodeId u = node_of(t);
    if (u < 1 || u > n) throw EngineFault("state tuple for node out of range");
    if (k == tag::kState) nodes[u - 1].state.push_back(&t);
    if (k == tag::kStatus) {
      nodes[u - 1].has_status = true;
      nodes[u - 1].memsize = t.v[3];
    }
  }
  std::vector<std::vector<Word>> mem(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!nodes[i].has_status) throw EngineFault("no status tuple for node " + std::to_string(i + 1));
    mem[i] = rebuild_memory(static_cast<NodeId>(i + 1), nodes[i]);
  }
  return mem;
}

SimRoundResult simulate_round(Round i, std::span<const KVTuple> carried, const CCProgram& program,
                              const SimConfig& cfg, std::uint64_t seed, std::size_t first_mr_round) {
  const std::size_t n_r = cfg.mr.n_r;
  SimRoundResult res;
  std::vector<KVTuple> t(carried.begin(), carried.end());

  auto a = run_round(
      t, [n_r](const KVTuple& x, MapEmitter& out) { delivery_map(x, out, n_r); },
      [&](std::span<const KVTuple> in, ReduceContext& ctx) { step_reducer(in, ctx, i, program, cfg, seed); }, cfg,
      first_mr_round);
  res.metrics.push_back(a.metrics);
  res.memory = memories_from_tuples(a.tuples, cfg.mr.n);

  auto b = run_round(
      a.tuples, [n_r](const KVTuple& x, MapEmitter& out) { count_map(x, out, n_r); },
      [&](std::span<const KVTuple> in, ReduceContext& ctx) { count_reducer(in, ctx, cfg); }, cfg, first_mr_round + 1);
  res.metrics.push_back(b.metrics);
  res.done = std::any_of(b.tuples.begin(), b.tuples.end(), [](const KVTuple& x) { return tag_of(x) == tag::kDone; });

  PartitionFunction f;
  auto c = run_round(
      b.tuples, [n_r](const KVTuple& x, MapEmitter& out) { agg_map(x, out, n_r); },
      [&](std::span<const KVTuple> in, ReduceContext& ctx) { place_reducer(in, ctx, cfg, i, &f); }, cfg,
      first_mr_round + 2);
  res.metrics.push_back(c.metrics);
  res.tuples = std::move(c.tuples);
  res.partition = std::move(f);
  return res;
}

SimResult simulate(const CCProgram& program, const Graph& g, const SimConfig& cfg, std::uint64_t seed) {
  SimResult res;
  auto init = init_stage(g, cfg, seed);
  res.metrics = init.metrics;
  res.max_parts = init.f0.parts();
  std::size_t mr_round = init.metrics.size();
  std::vector<KVTuple> tuples = std::move(init.tuples);

  for (Round i = 1;; ++i) {
    if (i > cfg.cc.max_rounds) throw EngineFault(program.name() + ": round limit exceeded in simulation");
    auto r = simulate_round(i, tuples, program, cfg, seed, mr_round + 1);
    mr_round += 3;
    res.metrics.insert(res.metrics.end(), r.metrics.begin(), r.metrics.end());
    res.max_parts = std::max(res.max_parts, r.partition.parts());
    tuples = std::move(r.tuples);
    if (r.done) res.final_memory = r.memory;
    if (cfg.trace) res.memory_trace.push_back(std::move(r.memory));
    if (r.done) {
      res.cc_rounds = i;
      break;
    }
  }

  const std::size_t n_r = cfg.mr.n_r;
  auto fin = run_round(
      tuples, [n_r](const KVTuple& x, MapEmitter& out) { delivery_map(x, out, n_r); },
      [&](std::span<const KVTuple> in, ReduceContext& ctx) { collect_reducer(in, ctx, program); }, cfg, ++mr_round);
  res.metrics.push_back(fin.metrics);
  res.mr_rounds_used = mr_round;

  res.outputs.assign(g.n(), {});
  std::vector<std::vector<std::pair<Word, const KVTuple*>>> parts(g.n());
  for (const auto& t : fin.tuples)
    if (tag_of(t) == tag::kOut) parts[node_of(t) - 1].emplace_back(t.v[1], &t);
  for (std::size_t u = 0; u < g.n(); ++u) {
    std::sort(parts[u].begin(), parts[u].end());
    auto& out = res.outputs[u];
    for (auto [idx, t] : parts[u])
      for (std::size_t j = 0; j < 3; ++j) out.push_back(t->v[3 + j]);
    if (!parts[u].empty()) out.resize(parts[u].front().second->v[2]);
  }
  for (const auto& m : res.metrics) res.peak_words = std::max(res.peak_words, m.peak_words);
  return res;
}

EquivalenceReport compare_backends(const CCResult& cc, const SimResult& mr) {
  EquivalenceReport rep;
  auto diverge = [&](Round r, NodeId u, std::string why) {
    if (!rep.match) return;
    rep.match = false;
    rep.first_divergence = std::make_pair(r, u);
    rep.detail = std::move(why);
  };
  if (!cc.memory_trace.empty() && !mr.memory_trace.empty()) {
    const std::size_t rounds = std::min(cc.memory_trace.size(), mr.memory_trace.size());
    for (std::size_t r = 0; r < rounds && rep.match; ++r) {
      const auto& a = cc.memory_trace[r];
      const auto& b = mr.memory_trace[r];
      for (std::size_t u = 0; u < std::min(a.size(), b.size()); ++u)
        if (a[u] != b[u]) {
          diverge(static_cast<Round>(r + 1), static_cast<NodeId>(u + 1), "node memory differs");
          break;
        }
    }
  }
  if (cc.rounds_used != mr.cc_rounds) {
    diverge(std::min<Round>(cc.rounds_used, mr.cc_rounds), 0,
            "clique rounds " + std::to_string(cc.rounds_used) + " vs simulated " + std::to_string(mr.cc_rounds));
  }
  for (std::size_t u = 0; u < std::min(cc.outputs.size(), mr.outputs.size()); ++u)
    if (cc.outputs[u] != mr.outputs[u]) {
      diverge(cc.rounds_used, static_cast<NodeId>(u + 1), "node output differs");
      break;
    }
  if (cc.outputs.size() != mr.outputs.size()) diverge(0, 0, "output count differs");
  return rep;
}

}  // namespace cliquemr
