#include "cliquemr/cc_engine.hpp"

#include <algorithm>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cliquemr {

Inbox::Inbox(std::vector<Received> items) : items_(std::move(items)) {
  std::sort(items_.begin(), items_.end(),
            [](const Received& a, const Received& b) { return std::tie(a.src, a.seq) < std::tie(b.src, b.seq); });
}

std::vector<Word> Inbox::stream_from(NodeId src) const {
  std::vector<Word> out;
  auto lo = std::lower_bound(items_.begin(), items_.end(), src,
                             [](const Received& r, NodeId s) { return r.src < s; });
  for (auto it = lo; it != items_.end() && it->src == src; ++it)
    out.insert(out.end(), it->payload.begin(), it->payload.end());
  return out;
}

std::vector<NodeId> Inbox::senders() const {
  std::vector<NodeId> out;
  for (const auto& r : items_)
    if (out.empty() || out.back() != r.src) out.push_back(r.src);
  return out;
}

std::size_t Inbox::words() const {
  std::size_t w = 0;
  for (const auto& r : items_) w += r.payload.size();
  return w;
}

bool Outbox::any_routed() const {
  return std::any_of(messages.begin(), messages.end(), [](const WordMessage& m) { return m.routed; });
}

NodeContext::NodeContext(NodeId id, std::size_t n, Round round, std::vector<Word>& memory, const Inbox& inbox,
                         SplitMix64 rng, const CCConfig& config)
    : id_(id), n_(n), round_(round), memory_(memory), inbox_(inbox), rng_(rng), config_(config) {}

std::uint32_t NodeContext::next_seq(NodeId dst) { return seq_[dst]++; }

void NodeContext::send(NodeId dst, std::vector<Word> payload) {
  WordMessage m{id_, dst, std::move(payload), round_, false, false, next_seq(dst)};
  out_.messages.push_back(std::move(m));
}

void NodeContext::broadcast(std::vector<Word> payload) {
  if (out_.broadcast) {
    throw EngineFault("node " + std::to_string(id_) + " broadcast twice in round " + std::to_string(round_));
  }
  out_.broadcast = std::move(payload);
}

void NodeContext::route(NodeId dst, std::vector<Word> payload) {
  WordMessage m{id_, dst, std::move(payload), round_, false, true, next_seq(dst)};
  out_.messages.push_back(std::move(m));
}

void NodeContext::route_stream(NodeId dst, std::span<const Word> words) {
  const std::size_t chunk = config_.msg_word_budget;
  for (std::size_t i = 0; i < words.size(); i += chunk) {
    auto end = std::min(words.size(), i + chunk);
    route(dst, std::vector<Word>(words.begin() + i, words.begin() + end));
  }
}

void NodeContext::charge(std::uint64_t ops) {
  out_.ops += ops;
  if (config_.max_local_ops != 0 && out_.ops > config_.max_local_ops) {
    throw EngineFault("node " + std::to_string(id_) + " exceeded local op ceiling in round " +
                      std::to_string(round_));
  }
}

std::vector<Word> initial_memory(std::span<const NodeId> sorted_neighbors) {
  std::vector<Word> mem;
  mem.reserve(sorted_neighbors.size() + 1);
  mem.push_back(sorted_neighbors.size());
  for (NodeId v : sorted_neighbors) mem.push_back(v);
  return mem;
}

std::vector<Word> initial_memory(const Graph& g, NodeId u) { return initial_memory(g.neighbors(u)); }

std::string profile_jsonl(const LightweightProfile& profile) {
  std::ostringstream out;
  for (const auto& r : profile.rounds) {
    nlohmann::json j{{"round", r.round},
                     {"sum_inbox", r.sum_inbox},
                     {"sum_memory", r.sum_memory},
                     {"max_node_memory", r.max_node_memory},
                     {"broadcasts", r.broadcasts}};
    out << j.dump() << '\n';
  }
  return out.str();
}

void validate_outbox(NodeId src, const Outbox& out, std::size_t n, Round round, const CCConfig& config) {
  auto where = [&] { return " (node " + std::to_string(src) + ", round " + std::to_string(round) + ")"; };
  std::set<NodeId> direct;
  for (const auto& m : out.messages) {
    if (m.dst < 1 || m.dst > n) throw EngineFault("message to nonexistent node " + std::to_string(m.dst) + where());
    if (m.dst == src) throw EngineFault("message addressed to self" + where());
    if (m.payload.size() > config.msg_word_budget) {
      throw EngineFault("message of " + std::to_string(m.payload.size()) + " words exceeds budget of " +
                        std::to_string(config.msg_word_budget) + where());
    }
    if (!m.routed && !direct.insert(m.dst).second) {
      throw EngineFault("two messages from " + std::to_string(src) + " to " + std::to_string(m.dst) +
                        " in one round" + where());
    }
  }
  if (out.broadcast) {
    if (out.broadcast->size() > config.msg_word_budget) throw EngineFault("broadcast exceeds word budget" + where());
    if (!out.messages.empty()) throw EngineFault("node broadcast and unicast in the same round" + where());
  }
}

void check_route_capacity(std::span<const WordMessage> batch, std::size_t n, const CCConfig& config) {
  const std::size_t cap = config.route_capacity_words(n);
  std::map<NodeId, std::size_t> sink, source;
  for (const auto& m : batch) {
    sink[m.dst] += m.payload.size();
    source[m.src] += m.payload.size();
  }
  for (auto [node, words] : sink) {
    if (words > cap) {
      throw EngineFault("routing sink-capacity exceeded at node " + std::to_string(node) + ": " +
                        std::to_string(words) + " words > " + std::to_string(cap));
    }
  }
  for (auto [node, words] : source) {
    if (words > cap) {
      throw EngineFault("routing source-capacity exceeded at node " + std::to_string(node) + ": " +
                        std::to_string(words) + " words > " + std::to_string(cap));
    }
  }
}

RouteResult lenzen_route(std::span<const RouteRequest> batch, std::size_t n, const CCConfig& config) {
  std::vector<WordMessage> msgs;
  msgs.reserve(batch.size());
  std::map<std::pair<NodeId, NodeId>, std::uint32_t> seq;
  for (const auto& r : batch) {
    if (r.src < 1 || r.src > n || r.dst < 1 || r.dst > n) throw EngineFault("routing request with node out of range");
    if (r.src == r.dst) throw EngineFault("routing request from node " + std::to_string(r.src) + " to itself");
    if (r.payload.size() > config.msg_word_budget) throw EngineFault("routing payload exceeds word budget");
    msgs.push_back(WordMessage{r.src, r.dst, r.payload, 0, false, true, seq[{r.src, r.dst}]++});
  }
  check_route_capacity(msgs, n, config);
  RouteResult result;
  result.rounds = config.route_rounds;
  for (auto& m : msgs) result.delivered[m.dst].push_back(Received{m.src, m.seq, false, std::move(m.payload)});
  for (auto& [dst, items] : result.delivered) {
    std::sort(items.begin(), items.end(),
              [](const Received& a, const Received& b) { return std::tie(a.src, a.seq) < std::tie(b.src, b.seq); });
  }
  return result;
}

namespace {

template <typename Fn>
void for_each_node(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned t = std::min<unsigned>(threads, static_cast<unsigned>(n));
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < t; ++k) {
    pool.emplace_back([&, k] {
      for (std::size_t i = k; i < n; i += t) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  // Lowest node index wins so faults are reported identically to serial runs.
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

CCResult run_cc(const CCProgram& program, const Graph& g, std::uint64_t seed, const CCConfig& config) {
  const std::size_t n = g.n();
  std::vector<std::vector<Word>> memory(n);
  for (NodeId u = 1; u <= n; ++u) memory[u - 1] = initial_memory(g, u);
  std::vector<Inbox> inbox(n);
  std::vector<char> halted(n, 0);
  std::vector<std::vector<Received>> pending(n);
  Round deliver_at = 1;

  CCResult result;
  result.halt_round.assign(n, 0);
  std::size_t live = n;

  for (Round r = 1;; ++r) {
    if (r > config.max_rounds) {
      throw EngineFault(program.name() + ": round limit " + std::to_string(config.max_rounds) + " exceeded");
    }
    RoundProfile prof;
    prof.round = r;
    if (r < deliver_at) {
      // Routing in flight: no node computes this round.
      result.profile.rounds.push_back(prof);
      if (config.trace_memory) result.memory_trace.push_back(memory);
      continue;
    }
    for (std::size_t i = 0; i < n; ++i) {
      inbox[i] = Inbox(std::move(pending[i]));
      pending[i].clear();
    }

    std::vector<Outbox> outs(n);
    for_each_node(n, config.threads, [&](std::size_t i) {
      if (halted[i]) return;
      const NodeId u = static_cast<NodeId>(i + 1);
      NodeContext ctx(u, n, r, memory[i], inbox[i], node_stream(seed, u, r), config);
      program.step(ctx);
      outs[i] = ctx.take_outbox();
    });

    std::vector<WordMessage> sent;
    bool routed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (halted[i]) continue;
      const NodeId u = static_cast<NodeId>(i + 1);
      validate_outbox(u, outs[i], n, r, config);
      prof.sum_memory += memory[i].size();
      prof.max_node_memory = std::max<std::uint64_t>(prof.max_node_memory, memory[i].size());
      prof.max_ops = std::max(prof.max_ops, outs[i].ops);
      routed = routed || outs[i].any_routed();
      for (auto& m : outs[i].messages) sent.push_back(std::move(m));
      if (outs[i].broadcast) {
        ++prof.broadcasts;
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) pending[j].push_back(Received{u, 0, true, *outs[i].broadcast});
      }
      if (outs[i].halted) {
        halted[i] = 1;
        result.halt_round[i] = r;
        --live;
      }
    }
    if (routed) check_route_capacity(sent, n, config);
    for (auto& m : sent) {
      prof.sum_inbox += m.payload.size();
      result.delivered_words += m.payload.size();
      pending[m.dst - 1].push_back(Received{m.src, m.seq, false, std::move(m.payload)});
    }
    deliver_at = routed ? r + config.route_rounds : r + 1;
    result.profile.rounds.push_back(prof);
    if (config.trace_memory) result.memory_trace.push_back(memory);
    if (live == 0) {
      result.rounds_used = r;
      break;
    }
  }

  result.outputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.outputs[i] = program.output(memory[i]);
  result.final_memory = std::move(memory);
  return result;
}

LightweightReport check_lightweight(const LightweightProfile& profile, double k, double n_bound,
                                    const LightweightConstants& constants) {
  LightweightReport report;
  for (const auto& r : profile.rounds) {
    const double total = static_cast<double>(r.sum_inbox + r.sum_memory);
    if (total > constants.c_k * k) {
      report.pass = false;
      report.first_violation = r.round;
      report.reason = "round " + std::to_string(r.round) + ": inbox+memory " + std::to_string(r.sum_inbox + r.sum_memory) +
                      " words > C_K*K";
      return report;
    }
    if (static_cast<double>(r.max_node_memory) > constants.c_n * n_bound) {
      report.pass = false;
      report.first_violation = r.round;
      report.reason = "round " + std::to_string(r.round) + ": node memory " + std::to_string(r.max_node_memory) +
                      " words > C_N*N";
      return report;
    }
  }
  return report;
}

}  // namespace cliquemr
