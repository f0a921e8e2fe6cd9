#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cliquemr/graph.hpp"
#include "cliquemr/rng.hpp"
#include "cliquemr/types.hpp"

namespace cliquemr {

struct CCConfig {
  /// Maximum payload words of a single message (direct, routed or broadcast).
  std::size_t msg_word_budget = 4;
  Round max_rounds = 100000;
  /// Simulated rounds charged per Lenzen routing invocation (R_route).
  Round route_rounds = 2;
  /// Per-node source/sink capacity of one routing invocation, in units of n words.
  double route_capacity_factor = 4.0;
  /// Ceiling on ops a node may charge in one round; 0 disables the ceiling.
  std::uint64_t max_local_ops = 0;
  unsigned threads = 1;
  /// Record every node's memory after every round (needed for cross-backend checks).
  bool trace_memory = false;

  std::size_t route_capacity_words(std::size_t n) const {
    return static_cast<std::size_t>(route_capacity_factor * static_cast<double>(n));
  }
};

/// One unit of clique communication.
struct WordMessage {
  NodeId src = 0;
  NodeId dst = 0;
  std::vector<Word> payload;
  Round round = 0;
  bool is_broadcast = false;
  bool routed = false;
  /// Position among the messages src addressed to dst this round.
  std::uint32_t seq = 0;
};

struct Received {
  NodeId src = 0;
  std::uint32_t seq = 0;
  bool broadcast = false;
  std::vector<Word> payload;

  auto operator<=>(const Received&) const = default;
};

/// Messages visible to a node in the current round, ordered by (src, seq).
class Inbox {
 public:
  Inbox() = default;
  explicit Inbox(std::vector<Received> items);

  std::span<const Received> all() const { return items_; }
  bool empty() const { return items_.empty(); }
  /// Concatenated payloads from `src` in seq order.
  std::vector<Word> stream_from(NodeId src) const;
  /// Distinct senders, ascending.
  std::vector<NodeId> senders() const;
  std::size_t words() const;

 private:
  std::vector<Received> items_;
};

/// Everything a node emitted during one local computation.
struct Outbox {
  std::vector<WordMessage> messages;
  std::optional<std::vector<Word>> broadcast;
  bool halted = false;
  std::uint64_t ops = 0;

  bool any_routed() const;
};

/// Per-round view handed to a node's step function.
class NodeContext {
 public:
  NodeContext(NodeId id, std::size_t n, Round round, std::vector<Word>& memory, const Inbox& inbox,
              SplitMix64 rng, const CCConfig& config);

  NodeId id() const { return id_; }
  std::size_t n() const { return n_; }
  Round round() const { return round_; }
  std::vector<Word>& memory() { return memory_; }
  const Inbox& inbox() const { return inbox_; }
  SplitMix64& rng() { return rng_; }
  const CCConfig& config() const { return config_; }

  /// Direct clique message, delivered next round. At most one per destination.
  void send(NodeId dst, std::vector<Word> payload);
  /// Same payload to every other node.
  void broadcast(std::vector<Word> payload);
  /// Message handed to the Lenzen routing primitive.
  void route(NodeId dst, std::vector<Word> payload);
  /// Routes an arbitrary-length word stream as budget-sized chunks.
  void route_stream(NodeId dst, std::span<const Word> words);
  void halt() { out_.halted = true; }
  /// Accounts local work against config.max_local_ops.
  void charge(std::uint64_t ops);

  Outbox take_outbox() { return std::move(out_); }

 private:
  std::uint32_t next_seq(NodeId dst);

  NodeId id_;
  std::size_t n_;
  Round round_;
  std::vector<Word>& memory_;
  const Inbox& inbox_;
  SplitMix64 rng_;
  const CCConfig& config_;
  Outbox out_;
  std::map<NodeId, std::uint32_t> seq_;
};

/// A Congested Clique algorithm. `step` must be a pure function of the
/// context (memory, inbox, rng stream, round): both engines rely on this.
class CCProgram {
 public:
  virtual ~CCProgram() = default;
  virtual std::string name() const = 0;
  virtual void step(NodeContext& ctx) const = 0;
  /// Per-node result, decoded from the node's memory once it has halted.
  virtual std::vector<Word> output(std::span<const Word> memory) const = 0;
};

/// Initial memory of a node: [degree, sorted neighbor IDs...].
std::vector<Word> initial_memory(const Graph& g, NodeId u);
std::vector<Word> initial_memory(std::span<const NodeId> sorted_neighbors);

struct RoundProfile {
  Round round = 0;
  std::uint64_t sum_inbox = 0;        ///< non-broadcast words received
  std::uint64_t sum_memory = 0;       ///< words held by nodes that computed
  std::uint64_t max_node_memory = 0;  ///< largest single-node footprint
  std::uint64_t broadcasts = 0;
  std::uint64_t max_ops = 0;          ///< largest per-node charged op count
};

struct LightweightProfile {
  std::vector<RoundProfile> rounds;
};

std::string profile_jsonl(const LightweightProfile& profile);

struct CCResult {
  std::vector<std::vector<Word>> outputs;  ///< index id-1
  Round rounds_used = 0;
  LightweightProfile profile;
  std::vector<std::vector<Word>> final_memory;
  /// trace[r-1][u-1] = memory of u after round r (only when tracing).
  std::vector<std::vector<std::vector<Word>>> memory_trace;
  std::vector<Round> halt_round;
  std::uint64_t delivered_words = 0;
};

CCResult run_cc(const CCProgram& program, const Graph& g, std::uint64_t seed, const CCConfig& config = {});

/// Checks one node's outbox against the clique rules; throws EngineFault.
void validate_outbox(NodeId src, const Outbox& out, std::size_t n, Round round, const CCConfig& config);

struct RouteRequest {
  NodeId src = 0;
  NodeId dst = 0;
  std::vector<Word> payload;
};

struct RouteResult {
  std::map<NodeId, std::vector<Received>> delivered;
  Round rounds = 0;
};

/// Validates capacities (sink first, then source; counted in payload words)
/// and delivers every request. Costs config.route_rounds rounds.
RouteResult lenzen_route(std::span<const RouteRequest> batch, std::size_t n, const CCConfig& config);

/// Shared capacity check; throws EngineFault naming the offending node.
void check_route_capacity(std::span<const WordMessage> batch, std::size_t n, const CCConfig& config);

struct LightweightConstants {
  double c_k = 1.0;
  double c_n = 1.0;
};

struct LightweightReport {
  bool pass = true;
  std::optional<Round> first_violation;
  std::string reason;
};

LightweightReport check_lightweight(const LightweightProfile& profile, double k, double n_bound,
                                    const LightweightConstants& constants);

}  // namespace cliquemr
