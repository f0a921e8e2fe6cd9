#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cliquemr/cc_engine.hpp"
#include "cliquemr/graph.hpp"
#include "cliquemr/mr_engine.hpp"

namespace cliquemr {

/// Contiguous assignment of nodes to reducers. part[u-1] in {1..parts()}.
struct PartitionFunction {
  std::size_t round = 0;
  std::vector<std::size_t> part;
  std::vector<std::size_t> part_load;  ///< index part-1

  std::size_t parts() const { return part_load.size(); }
};

/// Greedy recurrence: node x joins the current part iff the part stays within
/// `eta`, otherwise it opens the next part. Throws EngineFault when a single
/// load exceeds eta or more than `max_parts` parts are needed.
PartitionFunction compute_partition(std::span<const std::size_t> loads, std::size_t eta,
                                    std::optional<std::size_t> max_parts = std::nullopt);

/// Tuple kinds. Word 0 of every simulation value is (tag << 56) | node.
namespace tag {
enum : Word {
  kNode = 1,  // [u]
  kNodeR,     // [u, F(u)]
  kEdge,      // [owner, other]
  kEdgeR,     // [owner, F(owner), other]
  kPartialDegree,  // [u, d]
  kDegree,         // [u, deg]
  kMeta,           // [v, F(v)]
  kState,          // [u, i<<32|addr, w, w, w]
  kStateR,         // [u, F(u), i<<32|addr, w, w, w]
  kStatus,         // [u, i, halted, memsize]
  kStatusR,        // [u, F(u), i, halted, memsize]
  kMsg,            // [src, dst, seq<<16|part<<8|len, w, w]
  kMsgR,           // [src, F(dst), dst, meta, w, w]
  kBcast,          // [src, len, w, w, w, w]
  kBcastR,         // same shape, still to be expanded
  kSize,           // [u, s_u, flags]
  kCount,          // [v, c]
  kAgg,            // [u, |M_u|]
  kWait,           // [0, remaining]
  kDone,           // [0]
  kOut,            // [u, index, total_len, w, w, w]
};
}

inline Word tag_word(Word t, Word node) { return (t << 56) | node; }
inline Word tag_of(const KVTuple& t) { return t.vlen ? (t.v[0] >> 56) : 0; }
inline NodeId node_of(const KVTuple& t) { return static_cast<NodeId>(t.v[0] & 0xFFFFFFFFULL); }

struct SimConfig {
  MRConfig mr;
  CCConfig cc;
  /// Record node memories after every simulated round.
  bool trace = false;
  /// Extra attempts for the randomized balancing of the first rounds.
  unsigned init_retries = 3;
};

SimConfig sim_config_for(const Graph& g, double eps, std::optional<double> c = std::nullopt, CCConfig cc = {},
                         double c_eta = 64.0);

/// Words every reducer may hold on top of its partition share (replicated
/// partition metadata, sizes, counts and broadcast copies).
std::size_t replicated_reserve(std::size_t n, std::size_t n_r);
/// Load a partition part may take: eta minus the reserve.
std::size_t partition_budget(const MRConfig& mr);

/// NODE [u] and EDGE [u, v] (u < v) tuples, keyed by u.
std::vector<KVTuple> graph_to_tuples(const Graph& g);

/// Strips routing prefixes and expands pending broadcasts into one copy per
/// reducer. Runs as the map phase of every round after the third.
void delivery_map(const KVTuple& t, MapEmitter& out, std::size_t n_r);

struct InitResult {
  std::vector<KVTuple> tuples;  ///< after three full rounds; the next map positions them
  std::vector<RoundMetrics> metrics;
  PartitionFunction f0;
  unsigned attempts = 0;
};

/// Degrees and F0 in three MR rounds; the fourth round's map (delivery_map)
/// completes the stage.
InitResult init_stage(const Graph& g, const SimConfig& config, std::uint64_t seed);

struct SimRoundResult {
  std::vector<KVTuple> tuples;
  std::vector<RoundMetrics> metrics;
  bool done = false;
  PartitionFunction partition;
  std::vector<std::vector<Word>> memory;  ///< node memories after the local step
};

/// One clique round as three MR rounds. `first_mr_round` numbers the rounds.
SimRoundResult simulate_round(Round i, std::span<const KVTuple> carried, const CCProgram& program,
                              const SimConfig& config, std::uint64_t seed, std::size_t first_mr_round);

struct SimResult {
  std::vector<std::vector<Word>> outputs;
  std::size_t mr_rounds_used = 0;
  Round cc_rounds = 0;
  std::vector<RoundMetrics> metrics;
  std::vector<std::vector<std::vector<Word>>> memory_trace;
  std::vector<std::vector<Word>> final_memory;
  std::size_t peak_words = 0;
  std::size_t max_parts = 0;
};

SimResult simulate(const CCProgram& program, const Graph& g, const SimConfig& config, std::uint64_t seed);

/// Node memories reconstructed from STATE/STATUS tuples.
std::vector<std::vector<Word>> memories_from_tuples(std::span<const KVTuple> tuples, std::size_t n);

struct EquivalenceReport {
  bool match = true;
  std::optional<std::pair<Round, NodeId>> first_divergence;
  std::string detail;
};

/// Compares round counts, per-round memories (when both traced) and outputs.
EquivalenceReport compare_backends(const CCResult& cc, const SimResult& mr);

}  // namespace cliquemr
