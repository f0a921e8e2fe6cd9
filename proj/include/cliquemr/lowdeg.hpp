#pragma once

#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "cliquemr/cc_engine.hpp"
#include "cliquemr/graph.hpp"

namespace cliquemr {

/// ceil(2 * log2 log2 n), at least 1.
std::size_t default_iterations(std::size_t n);
/// ceil(log2 n)^3.
std::size_t default_component_cap(std::size_t n);

/// Bits of the random string consumed per iteration: ceil(log2(delta+1)), at least 1.
std::size_t rs_bits_per_iteration(std::size_t delta);
std::size_t rs_word_count(std::size_t iterations, std::size_t delta);
/// Node u's random string. Drawn from u's round-2 stream, exactly as the
/// clique program does it.
std::vector<Word> draw_rs(std::uint64_t seed, NodeId u, std::size_t iterations, std::size_t delta);
std::vector<std::vector<Word>> draw_all_rs(const Graph& g, std::uint64_t seed, std::size_t iterations);
/// Bits [iteration*bits, (iteration+1)*bits) of rs as an integer. Throws
/// EngineFault when rs is too short.
Word rs_draw(std::span<const Word> rs, std::size_t iteration, std::size_t bits);

struct PaletteState {
  std::size_t delta = 0;
  std::vector<std::vector<Color>> palette;  ///< sorted, index id-1
  std::vector<Color> color;                 ///< 0 = uncolored

  static PaletteState initial(std::size_t n, std::size_t delta);
  bool colored(NodeId u) const { return color[u - 1] != 0; }
  std::vector<NodeId> uncolored() const;
};

/// One trial-color / keep-if-unconflicted iteration driven by the RS bits of
/// iteration `iteration` (0-based).
PaletteState rand_col_step_global(const PaletteState& state, const Graph& g, const std::vector<std::vector<Word>>& rs,
                                  std::size_t iteration);
PaletteState rand_col_global(const Graph& g, const std::vector<std::vector<Word>>& rs, std::size_t iterations);

struct BallMember {
  NodeId id = 0;
  std::vector<NodeId> adj;  ///< full adjacency, including nodes outside the ball
  std::vector<Word> rs;

  bool operator==(const BallMember&) const = default;
};

struct LabeledBall {
  NodeId center = 0;
  std::size_t radius = 0;
  std::vector<BallMember> members;  ///< sorted by id

  std::vector<NodeId> ids() const;
  const BallMember* find(NodeId id) const;
};

struct ReplayResult {
  Color color = 0;
  std::vector<Color> palette;
};

/// Runs `iterations` RandColStep iterations on the ball's induced subgraph
/// and returns the center's state. Exact once radius >= 2 * iterations.
ReplayResult replay_locally(const LabeledBall& ball, std::size_t iterations, std::size_t delta);

struct LowDegParams {
  /// RandColStep iterations T; 0 selects default_iterations(n).
  std::size_t iterations = 0;
  /// Ball radius gathered before replay; -1 selects T. Replay is exact from
  /// 2*T on; thinner balls can leave conflicts, which are settled afterwards.
  long gather_radius = -1;
  /// Largest uncolored component shipped to one node; 0 selects default_component_cap(n).
  std::size_t component_cap = 0;
  std::size_t max_phases = 64;
  /// Fault when delta^(2t+3) > guard * n at a doubling step; 0 disables.
  double volume_guard = 0.0;
  /// Halt right after gathering (used to inspect balls).
  bool gather_only = false;
};

/// Algorithm LowDegCol as a clique program. Node output is [color], or the
/// gathered ball in gather-only mode.
class LowDegProgram final : public CCProgram {
 public:
  explicit LowDegProgram(LowDegParams params = {}) : params_(params) {}
  std::string name() const override { return "lowdeg"; }
  void step(NodeContext& ctx) const override;
  std::vector<Word> output(std::span<const Word> memory) const override;

  const LowDegParams& params() const { return params_; }

 private:
  LowDegParams params_;
};

/// Route capacity for desk-scale ball gathering: 4n^2 words per node.
CCConfig lowdeg_cc_config(std::size_t n, CCConfig base = {});

struct GatherResult {
  std::vector<LabeledBall> balls;
  Round rounds = 0;
};

/// Runs the program's gathering phase on the clique engine.
GatherResult gather_balls(const Graph& g, std::size_t radius, std::uint64_t seed, std::size_t iterations,
                          CCConfig config);

struct ClusterPartition {
  std::size_t phases = 0;
  std::vector<NodeId> cluster;   ///< index id-1, cluster id = smallest member
  std::vector<NodeId> fragment;  ///< weight-1 connected piece, id = smallest member
  /// Spanning forest edges (a, b, weight) with a < b.
  std::vector<std::tuple<NodeId, NodeId, Word>> tree;
  /// Smallest cluster size before phase 1 and after every phase.
  std::vector<std::size_t> min_size_history;
  /// True when the last phase found no weight-1 edge between fragments.
  bool stable = false;

  std::vector<std::vector<NodeId>> clusters() const;
  /// Uncolored pieces to ship: fragments restricted to `in_u`, by smallest member.
  std::vector<std::vector<NodeId>> components(const std::vector<char>& in_u) const;
};

/// A weight-1 edge offered by cluster `cluster`, ending in fragment `target`.
struct MergeCandidate {
  NodeId cluster = 0;
  NodeId target = 0;
  NodeId a = 0;  ///< smaller endpoint
  NodeId b = 0;

  auto operator<=>(const MergeCandidate&) const = default;
};

/// Best weight-1 edge per (cluster, target fragment), computed centrally.
std::vector<MergeCandidate> weight1_candidates(const Graph& g, const std::vector<char>& in_u,
                                               const ClusterPartition& part);

/// Applies one merge phase given the per-cluster weight-1 choices. Each
/// cluster X keeps every weight-1 choice and fills up to |X| distinct other
/// clusters with weight-n edges between leaders; the union is then merged
/// in (weight, smaller endpoint, larger endpoint) order.
void merge_phase(ClusterPartition& part, const std::vector<MergeCandidate>& candidates, std::size_t n);

ClusterPartition initial_partition(std::size_t n);

/// Runs merge phases until no weight-1 edge joins two fragments (or
/// max_phases). Weight w(u,v) = 1 iff {u,v} is an edge with both ends uncolored.
ClusterPartition cluster_merge(const Graph& g, const std::vector<char>& in_u, std::size_t max_phases);

/// Colors every uncolored component from its members' palettes, greedily by
/// ascending ID. Throws EngineFault when a component exceeds `cap`.
Coloring ship_and_color_components(const Graph& g, const ClusterPartition& part, const PaletteState& state,
                                   std::size_t cap);

struct LowDegStats {
  std::size_t iterations = 0;
  std::size_t radius = 0;
  std::size_t delta = 0;
  std::size_t uncolored = 0;
  std::size_t phases = 0;
  std::size_t components = 0;
  std::size_t max_component = 0;
  std::vector<std::size_t> min_size_history;
  std::vector<NodeId> cluster;  ///< final partition
  std::vector<NodeId> uncolored_nodes;
};

LowDegStats lowdeg_stats(const std::vector<std::vector<Word>>& final_memory);

/// Decodes the ball a node gathered (gather-only runs).
LabeledBall ball_from_output(NodeId center, std::span<const Word> output);

}  // namespace cliquemr
