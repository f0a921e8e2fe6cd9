#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cliquemr/cc_engine.hpp"
#include "cliquemr/graph.hpp"

namespace cliquemr {

/// ceil(log2 n), at least 1. Stands in for "log n" in every threshold.
std::size_t default_beta(std::size_t n);

struct HighDegParams {
  /// Group width; 0 selects default_beta(n).
  std::size_t beta = 0;
  /// Largest number of not-good groups accepted by a trial; 0 selects 2*beta.
  std::size_t trial_threshold = 0;
  /// Residual edge cap; 0 selects 100 * n * beta^4 / Delta.
  double residual_cap = 0.0;
};

/// One node's contribution to the group census at node 1.
struct GroupDegreeReport {
  NodeId node = 0;
  std::size_t group = 0;  ///< 1-based
  std::size_t in_group_degree = 0;
};

struct GroupReport {
  std::size_t n = 0;
  std::vector<std::size_t> node_count;  ///< index group-1
  std::vector<std::size_t> edge_count;
  std::vector<std::size_t> max_degree;  ///< max in-group degree, i.e. Delta(G_k)
  std::vector<char> good;

  std::size_t groups() const { return node_count.size(); }
  std::size_t bad_count() const;
};

/// Edge count of G_k is half the in-group degree sum; good iff edges <= n.
/// Throws EngineFault on an odd sum or a node reported twice.
GroupReport classify_groups(std::span<const GroupDegreeReport> reports, std::size_t groups, std::size_t n);

/// True iff at most 2*beta groups are not good.
bool trial_succeeded(std::size_t bad_count, std::size_t beta);

/// Greedy by ascending original ID; colors lie in [base+1, base+Delta(sub)+1].
/// `labels[i]` is the original ID of sub-node i+1.
Coloring color_subgraph_greedy(const Graph& sub, std::span<const NodeId> labels, Color palette_base);
Coloring color_subgraph_greedy(const Graph& g, const std::vector<NodeId>& nodes, Color palette_base);

/// Colors G[residual] from a fresh palette starting after `palette_base`.
/// Returns nullopt when the residual has more than `cap` edges (the caller
/// restarts the trial loop).
std::optional<Coloring> residual_collect_and_color(const Graph& g, const std::vector<NodeId>& residual,
                                                   Color palette_base, double cap);

/// Algorithm HighDegCol as a clique program. Node output is [color].
class HighDegProgram final : public CCProgram {
 public:
  explicit HighDegProgram(HighDegParams params = {}) : params_(params) {}
  std::string name() const override { return "highdeg"; }
  void step(NodeContext& ctx) const override;
  std::vector<Word> output(std::span<const Word> memory) const override;

  const HighDegParams& params() const { return params_; }

 private:
  HighDegParams params_;
};

/// Quantities read back from the final node memories of a HighDegCol run.
struct HighDegStats {
  std::size_t beta = 0;
  std::size_t delta = 0;
  std::size_t groups = 0;
  std::size_t trials = 0;             ///< while-loop iterations, including residual restarts
  std::size_t residual_restarts = 0;
  std::size_t bad_groups = 0;         ///< in the accepted trial
  std::size_t residual_nodes = 0;
  std::size_t residual_edges = 0;
  std::size_t max_group_neighbors = 0;  ///< max over nodes and groups, all trials
  std::size_t max_in_group_degree = 0;  ///< accepted trial
};

HighDegStats highdeg_stats(const std::vector<std::vector<Word>>& final_memory);

Coloring coloring_from_outputs(const std::vector<std::vector<Word>>& outputs);

}  // namespace cliquemr
