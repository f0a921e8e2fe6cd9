#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cliquemr/cc_engine.hpp"
#include "cliquemr/graph.hpp"
#include "cliquemr/lowdeg.hpp"
#include "cliquemr/mr_engine.hpp"
#include "cliquemr/simulation.hpp"

namespace cliquemr {

/// Measured constants for the lightweight check of HighDegCol:
/// per-round inbox+memory <= kLightK * |E| and node memory <= kLightN * n.
inline constexpr double kLightK = 8.0;
inline constexpr double kLightN = 4.0;

struct RunOptions {
  std::string alg = "highdeg";  ///< highdeg | lowdeg | auto
  std::string backend = "cc";   ///< cc | mr | both
  std::size_t n = 256;
  double p = 0.5;
  std::uint64_t seed = 1;
  std::optional<std::size_t> max_degree;  ///< generator degree cap
  std::size_t beta = 0;
  double eps = 0.0;
  std::optional<double> c;
  Round routing_rounds = 2;
  unsigned threads = 1;
  bool check_lightweight = false;
  LowDegParams lowdeg;
  std::optional<Graph> graph;  ///< use instead of generating
};

struct RunReport {
  std::string backend;
  std::string algorithm;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t delta = 0;
  std::size_t beta = 0;
  double eps = 0.0;
  double c = 0.0;
  std::uint64_t seed = 0;
  Round rounds = 0;
  std::size_t mr_rounds = 0;
  std::size_t trials = 0;
  std::size_t residual_restarts = 0;
  std::size_t colors_used = 0;
  std::size_t residual_edges = 0;
  std::size_t max_group_neighbors = 0;
  std::size_t max_in_group_degree = 0;
  std::size_t uncolored = 0;
  std::size_t components = 0;
  std::size_t max_component = 0;
  std::size_t merge_phases = 0;
  std::size_t peak_reducer_words = 0;
  std::size_t eta = 0;
  std::size_t machines = 0;
  bool proper = false;
  bool lightweight = false;
  std::string lightweight_detail;
  std::string equivalence = "n/a";  ///< match | mismatch | n/a
  std::string equivalence_detail;
};

struct RunArtifacts {
  RunReport report;
  Coloring coloring;
  LightweightProfile profile;
  std::vector<RoundMetrics> mr_metrics;
};

/// Runs the selected algorithm on the selected backend(s) and re-checks the
/// coloring independently. Throws EngineFault / CheckFailed /
/// std::invalid_argument; artifacts are still filled where possible.
RunArtifacts run_pipeline(const RunOptions& options);

/// "highdeg" or "lowdeg"; auto takes the low-degree path iff delta <= beta^4.
std::string resolve_algorithm(const std::string& alg, std::size_t n, std::size_t delta, std::size_t beta);

std::string report_json(const RunReport& r);

/// Fixed CSV columns for sweeps.
std::string sweep_csv_header();
std::string sweep_csv_row(const RunReport& r, const std::string& status);
/// Summary row with means of the numeric columns over successful runs.
std::string sweep_csv_summary(const std::vector<RunReport>& ok);

}  // namespace cliquemr
