#include "cliquemr/runner.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "cliquemr/highdeg.hpp"
#include "json.hpp"

namespace cliquemr {

namespace {

std::size_t pow4(std::size_t b) {
  const double v = std::pow(static_cast<double>(b), 4.0);
  return v > 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(v);
}

void fill_highdeg(RunReport& r, const std::vector<std::vector<Word>>& final_memory) {
  const auto st = highdeg_stats(final_memory);
  r.trials = st.trials;
  r.residual_restarts = st.residual_restarts;
  r.residual_edges = st.residual_edges;
  r.max_group_neighbors = st.max_group_neighbors;
  r.max_in_group_degree = st.max_in_group_degree;
}

void fill_lowdeg(RunReport& r, const std::vector<std::vector<Word>>& final_memory) {
  const auto st = lowdeg_stats(final_memory);
  r.uncolored = st.uncolored;
  r.components = st.components;
  r.max_component = st.max_component;
  r.merge_phases = st.phases;
}

}  // namespace

std::string resolve_algorithm(const std::string& alg, std::size_t n, std::size_t delta, std::size_t beta) {
  if (alg == "highdeg" || alg == "lowdeg") return alg;
  if (alg != "auto") throw std::invalid_argument("unknown algorithm: " + alg);
  const std::size_t b = beta ? beta : default_beta(n);
  return delta <= pow4(b) ? "lowdeg" : "highdeg";
}

RunArtifacts run_pipeline(const RunOptions& o) {
  if (o.backend != "cc" && o.backend != "mr" && o.backend != "both")
    throw std::invalid_argument("unknown backend: " + o.backend);
  if (o.routing_rounds < 1) throw std::invalid_argument("routing rounds must be >= 1");
  if (o.eps < 0.0) throw std::invalid_argument("eps must be >= 0");

  const Graph g = o.graph ? *o.graph : generate_graph(o.n, o.p, o.seed, o.max_degree);
  if (g.n() < 2) throw std::invalid_argument("need at least 2 nodes");

  RunArtifacts art;
  RunReport& r = art.report;
  r.backend = o.backend;
  r.n = g.n();
  r.m = g.m();
  r.delta = g.max_degree();
  r.beta = o.beta ? o.beta : default_beta(g.n());
  r.eps = o.eps;
  r.seed = o.seed;
  r.algorithm = resolve_algorithm(o.alg, g.n(), r.delta, o.beta);
  const bool low = r.algorithm == "lowdeg";

  HighDegParams hp;
  hp.beta = o.beta;
  const HighDegProgram high_prog(hp);
  const LowDegProgram low_prog(o.lowdeg);
  const CCProgram& prog = low ? static_cast<const CCProgram&>(low_prog) : high_prog;

  CCConfig cc;
  cc.route_rounds = o.routing_rounds;
  cc.threads = o.threads;
  if (low) cc = lowdeg_cc_config(g.n(), cc);
  const bool both = o.backend == "both";
  cc.trace_memory = both;

  std::optional<CCResult> ccr;
  std::optional<SimResult> mrr;
  if (o.backend != "mr") {
    ccr = run_cc(prog, g, o.seed, cc);
    r.rounds = ccr->rounds_used;
    art.profile = ccr->profile;
  }
  if (o.backend != "cc") {
    SimConfig sc = sim_config_for(g, o.eps, o.c, cc);
    sc.mr.threads = o.threads;
    sc.trace = both;
    r.c = sc.mr.c;
    r.eta = sc.mr.eta;
    r.machines = sc.mr.n_r;
    mrr = simulate(prog, g, sc, o.seed);
    r.mr_rounds = mrr->mr_rounds_used;
    if (!ccr) r.rounds = mrr->cc_rounds;
    art.mr_metrics = mrr->metrics;
    for (const auto& m : mrr->metrics) r.peak_reducer_words = std::max(r.peak_reducer_words, m.peak_words);
  }

  const auto& outputs = ccr ? ccr->outputs : mrr->outputs;
  const auto& final_memory = ccr ? ccr->final_memory : mrr->final_memory;
  art.coloring = coloring_from_outputs(outputs);
  if (low)
    fill_lowdeg(r, final_memory);
  else
    fill_highdeg(r, final_memory);
  r.colors_used = art.coloring.distinct_colors();
  r.proper = is_total_proper(g, art.coloring);

  std::vector<std::string> failures;
  if (!r.proper) failures.push_back("coloring is not proper and total");

  if (o.check_lightweight) {
    if (!ccr) {
      r.lightweight_detail = "needs the cc backend";
      failures.push_back("lightweight check needs the cc backend");
    } else {
      const auto lw = check_lightweight(art.profile, kLightK * static_cast<double>(g.m()),
                                        kLightN * static_cast<double>(g.n()), {});
      r.lightweight = lw.pass;
      r.lightweight_detail = lw.reason;
      if (!lw.pass) failures.push_back("lightweight: " + lw.reason);
    }
  }

  if (both) {
    auto eq = compare_backends(*ccr, *mrr);
    const std::size_t expect = 4 + 3 * static_cast<std::size_t>(ccr->rounds_used);
    if (eq.match && mrr->mr_rounds_used != expect) {
      eq.match = false;
      eq.detail = "mr rounds " + std::to_string(mrr->mr_rounds_used) + " != 4 + 3*" + std::to_string(ccr->rounds_used);
    }
    r.equivalence = eq.match ? "match" : "mismatch";
    r.equivalence_detail = eq.detail;
    if (!eq.match) failures.push_back("backends diverge: " + eq.detail);
  }

  if (!failures.empty()) {
    std::string msg;
    for (const auto& f : failures) msg += (msg.empty() ? "" : "; ") + f;
    throw CheckFailed(msg);
  }
  return art;
}

std::string report_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["backend"] = r.backend;
  j["algorithm"] = r.algorithm;
  j["n"] = r.n;
  j["m"] = r.m;
  j["delta"] = r.delta;
  j["beta"] = r.beta;
  j["eps"] = r.eps;
  j["c"] = r.c;
  j["seed"] = r.seed;
  j["rounds"] = r.rounds;
  j["mr_rounds"] = r.mr_rounds;
  j["trials"] = r.trials;
  j["residual_restarts"] = r.residual_restarts;
  j["colors_used"] = r.colors_used;
  j["residual_edges"] = r.residual_edges;
  j["max_group_neighbors"] = r.max_group_neighbors;
  j["max_in_group_degree"] = r.max_in_group_degree;
  j["uncolored"] = r.uncolored;
  j["components"] = r.components;
  j["max_component"] = r.max_component;
  j["merge_phases"] = r.merge_phases;
  j["peak_reducer_words"] = r.peak_reducer_words;
  j["eta"] = r.eta;
  j["machines"] = r.machines;
  j["proper"] = r.proper;
  j["lightweight"] = r.lightweight;
  j["lightweight_detail"] = r.lightweight_detail;
  j["equivalence"] = r.equivalence;
  j["equivalence_detail"] = r.equivalence_detail;
  return j.dump(2);
}

// Column order is part of the output format; append only.
std::string sweep_csv_header() {
  return "status,algorithm,backend,n,seed,m,delta,beta,rounds,mr_rounds,trials,residual_restarts,colors_used,"
         "residual_edges,max_group_neighbors,max_in_group_degree,uncolored,components,max_component,merge_phases,"
         "peak_reducer_words,proper,equivalence";
}

std::string sweep_csv_row(const RunReport& r, const std::string& status) {
  std::ostringstream s;
  s << status << ',' << r.algorithm << ',' << r.backend << ',' << r.n << ',' << r.seed << ',' << r.m << ','
    << r.delta << ',' << r.beta << ',' << r.rounds << ',' << r.mr_rounds << ',' << r.trials << ','
    << r.residual_restarts << ',' << r.colors_used << ',' << r.residual_edges << ',' << r.max_group_neighbors << ','
    << r.max_in_group_degree << ',' << r.uncolored << ',' << r.components << ',' << r.max_component << ','
    << r.merge_phases << ',' << r.peak_reducer_words << ',' << (r.proper ? 1 : 0) << ',' << r.equivalence;
  return s.str();
}

std::string sweep_csv_summary(const std::vector<RunReport>& ok) {
  const double k = ok.empty() ? 1.0 : static_cast<double>(ok.size());
  auto mean = [&](auto field) {
    double sum = 0;
    for (const auto& r : ok) sum += static_cast<double>(r.*field);
    std::ostringstream s;
    s << std::fixed << std::setprecision(3) << (ok.empty() ? 0.0 : sum / k);
    return s.str();
  };
  std::ostringstream s;
  s << "mean,,," << mean(&RunReport::n) << ",," << mean(&RunReport::m) << ',' << mean(&RunReport::delta) << ','
    << mean(&RunReport::beta) << ',' << mean(&RunReport::rounds) << ',' << mean(&RunReport::mr_rounds) << ','
    << mean(&RunReport::trials) << ',' << mean(&RunReport::residual_restarts) << ','
    << mean(&RunReport::colors_used) << ',' << mean(&RunReport::residual_edges) << ','
    << mean(&RunReport::max_group_neighbors) << ',' << mean(&RunReport::max_in_group_degree) << ','
    << mean(&RunReport::uncolored) << ',' << mean(&RunReport::components) << ','
    << mean(&RunReport::max_component) << ',' << mean(&RunReport::merge_phases) << ','
    << mean(&RunReport::peak_reducer_words) << ",,";
  return s.str();
}

}  // namespace cliquemr
