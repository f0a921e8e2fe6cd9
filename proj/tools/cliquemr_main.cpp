#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "cliquemr/runner.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace cliquemr;

namespace {

enum Exit { kPass = 0, kCheckFailed = 2, kEngineFault = 3, kBadArgs = 4 };

unsigned thread_cap() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CLIQUEMR_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return std::min<unsigned>(hw, static_cast<unsigned>(v));
    } catch (...) {
    }
  }
  return hw;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

std::string error_json(const std::string& kind, const std::string& message, int code) {
  nlohmann::ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  return j.dump();
}

struct Flags {
  RunOptions run;
  std::string out = "out";
  std::string input;
  std::vector<std::size_t> ns{256};
  std::uint64_t seed_from = 1;
  std::uint64_t seed_to = 0;  // inclusive; < seed_from means empty
};

void add_common(CLI::App* app, Flags& f) {
  auto& r = f.run;
  app->add_option("--alg", r.alg, "highdeg | lowdeg | auto")->check(CLI::IsMember({"highdeg", "lowdeg", "auto"}));
  app->add_option("--backend", r.backend, "cc | mr | both")->check(CLI::IsMember({"cc", "mr", "both"}));
  app->add_option("--p", r.p, "edge probability")->check(CLI::Range(0.0, 1.0));
  app->add_option("--max-degree", r.max_degree, "generator degree cap");
  app->add_option("--beta", r.beta, "group width override");
  app->add_option("--eps", r.eps, "MR epsilon")->check(CLI::NonNegativeNumber);
  app->add_option("--c", r.c, "MR density exponent override");
  app->add_option("--routing-const", r.routing_rounds, "rounds per routing call")->check(CLI::PositiveNumber);
  app->add_flag("--check-lightweight", r.check_lightweight, "check the lightweight profile (cc backend)");
  app->add_option("--iterations", r.lowdeg.iterations, "lowdeg RandColStep iterations (0 = default)");
  app->add_option("--gather-radius", r.lowdeg.gather_radius, "lowdeg ball radius (-1 = 2T)");
  app->add_option("--component-cap", r.lowdeg.component_cap, "lowdeg component cap (0 = default)");
  app->add_option("--out", f.out, "output directory");
}

int classify(const std::exception_ptr& e, std::string& kind, std::string& msg) {
  try {
    std::rethrow_exception(e);
  } catch (const CheckFailed& x) {
    kind = "check_failed";
    msg = x.what();
    return kCheckFailed;
  } catch (const EngineFault& x) {
    kind = "engine_fault";
    msg = x.what();
    return kEngineFault;
  } catch (const std::invalid_argument& x) {
    kind = "bad_args";
    msg = x.what();
    return kBadArgs;
  } catch (const ParseError& x) {
    kind = "bad_args";
    msg = x.what();
    return kBadArgs;
  } catch (const std::exception& x) {
    kind = "engine_fault";
    msg = x.what();
    return kEngineFault;
  }
}

int cmd_run(Flags& f) {
  RunOptions o = f.run;
  o.n = f.ns.at(0);
  o.seed = f.seed_from;
  o.threads = thread_cap();
  const fs::path out(f.out);
  fs::create_directories(out);
  try {
    if (!f.input.empty()) {
      std::ifstream in(f.input);
      if (!in) throw std::invalid_argument("cannot read " + f.input);
      std::stringstream ss;
      ss << in.rdbuf();
      o.graph = read_edge_list(ss.str());
    }
    auto art = run_pipeline(o);
    write_file(out / "coloring.txt", write_coloring(art.coloring));
    write_file(out / "profile.jsonl", profile_jsonl(art.profile));
    write_file(out / "mr_metrics.json", metrics_json(art.mr_metrics));
    write_file(out / "report.json", report_json(art.report) + "\n");
    std::cout << report_json(art.report) << "\n";
    return kPass;
  } catch (...) {
    std::string kind, msg;
    const int code = classify(std::current_exception(), kind, msg);
    const std::string j = error_json(kind, msg, code);
    std::cerr << j << "\n";
    try {
      write_file(out / "error.json", j + "\n");
    } catch (...) {
    }
    return code;
  }
}

struct SweepRow {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  RunReport report;
  std::string status = "ok";
  int code = kPass;
  std::string message;
};

int cmd_sweep(Flags& f) {
  const fs::path out(f.out);
  fs::create_directories(out);
  std::vector<SweepRow> rows;
  for (std::size_t n : f.ns)
    for (std::uint64_t s = f.seed_from; f.seed_to >= f.seed_from && s <= f.seed_to; ++s) rows.push_back({n, s});

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < rows.size();) {
      auto& row = rows[i];
      RunOptions o = f.run;
      o.n = row.n;
      o.seed = row.seed;
      o.threads = 1;
      try {
        row.report = run_pipeline(o).report;
      } catch (...) {
        std::string kind;
        row.code = classify(std::current_exception(), kind, row.message);
        row.status = kind;
        row.report.algorithm = f.run.alg;
        row.report.backend = f.run.backend;
        row.report.n = row.n;
        row.report.seed = row.seed;
        std::lock_guard lock(err_mu);
        std::cerr << error_json(kind, "n=" + std::to_string(row.n) + " seed=" + std::to_string(row.seed) + ": " +
                                          row.message, row.code)
                  << "\n";
      }
    }
  };
  const unsigned k = std::min<std::size_t>(thread_cap(), std::max<std::size_t>(rows.size(), 1));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < k; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::sort(rows.begin(), rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return std::tie(a.n, a.seed) < std::tie(b.n, b.seed); });
  std::ostringstream csv;
  csv << sweep_csv_header() << "\n";
  std::vector<RunReport> ok;
  int code = kPass;
  for (const auto& row : rows) {
    csv << sweep_csv_row(row.report, row.status) << "\n";
    if (row.code == kPass)
      ok.push_back(row.report);
    else
      code = std::max(code, row.code);
  }
  if (!rows.empty()) csv << sweep_csv_summary(ok) << "\n";
  write_file(out / "sweep.csv", csv.str());
  std::cout << csv.str();
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Congested clique coloring and its MapReduce simulation"};
  app.require_subcommand(1);

  Flags run_flags;
  auto* run = app.add_subcommand("run", "run one pipeline and write artifacts");
  add_common(run, run_flags);
  run->add_option("--n", run_flags.ns.front(), "node count")->check(CLI::Range(2, 1 << 20));
  run->add_option("--seed", run_flags.seed_from, "seed");
  run->add_option("--input", run_flags.input, "edge-list file used instead of a generated graph");

  Flags sweep_flags;
  sweep_flags.seed_to = 10;
  auto* sweep = app.add_subcommand("sweep", "run a seed range and write sweep.csv");
  add_common(sweep, sweep_flags);
  sweep->add_option("--n", sweep_flags.ns, "node counts")->check(CLI::Range(2, 1 << 20));
  sweep->add_option("--seed-from", sweep_flags.seed_from, "first seed");
  sweep->add_option("--seed-to", sweep_flags.seed_to, "last seed, inclusive; below --seed-from means none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("bad_args", e.what(), kBadArgs) << "\n";
    return kBadArgs;
  }
  try {
    if (run->parsed()) return cmd_run(run_flags);
    return cmd_sweep(sweep_flags);
  } catch (const std::exception& e) {
    std::cerr << error_json("engine_fault", e.what(), kEngineFault) << "\n";
    return kEngineFault;
  }
}
