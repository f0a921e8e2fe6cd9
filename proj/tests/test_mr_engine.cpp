#include <algorithm>
#include <map>

#include "cliquemr/mr_engine.hpp"
#include "cliquemr/rng.hpp"
#include "doctest.h"

using namespace cliquemr;

namespace {

MRConfig small_config(std::size_t n_r, std::size_t eta) {
  MRConfig c;
  c.n = 16;
  c.n_r = n_r;
  c.eta = eta;
  return c;
}

std::vector<KVTuple> random_tuples(std::uint64_t seed, std::size_t count) {
  SplitMix64 rng(seed);
  std::vector<KVTuple> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(make_tuple(1 + rng.uniform(20), {rng.uniform(100)}));
  return out;
}

// word count then key-wise sum, straight with maps
std::map<Word, Word> direct_sums(const std::vector<KVTuple>& in) {
  std::map<Word, Word> s;
  for (const auto& t : in) s[t.k[0] % 5] += t.v[0];
  return s;
}

MRJob two_round_job() {
  MRRoundSpec rekey;
  rekey.mapper = [](const KVTuple& t, MapEmitter& e) { e.emit(make_tuple(t.k[0] % 5, {t.v[0]})); };
  MRRoundSpec sum;
  sum.reducer = [](std::span<const KVTuple> in, ReduceContext& ctx) {
    Word s = 0;
    for (const auto& t : in) s += t.v[0];
    ctx.emit_value(std::vector<Word>{s});
  };
  return {{rekey, sum}};
}

}  // namespace

TEST_SUITE("mr_engine") {
  TEST_CASE("config from graph size") {
    auto c = MRConfig::for_graph(256, 256 * 16, 0.0);
    CHECK(c.c == doctest::Approx(0.5));
    CHECK(c.n_r == 16);
    CHECK(c.eta == 64 * 256);
    CHECK_THROWS_AS(MRConfig::for_graph(16, 20, 0.5, 0.25), std::invalid_argument);
  }

  TEST_CASE("machine_of") {
    CHECK(machine_of(std::vector<Word>{1}, 4) == 1);
    CHECK(machine_of(std::vector<Word>{4}, 4) == 4);
    CHECK(machine_of(std::vector<Word>{5}, 4) == 1);
    std::vector<Word> k2{3, 9};
    const auto m = machine_of(k2, 7);
    CHECK(m >= 1);
    CHECK(m <= 7);
    CHECK(machine_of(k2, 7) == m);
    CHECK(machine_of(k2, 1) == 1);
  }

  TEST_CASE("identity round returns the sorted input") {
    auto in = random_tuples(1, 200);
    auto r = run_mr_round(in, {}, small_config(4, 10000), 1);
    auto want = in;
    std::sort(want.begin(), want.end());
    CHECK(r.tuples == want);
    CHECK(r.metrics.tuples_in == 200);
    CHECK(r.metrics.tuples_out == 200);
  }

  TEST_CASE("tuple size caps") {
    MRRoundSpec s;
    s.mapper = [](const KVTuple&, MapEmitter& e) {
      std::vector<Word> v(7, 1);
      e.emit(1, v);
    };
    CHECK_THROWS_AS(run_mr_round(random_tuples(1, 1), s, small_config(1, 100), 1), EngineFault);
    std::vector<Word> nine(9, 0);
    CHECK_THROWS_AS(cliquemr::make_tuple(1, nine), EngineFault);
  }

  TEST_CASE("zero-round job is the identity") {
    auto in = random_tuples(2, 10);
    auto r = run_mr_job(in, {}, small_config(2, 100));
    CHECK(r.rounds_used == 0);
    CHECK(r.tuples == in);
  }

  TEST_CASE("two-round pipeline against direct sums") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto in = random_tuples(seed, 300);
      auto r = run_mr_job(in, two_round_job(), small_config(3, 10000));
      CHECK(r.rounds_used == 2);
      std::map<Word, Word> got;
      for (const auto& t : r.tuples) got[t.k[0]] = t.v[0];
      CHECK(got == direct_sums(in));
    }
  }

  TEST_CASE("input order does not matter") {
    auto in = random_tuples(5, 300);
    auto a = run_mr_job(in, two_round_job(), small_config(3, 10000));
    std::reverse(in.begin(), in.end());
    SplitMix64 rng(9);
    for (std::size_t i = in.size(); i > 1; --i) std::swap(in[i - 1], in[rng.uniform(i)]);
    auto b = run_mr_job(in, two_round_job(), small_config(3, 10000));
    CHECK(a.tuples == b.tuples);
  }

  TEST_CASE("parallel equals serial") {
    auto in = random_tuples(6, 20000);
    auto serial = small_config(5, 1 << 20);
    auto par = serial;
    par.threads = 4;
    auto a = run_mr_job(in, two_round_job(), serial);
    auto b = run_mr_job(in, two_round_job(), par);
    CHECK(a.tuples == b.tuples);
    CHECK(a.metrics.back().peak_words == b.metrics.back().peak_words);
  }

  TEST_CASE("reducer memory fault") {
    std::vector<KVTuple> in;
    for (Word i = 0; i < 10; ++i) in.push_back(make_tuple(1, {i}));
    // 10 tuples of 2 words on one machine
    CHECK(run_mr_round(in, {}, small_config(2, 20), 1).metrics.peak_words == 20);
    CHECK_THROWS_AS(run_mr_round(in, {}, small_config(2, 19), 1), EngineFault);

    MRRoundSpec s;
    s.reducer = [](std::span<const KVTuple>, ReduceContext& ctx) { ctx.note_working(50); };
    CHECK_THROWS_AS(run_mr_round(in, s, small_config(2, 49), 1), EngineFault);
  }

  TEST_CASE("reducer must keep its key") {
    MRRoundSpec s;
    s.reducer = [](std::span<const KVTuple>, ReduceContext& ctx) { ctx.emit(make_tuple(99, {1})); };
    CHECK_THROWS(run_mr_round(random_tuples(3, 5), s, small_config(2, 100), 1));
  }

  TEST_CASE("metrics json") {
    auto r = run_mr_job(random_tuples(1, 10), two_round_job(), small_config(2, 100));
    auto j = metrics_json(r.metrics);
    CHECK(j.find("peak_words") != std::string::npos);
  }
}
