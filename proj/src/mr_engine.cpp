#include "cliquemr/mr_engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cliquemr {

KVTuple::KVTuple(std::span<const Word> key, std::span<const Word> value) {
  if (key.size() > kKeyStorage || value.size() > kValueStorage) {
    throw EngineFault("tuple of key " + std::to_string(key.size()) + " / value " + std::to_string(value.size()) +
                      " words exceeds tuple storage");
  }
  std::copy(key.begin(), key.end(), k.begin());
  std::copy(value.begin(), value.end(), v.begin());
  klen = static_cast<std::uint8_t>(key.size());
  vlen = static_cast<std::uint8_t>(value.size());
}

bool KVTuple::operator==(const KVTuple& o) const {
  return std::ranges::equal(key(), o.key()) && std::ranges::equal(value(), o.value());
}

std::strong_ordering KVTuple::operator<=>(const KVTuple& o) const {
  auto a = key(), b = o.key();
  if (auto c = std::lexicographical_compare_three_way(a.begin(), a.end(), b.begin(), b.end()); c != 0) return c;
  auto x = value(), y = o.value();
  return std::lexicographical_compare_three_way(x.begin(), x.end(), y.begin(), y.end());
}

KVTuple make_tuple(Word key, std::span<const Word> value) { return KVTuple(std::span<const Word>(&key, 1), value); }

KVTuple make_tuple(Word key, std::initializer_list<Word> value) {
  return make_tuple(key, std::span<const Word>(value.begin(), value.size()));
}

MRConfig MRConfig::for_graph(std::size_t n, std::size_t m, double eps, std::optional<double> c, double c_eta) {
  if (n == 0) throw std::invalid_argument("MRConfig needs n >= 1");
  if (eps < 0) throw std::invalid_argument("eps must be non-negative");
  MRConfig cfg;
  cfg.n = n;
  cfg.eps = eps;
  double cc = 0.0;
  if (c) {
    cc = *c;
  } else if (n > 1 && m > 0) {
    cc = std::log(static_cast<double>(m)) / std::log(static_cast<double>(n)) - 1.0;
  }
  cc = std::max(cc, eps);
  if (c && *c < eps) throw std::invalid_argument("need eps <= c");
  cfg.c = cc;
  const double nd = static_cast<double>(n);
  // small slack so exact powers do not round up through floating error
  cfg.n_r = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::pow(nd, cc - eps) - 1e-9)));
  cfg.eta = static_cast<std::size_t>(std::ceil(c_eta * std::pow(nd, 1.0 + eps) - 1e-9));
  return cfg;
}

std::size_t machine_of(std::span<const Word> key, std::size_t n_r) {
  if (n_r == 0) throw EngineFault("machine count is zero");
  if (key.size() == 1) {
    Word k = key[0];
    if (k == 0) return 1;
    return static_cast<std::size_t>((k - 1) % n_r) + 1;
  }
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Word w : key)
    for (int b = 0; b < 8; ++b) {
      h ^= (w >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  return static_cast<std::size_t>(h % n_r) + 1;
}

namespace {

void check_caps(const KVTuple& t, const MRConfig& config, const char* phase, std::size_t round) {
  if (t.klen > config.key_word_cap || t.vlen > config.value_word_cap) {
    throw EngineFault(std::string(phase) + " in round " + std::to_string(round) + " emitted a tuple with key " +
                      std::to_string(t.klen) + " / value " + std::to_string(t.vlen) + " words (caps " +
                      std::to_string(config.key_word_cap) + " / " + std::to_string(config.value_word_cap) + ")");
  }
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const unsigned t = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += t) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

void MapEmitter::emit(const KVTuple& t) {
  check_caps(t, config_, "mapper", round_);
  out_.push_back(t);
}

void MapEmitter::charge(std::uint64_t ops) {
  ops_ += ops;
  if (config_.max_ops && ops_ > config_.max_ops)
    throw EngineFault("mapper exceeded op ceiling in round " + std::to_string(round_));
}

void ReduceContext::emit(const KVTuple& t) {
  check_caps(t, config_, "reducer", round_);
  if (!std::ranges::equal(t.key(), key_)) {
    throw EngineFault("reducer on machine " + std::to_string(machine_) + " in round " + std::to_string(round_) +
                      " emitted a foreign key");
  }
  out_.push_back(t);
}

void ReduceContext::emit_value(std::span<const Word> value) { emit(KVTuple(key_, value)); }

void ReduceContext::charge(std::uint64_t ops) {
  ops_ += ops;
  if (config_.max_ops && ops_ > config_.max_ops)
    throw EngineFault("reducer on machine " + std::to_string(machine_) + " exceeded op ceiling in round " +
                      std::to_string(round_));
}

MRRoundResult run_mr_round(std::span<const KVTuple> tuples, const MRRoundSpec& spec, const MRConfig& config,
                           std::size_t round) {
  for (const auto& t : tuples) check_caps(t, config, "input", round);
  MRRoundResult result;
  result.metrics.round = round;
  result.metrics.tuples_in = tuples.size();

  // Map: fixed chunks so parallel output order equals serial order.
  std::vector<KVTuple> mapped;
  if (!spec.mapper) {
    mapped.assign(tuples.begin(), tuples.end());
  } else {
    const std::size_t chunk = 4096;
    const std::size_t chunks = (tuples.size() + chunk - 1) / chunk;
    std::vector<std::vector<KVTuple>> parts(chunks);
    parallel_for(chunks, config.threads, [&](std::size_t c) {
      auto end = std::min(tuples.size(), (c + 1) * chunk);
      for (std::size_t i = c * chunk; i < end; ++i) {
        MapEmitter em(config, round, parts[c]);
        spec.mapper(tuples[i], em);
      }
    });
    for (auto& p : parts) mapped.insert(mapped.end(), p.begin(), p.end());
  }

  // Shuffle: canonical (key, value) order.
  std::sort(mapped.begin(), mapped.end());
  struct Group {
    std::size_t begin, end, machine;
  };
  std::vector<Group> groups;
  for (std::size_t i = 0; i < mapped.size();) {
    std::size_t j = i + 1;
    while (j < mapped.size() && std::ranges::equal(mapped[j].key(), mapped[i].key())) ++j;
    groups.push_back({i, j, machine_of(mapped[i].key(), config.n_r)});
    i = j;
  }

  std::vector<std::size_t> input_words(config.n_r + 1, 0);
  for (const auto& g : groups)
    for (std::size_t i = g.begin; i < g.end; ++i) input_words[g.machine] += mapped[i].words();
  for (std::size_t mch = 1; mch <= config.n_r; ++mch) {
    if (input_words[mch] > config.eta) {
      throw EngineFault("reducer memory exceeded on machine " + std::to_string(mch) + " in round " +
                        std::to_string(round) + ": " + std::to_string(input_words[mch]) + " words > eta " +
                        std::to_string(config.eta));
    }
  }

  std::vector<std::vector<KVTuple>> outs(groups.size());
  std::vector<std::size_t> working(groups.size(), 0);
  if (!spec.reducer) {
    for (std::size_t g = 0; g < groups.size(); ++g)
      outs[g].assign(mapped.begin() + groups[g].begin, mapped.begin() + groups[g].end);
  } else {
    parallel_for(groups.size(), config.threads, [&](std::size_t g) {
      const auto& grp = groups[g];
      std::span<const KVTuple> in(mapped.data() + grp.begin, grp.end - grp.begin);
      ReduceContext ctx(config, round, grp.machine, in.front().key(), outs[g]);
      spec.reducer(in, ctx);
      working[g] = ctx.working();
    });
  }

  std::vector<std::size_t> peak(config.n_r + 1, 0);
  for (std::size_t g = 0; g < groups.size(); ++g) peak[groups[g].machine] = std::max(peak[groups[g].machine], working[g]);
  for (std::size_t mch = 1; mch <= config.n_r; ++mch) {
    std::size_t used = std::max(input_words[mch], peak[mch]);
    if (used > config.eta) {
      throw EngineFault("reducer memory exceeded on machine " + std::to_string(mch) + " in round " +
                        std::to_string(round) + ": working set " + std::to_string(used) + " words > eta " +
                        std::to_string(config.eta));
    }
    if (used > 0 || input_words[mch] > 0) ++result.metrics.machines_used;
    result.metrics.peak_words = std::max(result.metrics.peak_words, used);
  }

  for (auto& o : outs) result.tuples.insert(result.tuples.end(), o.begin(), o.end());
  result.metrics.tuples_out = result.tuples.size();
  return result;
}

MRJobResult run_mr_job(std::vector<KVTuple> input, const MRJob& job, const MRConfig& config) {
  MRJobResult res;
  res.tuples = std::move(input);
  for (std::size_t r = 0; r < job.rounds.size(); ++r) {
    auto out = run_mr_round(res.tuples, job.rounds[r], config, r + 1);
    res.tuples = std::move(out.tuples);
    res.metrics.push_back(out.metrics);
  }
  res.rounds_used = job.rounds.size();
  return res;
}

std::string dump_tuples(std::span<const KVTuple> tuples) {
  std::ostringstream out;
  auto join = [&](std::span<const Word> ws) {
    for (std::size_t i = 0; i < ws.size(); ++i) out << (i ? "," : "") << ws[i];
  };
  for (const auto& t : tuples) {
    out << "K:";
    join(t.key());
    out << " V:";
    join(t.value());
    out << '\n';
  }
  return out.str();
}

std::string metrics_json(std::span<const RoundMetrics> metrics) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : metrics) {
    arr.push_back({{"round", m.round},
                   {"machines_used", m.machines_used},
                   {"peak_words", m.peak_words},
                   {"tuples_in", m.tuples_in},
                   {"tuples_out", m.tuples_out}});
  }
  return arr.dump();
}

}  // namespace cliquemr
