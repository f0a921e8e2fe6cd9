#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cliquemr/types.hpp"

namespace cliquemr {

/// (key, value) pair with small fixed storage; lengths are checked against
/// MRConfig caps whenever a phase emits a tuple.
struct KVTuple {
  static constexpr std::size_t kKeyStorage = 4;
  static constexpr std::size_t kValueStorage = 8;

  std::array<Word, kKeyStorage> k{};
  std::array<Word, kValueStorage> v{};
  std::uint8_t klen = 0;
  std::uint8_t vlen = 0;

  KVTuple() = default;
  KVTuple(std::span<const Word> key, std::span<const Word> value);
  KVTuple(std::initializer_list<Word> key, std::initializer_list<Word> value)
      : KVTuple(std::span<const Word>(key.begin(), key.size()), std::span<const Word>(value.begin(), value.size())) {}

  std::span<const Word> key() const { return {k.data(), klen}; }
  std::span<const Word> value() const { return {v.data(), vlen}; }
  std::size_t words() const { return klen + vlen; }

  bool operator==(const KVTuple& o) const;
  std::strong_ordering operator<=>(const KVTuple& o) const;
};

/// Single-word key for the common "route to reducer r" case.
KVTuple make_tuple(Word key, std::span<const Word> value);
KVTuple make_tuple(Word key, std::initializer_list<Word> value);

struct MRConfig {
  std::size_t n = 0;
  double eps = 0.0;
  double c = 0.0;
  std::size_t n_r = 1;
  std::size_t eta = 0;
  std::size_t key_word_cap = 4;
  std::size_t value_word_cap = 6;
  /// Ceiling on ops a single mapper or reducer call may charge; 0 disables.
  std::uint64_t max_ops = 0;
  unsigned threads = 1;

  /// n_r = ceil(n^(c-eps)), eta = ceil(c_eta * n^(1+eps)). When `c` is not
  /// given it is taken from m = n^(1+c), clamped to at least eps.
  static MRConfig for_graph(std::size_t n, std::size_t m, double eps, std::optional<double> c = std::nullopt,
                            double c_eta = 64.0);
};

/// Reducer index in {1..n_r} that runs `key`. Single-word keys k map to
/// ((k-1) mod n_r)+1 so "key r" means "machine r"; longer keys use FNV-1a.
std::size_t machine_of(std::span<const Word> key, std::size_t n_r);

class MapEmitter {
 public:
  MapEmitter(const MRConfig& config, std::size_t round, std::vector<KVTuple>& out) : config_(config), round_(round), out_(out) {}
  void emit(const KVTuple& t);
  void emit(Word key, std::span<const Word> value) { emit(make_tuple(key, value)); }
  void charge(std::uint64_t ops);

 private:
  const MRConfig& config_;
  std::size_t round_;
  std::vector<KVTuple>& out_;
  std::uint64_t ops_ = 0;
};

class ReduceContext {
 public:
  ReduceContext(const MRConfig& config, std::size_t round, std::size_t machine, std::span<const Word> key,
                std::vector<KVTuple>& out)
      : config_(config), round_(round), machine_(machine), key_(key), out_(out) {}

  std::span<const Word> key() const { return key_; }
  std::size_t machine() const { return machine_; }
  std::size_t round() const { return round_; }
  const MRConfig& config() const { return config_; }

  /// Output must carry the input key.
  void emit(const KVTuple& t);
  /// Emits (input key, value).
  void emit_value(std::span<const Word> value);
  /// Reports transient working words held beyond the input tuples.
  void note_working(std::size_t words) { working_ = std::max(working_, words); }
  void charge(std::uint64_t ops);
  std::size_t working() const { return working_; }

 private:
  const MRConfig& config_;
  std::size_t round_;
  std::size_t machine_;
  std::span<const Word> key_;
  std::vector<KVTuple>& out_;
  std::size_t working_ = 0;
  std::uint64_t ops_ = 0;
};

/// Stateless: sees one tuple at a time.
using Mapper = std::function<void(const KVTuple&, MapEmitter&)>;
/// Receives every tuple sharing one key, sorted by value.
using Reducer = std::function<void(std::span<const KVTuple>, ReduceContext&)>;

struct MRRoundSpec {
  Mapper mapper;    ///< empty = identity
  Reducer reducer;  ///< empty = identity
};

struct MRJob {
  std::vector<MRRoundSpec> rounds;
};

struct RoundMetrics {
  std::size_t round = 0;
  std::size_t machines_used = 0;
  std::size_t peak_words = 0;
  std::size_t tuples_in = 0;
  std::size_t tuples_out = 0;
};

struct MRRoundResult {
  std::vector<KVTuple> tuples;
  RoundMetrics metrics;
};

/// One map / shuffle / reduce round. `round` is the 1-based index used in
/// metrics and error messages.
MRRoundResult run_mr_round(std::span<const KVTuple> tuples, const MRRoundSpec& spec, const MRConfig& config,
                           std::size_t round);

struct MRJobResult {
  std::vector<KVTuple> tuples;
  std::size_t rounds_used = 0;
  std::vector<RoundMetrics> metrics;
};

MRJobResult run_mr_job(std::vector<KVTuple> input, const MRJob& job, const MRConfig& config);

/// "K:v1,v2 V:w1,w2" per line.
std::string dump_tuples(std::span<const KVTuple> tuples);
std::string metrics_json(std::span<const RoundMetrics> metrics);

}  // namespace cliquemr
