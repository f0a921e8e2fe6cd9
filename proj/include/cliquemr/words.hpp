#pragma once

#include <span>
#include <vector>

#include "cliquemr/types.hpp"

namespace cliquemr {

/// Appends scalars and length-prefixed sequences to a word array. Node
/// programs use this to keep their entire state in word-addressable memory.
class WordWriter {
 public:
  explicit WordWriter(std::vector<Word>& out) : out_(out) {}

  WordWriter& put(Word w) {
    out_.push_back(w);
    return *this;
  }

  template <typename T>
  WordWriter& put_seq(const std::vector<T>& values) {
    out_.push_back(values.size());
    for (const T& v : values) out_.push_back(static_cast<Word>(v));
    return *this;
  }

 private:
  std::vector<Word>& out_;
};

class WordReader {
 public:
  explicit WordReader(std::span<const Word> in) : in_(in) {}

  Word get() {
    if (pos_ >= in_.size()) throw EngineFault("memory decode past end of node memory");
    return in_[pos_++];
  }

  template <typename T>
  std::vector<T> get_seq() {
    const Word len = get();
    if (len > in_.size() - pos_) throw EngineFault("memory decode: sequence length exceeds memory");
    std::vector<T> out;
    out.reserve(len);
    for (Word i = 0; i < len; ++i) out.push_back(static_cast<T>(in_[pos_++]));
    return out;
  }

  bool done() const { return pos_ == in_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::span<const Word> in_;
  std::size_t pos_ = 0;
};

}  // namespace cliquemr
