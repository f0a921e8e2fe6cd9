#pragma once

#include "cliquemr/cc_engine.hpp"

namespace cliquemr {

/// Every node halts in round 1 without communicating.
class IdleProgram final : public CCProgram {
 public:
  std::string name() const override { return "idle"; }
  void step(NodeContext& ctx) const override;
  std::vector<Word> output(std::span<const Word> memory) const override;
};

/// Round 1: broadcast own degree. Round 2: output all n degrees in ID order.
class DegreeBroadcastProgram final : public CCProgram {
 public:
  std::string name() const override { return "degree-broadcast"; }
  void step(NodeContext& ctx) const override;
  std::vector<Word> output(std::span<const Word> memory) const override;
};

}  // namespace cliquemr
