#include "cliquemr/programs.hpp"

namespace cliquemr {

void IdleProgram::step(NodeContext& ctx) const { ctx.halt(); }

std::vector<Word> IdleProgram::output(std::span<const Word>) const { return {}; }

void DegreeBroadcastProgram::step(NodeContext& ctx) const {
  auto& mem = ctx.memory();
  if (ctx.round() == 1) {
    ctx.broadcast({mem.at(0)});
    return;
  }
  std::vector<Word> degrees(ctx.n(), 0);
  degrees[ctx.id() - 1] = mem.at(0);
  for (const auto& msg : ctx.inbox().all())
    if (msg.broadcast && !msg.payload.empty()) degrees[msg.src - 1] = msg.payload[0];
  mem = std::move(degrees);
  ctx.halt();
}

std::vector<Word> DegreeBroadcastProgram::output(std::span<const Word> memory) const {
  return {memory.begin(), memory.end()};
}

}  // namespace cliquemr
