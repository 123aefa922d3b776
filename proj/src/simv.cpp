#include "iapf/simv.hpp"

#include <cstdint>
#include <cstdlib>

namespace iapf::simv {

BinaryMask collapse_semantic(const InstanceMaskStack& stack) {
  if (stack.masks.empty()) throw Error(ErrorCode::EmptyStack, "no instance masks to collapse");
  const BinaryMask& first = stack.masks.front();
  BinaryMask out(first.width, first.height);
  for (const BinaryMask& m : stack.masks) {
    require_same_dims(m.width, m.height, out.width, out.height, "collapse_semantic");
    for (std::size_t i = 0; i < m.bits.size(); ++i) out.bits[i] |= m.bits[i];
  }
  return out;
}

VoteResult vote(std::span<const BinaryMask> candidates) {
  if (candidates.empty()) throw Error(ErrorCode::EmptyCandidates, "nothing to vote on");
  const auto& first = candidates.front();
  for (const auto& c : candidates) {
    require_same_dims(c.width, c.height, first.width, first.height, "vote");
  }
  const auto n = static_cast<std::int64_t>(candidates.size());

  // Work in units of 1/n so the per-pixel mean is an integer (the vote count)
  // and ties are detected exactly.
  std::vector<std::int64_t> votes(first.bits.size(), 0);
  for (const auto& c : candidates) {
    for (std::size_t p = 0; p < votes.size(); ++p) votes[p] += c.bits[p];
  }

  VoteResult r;
  std::int64_t best = -1;
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t scaled = 0;
    const auto& bits = candidates[static_cast<std::size_t>(i)].bits;
    for (std::size_t p = 0; p < votes.size(); ++p) {
      scaled += std::llabs(n * bits[p] - votes[p]);
    }
    r.distances.push_back(static_cast<double>(scaled) / static_cast<double>(n));
    if (best < 0 || scaled < best) {
      best = scaled;
      r.selected_index = static_cast<int>(i);
    }
  }
  return r;
}

std::pair<RunPair, VoteResult> select_final(std::span<const RunPair> runs) {
  if (runs.empty()) throw Error(ErrorCode::EmptyCandidates, "no runs to select from");
  std::vector<BinaryMask> semantic;
  semantic.reserve(runs.size());
  for (const auto& run : runs) semantic.push_back(run.first.mask);
  VoteResult v = vote(semantic);
  return {runs[static_cast<std::size_t>(v.selected_index)], std::move(v)};
}

}  // namespace iapf::simv
