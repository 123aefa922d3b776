#pragma once

// Self-consistency voting over repeated runs: collapse each run's instance
// stack to a semantic mask, then pick the candidate closest (L1) to the
// per-pixel mean of all candidates.

#include <span>
#include <utility>
#include <vector>

#include "iapf/core.hpp"

namespace iapf::simv {

struct SemanticMask {
  BinaryMask mask;
  int run_index = 0;
};

struct VoteResult {
  int selected_index = 0;
  std::vector<double> distances;  // L1 distance of each candidate to the mean
};

BinaryMask collapse_semantic(const InstanceMaskStack& stack);

VoteResult vote(std::span<const BinaryMask> candidates);

using RunPair = std::pair<SemanticMask, InstanceMaskStack>;

// Returns the pair at the voted index together with the vote itself.
std::pair<RunPair, VoteResult> select_final(std::span<const RunPair> runs);

}  // namespace iapf::simv
