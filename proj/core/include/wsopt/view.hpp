#pragma once

#include <vector>

#include "wsopt/graph.hpp"
#include "wsopt/tensor.hpp"

namespace wsopt {

/// What the Q-networks see of an environment state: per-node features, global
/// scalars (already normalized), optional context node indices, and optional
/// adjacency for message passing (null for the complete geometric setting).
struct StateView {
  Tensor features;               // n x F
  std::vector<double> globals;   // e.g. {budget_left/K, steps_left/T}
  int current = -1;
  int start = -1;
  const DirectedGraph* graph = nullptr;
};

}  // namespace wsopt
