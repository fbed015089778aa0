#pragma once

#include <string>
#include <vector>

#include "wsopt/tensor.hpp"
#include "wsopt/view.hpp"

namespace wsopt {

enum class EncoderKind { s2v, attention };

/// Architecture description for one Q-network. Parameters live in a ParamStore
/// under `prefix`; the net itself is stateless, so the same net object can run
/// against online and target stores.
struct NetSpec {
  EncoderKind encoder = EncoderKind::s2v;
  int feat_dim = 5;
  int embed_dim = 64;
  int depth = 3;                  // message-passing rounds / attention layers
  bool use_node_context = false;  // append current+start embeddings to context
  int head_layers = 3;
  std::string prefix;

  std::string topology_id() const;
};

/**
 * Shared encoder. s2v: h^0 = 0, h_v^r = relu(W1_r x_v + W2_r sum_{u in N_in(v)}
 * h_u^{r-1}) (the aggregation term is omitted at round 0 where it is zero).
 * attention: linear input lift, then per layer single-head scaled dot-product
 * with residual connection and a relu feed-forward of the embedding width.
 */
class Encoder {
 public:
  explicit Encoder(NetSpec spec) : spec_(std::move(spec)) {}
  void init_params(ParamStore& store, Rng& rng) const;
  Tape::Id encode(Tape& tape, const StateView& view) const;
  const NetSpec& spec() const { return spec_; }

 private:
  NetSpec spec_;
};

/**
 * Action-in value head: q(s, o) for any integer option, so the architecture
 * never depends on the episode budget. Context = option embedding (+ current/
 * start node embeddings when configured) + global scalars.
 */
class HigherNet {
 public:
  explicit HigherNet(NetSpec spec);
  void init_params(ParamStore& store, Rng& rng) const;
  const NetSpec& spec() const { return enc_.spec(); }

  /// One encoder pass, one head evaluation per option value.
  std::vector<double> q_options(ParamStore& store, const StateView& view,
                                const std::vector<double>& option_inputs) const;
  /// Tape node (1x1) for training.
  Tape::Id q_node(Tape& tape, const StateView& view, double option_input) const;

 private:
  Tape::Id head(Tape& tape, Tape::Id h, const StateView& view, double option_input) const;
  Encoder enc_;
};

/**
 * Action-out value head: per-node scores plus a null action. The per-node head
 * is shared across nodes (permutation equivariant); the null stream reads the
 * mean node embedding (or the current node's embedding when node context is
 * on). Returns n+1 values, index n = null.
 */
class LowerNet {
 public:
  explicit LowerNet(NetSpec spec);
  void init_params(ParamStore& store, Rng& rng) const;
  const NetSpec& spec() const { return enc_.spec(); }

  std::vector<double> q_all(ParamStore& store, const StateView& view, double option_input) const;
  /// Tape node for one action; action == n means the null action.
  Tape::Id q_action(Tape& tape, const StateView& view, double option_input, int action) const;

 private:
  Tape::Id context(Tape& tape, Tape::Id h, const StateView& view, double option_input) const;
  Tape::Id node_scores(Tape& tape, Tape::Id h, Tape::Id ctx) const;
  Tape::Id null_score(Tape& tape, Tape::Id h, Tape::Id ctx, const StateView& view) const;
  Encoder enc_;
};

/// -1e9 applied to masked entries before argmax; ties break to lowest index.
int masked_argmax(const std::vector<double>& q, const std::vector<char>& masked);
constexpr double kMaskValue = -1e9;

}  // namespace wsopt
