#include "wsopt/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace wsopt {

std::string NetSpec::topology_id() const {
  return prefix + (encoder == EncoderKind::s2v ? "s2v" : "attn") + ":f" +
         std::to_string(feat_dim) + ":d" + std::to_string(embed_dim) + ":r" +
         std::to_string(depth) + ":ctx" + (use_node_context ? "1" : "0") + ":h" +
         std::to_string(head_layers);
}

namespace {

void init_linear(ParamStore& store, Rng& rng, const std::string& w, const std::string& b,
                 int in, int out) {
  if (!store.has(w)) store.create_uniform(w, in, out, rng);
  if (!store.has(b)) store.create(b, 1, out);
}

/// x (1,in) -> relu chain -> (1,1); depth linear layers, relu between.
Tape::Id mlp_head(Tape& tape, Tape::Id x, const std::string& prefix, int layers) {
  Tape::Id h = x;
  for (int i = 0; i < layers; ++i) {
    const std::string w = prefix + "/W" + std::to_string(i);
    const std::string b = prefix + "/b" + std::to_string(i);
    h = tape.add(tape.matmul(h, tape.param(w)), tape.param(b));
    if (i + 1 < layers) h = tape.relu(h);
  }
  return h;
}

void init_mlp_head(ParamStore& store, Rng& rng, const std::string& prefix, int in, int hidden,
                   int layers) {
  int cur = in;
  for (int i = 0; i < layers; ++i) {
    const int out = (i + 1 < layers) ? hidden : 1;
    init_linear(store, rng, prefix + "/W" + std::to_string(i), prefix + "/b" + std::to_string(i),
                cur, out);
    cur = out;
  }
}

std::vector<std::vector<int>> in_neighbor_groups(const DirectedGraph& g) {
  std::vector<std::vector<int>> groups(g.num_nodes());
  for (int v = 0; v < g.num_nodes(); ++v) groups[v] = g.in_neighbors(v);
  return groups;
}

}  // namespace

// ============================ Encoder ============================

void Encoder::init_params(ParamStore& store, Rng& rng) const {
  const auto& s = spec_;
  const std::string p = s.prefix + "enc/";
  if (s.encoder == EncoderKind::s2v) {
    for (int r = 0; r < s.depth; ++r) {
      const std::string rp = p + "r" + std::to_string(r) + "/";
      if (!store.has(rp + "W1")) store.create_uniform(rp + "W1", s.feat_dim, s.embed_dim, rng);
      if (r > 0 && !store.has(rp + "W2"))
        store.create_uniform(rp + "W2", s.embed_dim, s.embed_dim, rng);
    }
  } else {
    if (!store.has(p + "Win")) store.create_uniform(p + "Win", s.feat_dim, s.embed_dim, rng);
    for (int l = 0; l < s.depth; ++l) {
      const std::string lp = p + "l" + std::to_string(l) + "/";
      for (const char* nm : {"Wq", "Wk", "Wv", "Wo", "Wf1", "Wf2"})
        if (!store.has(lp + nm)) store.create_uniform(lp + nm, s.embed_dim, s.embed_dim, rng);
    }
  }
}

Tape::Id Encoder::encode(Tape& tape, const StateView& view) const {
  const auto& s = spec_;
  const std::string p = s.prefix + "enc/";
  if (view.features.cols != s.feat_dim)
    throw std::invalid_argument("Encoder: feature dim " + std::to_string(view.features.cols) +
                                " does not match spec " + std::to_string(s.feat_dim));
  Tape::Id x = tape.constant(view.features);
  if (s.encoder == EncoderKind::s2v) {
    if (!view.graph) throw std::invalid_argument("Encoder: s2v needs adjacency in the view");
    const auto groups = in_neighbor_groups(*view.graph);
    Tape::Id h = tape.relu(tape.matmul(x, tape.param(p + "r0/W1")));
    for (int r = 1; r < s.depth; ++r) {
      const std::string rp = p + "r" + std::to_string(r) + "/";
      Tape::Id lift = tape.matmul(x, tape.param(rp + "W1"));
      Tape::Id agg = tape.matmul(tape.gather_sum(h, groups), tape.param(rp + "W2"));
      h = tape.relu(tape.add(lift, agg));
    }
    return h;
  }
  Tape::Id h = tape.matmul(x, tape.param(p + "Win"));
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(s.embed_dim));
  for (int l = 0; l < s.depth; ++l) {
    const std::string lp = p + "l" + std::to_string(l) + "/";
    Tape::Id q = tape.matmul(h, tape.param(lp + "Wq"));
    Tape::Id k = tape.matmul(h, tape.param(lp + "Wk"));
    Tape::Id v = tape.matmul(h, tape.param(lp + "Wv"));
    Tape::Id scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_d);
    Tape::Id attn = tape.softmax_rows(scores);
    Tape::Id mixed = tape.matmul(tape.attn_combine(attn, v), tape.param(lp + "Wo"));
    Tape::Id res = tape.add(h, mixed);
    Tape::Id ff = tape.matmul(tape.relu(tape.matmul(res, tape.param(lp + "Wf1"))),
                              tape.param(lp + "Wf2"));
    h = tape.add(res, ff);
  }
  return h;
}

// ============================ HigherNet ============================

HigherNet::HigherNet(NetSpec spec) : enc_(std::move(spec)) {}

void HigherNet::init_params(ParamStore& store, Rng& rng) const {
  enc_.init_params(store, rng);
  const auto& s = spec();
  if (!store.has(s.prefix + "opt/W")) store.create_uniform(s.prefix + "opt/W", 1, s.embed_dim, rng);
  const int ctx = s.embed_dim + (s.use_node_context ? 2 * s.embed_dim : 0) + 2;
  init_mlp_head(store, rng, s.prefix + "head", s.embed_dim + ctx, s.embed_dim, s.head_layers);
}

Tape::Id HigherNet::head(Tape& tape, Tape::Id h, const StateView& view,
                         double option_input) const {
  const auto& s = spec();
  Tape::Id graph_emb = tape.mean_rows(h);
  Tape::Id opt = tape.matmul(tape.constant(Tensor(1, 1, {option_input})),
                             tape.param(s.prefix + "opt/W"));
  Tape::Id ctx = opt;
  if (s.use_node_context) {
    if (view.current < 0 || view.start < 0)
      throw std::invalid_argument("HigherNet: node context requested but view has none");
    ctx = tape.concat_cols(ctx, tape.row(h, view.current));
    ctx = tape.concat_cols(ctx, tape.row(h, view.start));
  }
  if (view.globals.size() != 2)
    throw std::invalid_argument("HigherNet: expected 2 global scalars");
  ctx = tape.concat_cols(ctx, tape.constant(Tensor(1, 2, {view.globals[0], view.globals[1]})));
  Tape::Id z = tape.concat_cols(graph_emb, ctx);
  return mlp_head(tape, z, s.prefix + "head", s.head_layers);
}

std::vector<double> HigherNet::q_options(ParamStore& store, const StateView& view,
                                         const std::vector<double>& option_inputs) const {
  Tape tape(&store);
  Tape::Id h = enc_.encode(tape, view);
  std::vector<double> out;
  out.reserve(option_inputs.size());
  for (double oi : option_inputs) out.push_back(tape.value(head(tape, h, view, oi)).at(0, 0));
  return out;
}

Tape::Id HigherNet::q_node(Tape& tape, const StateView& view, double option_input) const {
  return head(tape, enc_.encode(tape, view), view, option_input);
}

// ============================ LowerNet ============================

LowerNet::LowerNet(NetSpec spec) : enc_(std::move(spec)) {}

void LowerNet::init_params(ParamStore& store, Rng& rng) const {
  enc_.init_params(store, rng);
  const auto& s = spec();
  if (!store.has(s.prefix + "opt/W")) store.create_uniform(s.prefix + "opt/W", 1, s.embed_dim, rng);
  const int ctx = s.embed_dim + (s.use_node_context ? 2 * s.embed_dim : 0) + 2;
  init_mlp_head(store, rng, s.prefix + "node", s.embed_dim + ctx, s.embed_dim, s.head_layers);
  init_mlp_head(store, rng, s.prefix + "null", s.embed_dim + ctx, s.embed_dim, s.head_layers);
}

Tape::Id LowerNet::context(Tape& tape, Tape::Id h, const StateView& view,
                           double option_input) const {
  const auto& s = spec();
  Tape::Id ctx = tape.matmul(tape.constant(Tensor(1, 1, {option_input})),
                             tape.param(s.prefix + "opt/W"));
  if (s.use_node_context) {
    if (view.current < 0 || view.start < 0)
      throw std::invalid_argument("LowerNet: node context requested but view has none");
    ctx = tape.concat_cols(ctx, tape.row(h, view.current));
    ctx = tape.concat_cols(ctx, tape.row(h, view.start));
  }
  if (view.globals.size() != 2)
    throw std::invalid_argument("LowerNet: expected 2 global scalars");
  return tape.concat_cols(ctx, tape.constant(Tensor(1, 2, {view.globals[0], view.globals[1]})));
}

Tape::Id LowerNet::node_scores(Tape& tape, Tape::Id h, Tape::Id ctx) const {
  const auto& s = spec();
  const int n = tape.value(h).rows;
  Tape::Id hc = tape.concat_cols(h, tape.broadcast_row(ctx, n));
  Tape::Id z = hc;
  for (int i = 0; i < s.head_layers; ++i) {
    const std::string w = s.prefix + "node/W" + std::to_string(i);
    const std::string b = s.prefix + "node/b" + std::to_string(i);
    z = tape.add(tape.matmul(z, tape.param(w)),
                 tape.broadcast_row(tape.param(b), tape.value(z).rows));
    if (i + 1 < s.head_layers) z = tape.relu(z);
  }
  return z;  // (n,1)
}

Tape::Id LowerNet::null_score(Tape& tape, Tape::Id h, Tape::Id ctx, const StateView& view) const {
  const auto& s = spec();
  Tape::Id rep = s.use_node_context ? tape.row(h, view.current) : tape.mean_rows(h);
  Tape::Id z = tape.concat_cols(rep, ctx);
  return mlp_head(tape, z, s.prefix + "null", s.head_layers);
}

std::vector<double> LowerNet::q_all(ParamStore& store, const StateView& view,
                                    double option_input) const {
  Tape tape(&store);
  Tape::Id h = enc_.encode(tape, view);
  Tape::Id ctx = context(tape, h, view, option_input);
  const Tensor& scores = tape.value(node_scores(tape, h, ctx));
  std::vector<double> out(scores.data.begin(), scores.data.end());
  out.push_back(tape.value(null_score(tape, h, ctx, view)).at(0, 0));
  return out;
}

Tape::Id LowerNet::q_action(Tape& tape, const StateView& view, double option_input,
                            int action) const {
  const int n = view.features.rows;
  if (action < 0 || action > n)
    throw std::invalid_argument("LowerNet::q_action: action out of range");
  Tape::Id h = enc_.encode(tape, view);
  Tape::Id ctx = context(tape, h, view, option_input);
  if (action == n) return null_score(tape, h, ctx, view);
  return tape.row(node_scores(tape, h, ctx), action);
}

int masked_argmax(const std::vector<double>& q, const std::vector<char>& masked) {
  if (q.size() != masked.size())
    throw std::invalid_argument("masked_argmax: size mismatch");
  int best = -1;
  double best_v = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double v = masked[i] ? kMaskValue : q[i];
    if (best < 0 || v > best_v) {
      best = static_cast<int>(i);
      best_v = v;
    }
  }
  if (best < 0) throw std::invalid_argument("masked_argmax: empty input");
  return best;
}

}  // namespace wsopt
