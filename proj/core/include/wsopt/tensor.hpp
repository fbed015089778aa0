#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "wsopt/rng.hpp"

namespace wsopt {

/// Dense row-major matrix of doubles. Vectors are 1 x c or r x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}
  Tensor(int r, int c, std::vector<double> d);

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_str() const;

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  /// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] with fan_in = r (input dim).
  static Tensor uniform_fan_in(int r, int c, Rng& rng);
};

/// Sums addends in ascending value order; the result depends only on the
/// multiset of values, which makes node-axis reductions permutation-invariant
/// down to the last bit. Sorts buf in place.
double canonical_sum(std::vector<double>& buf);

/// Named parameters with gradient buffers and Adam state. Iteration order is
/// name order, so optimizer sweeps and checkpoints are deterministic.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
  };

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  /// Creates (zero-initialized); throws on duplicates.
  Tensor& create(const std::string& name, int rows, int cols);
  Tensor& create_uniform(const std::string& name, int rows, int cols, Rng& rng);
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);

  void zero_grad();
  void scale_grads(double s);
  double global_grad_norm() const;
  /// Rescales all gradients when their global L2 norm exceeds max_norm.
  void clip_gradients(double max_norm);
  /**
   * One Adam update from the accumulated gradients:
   *   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
   *   theta <- theta - lr * (m/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps).
   * The step counter t is shared by the whole store.
   */
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Overwrites all values with those of `other` (names/shapes must match exactly).
  void copy_values_from(const ParamStore& other);
  bool all_finite() const;
  std::vector<std::string> names() const;
  std::size_t total_scalars() const;
  int adam_t() const { return adam_t_; }

  const std::map<std::string, Entry>& entries() const { return entries_; }

 private:
  std::map<std::string, Entry> entries_;
  int adam_t_ = 0;
};

/**
 * Checkpoint blob layout (little-endian, documented in README):
 *   magic "WSCK" | version byte 0x01 | u32 topology-id length | topology id bytes
 *   | u32 param count | per param: u32 name length, name bytes, i32 rows, i32 cols,
 *   rows*cols float64 values.
 * Adam state is not serialized.
 */
void save_checkpoint(const ParamStore& store, const std::string& topology_id,
                     const std::string& path);
struct CheckpointLoad {
  std::string topology_id;
  ParamStore store;
};
CheckpointLoad load_checkpoint(const std::string& path);

/// Reverse-mode tape with eager forward evaluation. Build a fresh tape per
/// forward pass; backward() accumulates parameter gradients into the store.
class Tape {
 public:
  using Id = int;

  explicit Tape(ParamStore* store = nullptr) : store_(store) {}

  Id constant(Tensor t);
  /// Leaf backed by a named parameter in the store (gradients flow to it).
  Id param(const std::string& name);

  Id matmul(Id a, Id b);
  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);  // elementwise
  Id scale(Id a, double c);
  Id relu(Id a);
  Id concat_cols(Id a, Id b);  // axis=1
  Id concat_rows(Id a, Id b);  // axis=0
  Id mean_rows(Id a);          // (r,c) -> (1,c)
  Id sum_rows(Id a);           // (r,c) -> (1,c)
  Id broadcast_row(Id a, int rows);  // (1,c) -> (rows,c)
  Id row(Id a, int r);               // select row -> (1,c)
  Id transpose(Id a);
  /// out[g] = sum of rows a[u] for u in groups[g] (empty group -> zero row).
  Id gather_sum(Id a, std::vector<std::vector<int>> groups);
  Id softmax_rows(Id a);
  /// Attention combine: out = A * V with the row-i reduction ordered by the
  /// attention weights, keeping the forward permutation-invariant bitwise.
  Id attn_combine(Id attn, Id values);

  const Tensor& value(Id id) const { return nodes_[id].val; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }

  /// root must be 1x1. Seeds d root = seed and accumulates into store grads.
  void backward(Id root, double seed = 1.0);
  /// Gradient w.r.t. an arbitrary node after backward() (for tests).
  const Tensor& node_grad(Id id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    std::string param_name;  // leaf params only
    std::function<void()> back;
  };
  Id push(Node n);
  void ensure_grad(Id id);

  ParamStore* store_;
  std::vector<Node> nodes_;
};

/**
 * Central finite-difference gradient probe. fn must rebuild the forward pass
 * from current store values and return the scalar loss. For each probe a
 * random parameter entry is perturbed; the analytic gradient must match the
 * finite difference within rel_tol for at least one epsilon in eps_ladder
 * (smaller epsilons resolve relu-kink truncation error).
 */
struct GradCheckReport {
  int probes = 0;
  double max_rel_err = 0.0;
  bool ok = false;
};
GradCheckReport check_gradients(ParamStore& store,
                                const std::function<double()>& loss_fn,
                                const std::function<void()>& backward_fn,
                                int probes, Rng& rng, double rel_tol,
                                const std::vector<double>& eps_ladder = {1e-5, 1e-6, 1e-7});

}  // namespace wsopt
