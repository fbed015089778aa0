#include "wsopt/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace wsopt {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

namespace {
CMap cmap(const Tensor& t) { return CMap(t.data.data(), t.rows, t.cols); }
MMap mmap(Tensor& t) { return MMap(t.data.data(), t.rows, t.cols); }

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument("Tape::" + op + ": incompatible shapes " + a.shape_str() + " and " +
                              b.shape_str());
}
}  // namespace

Tensor::Tensor(int r, int c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != static_cast<std::size_t>(r) * c)
    throw std::invalid_argument("Tensor: data size does not match " + shape_str());
}

std::string Tensor::shape_str() const {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

Tensor Tensor::uniform_fan_in(int r, int c, Rng& rng) {
  Tensor t(r, c);
  const double bound = 1.0 / std::sqrt(static_cast<double>(r));
  for (auto& x : t.data) x = uniform_real(rng, -bound, bound);
  return t;
}

double canonical_sum(std::vector<double>& buf) {
  std::sort(buf.begin(), buf.end());
  double s = 0.0;
  for (double v : buf) s += v;
  return s;
}

// ============================ ParamStore ============================

Tensor& ParamStore::create(const std::string& name, int rows, int cols) {
  if (has(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
  Entry e;
  e.value = Tensor(rows, cols);
  e.grad = Tensor(rows, cols);
  e.adam_m = Tensor(rows, cols);
  e.adam_v = Tensor(rows, cols);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamStore::create_uniform(const std::string& name, int rows, int cols, Rng& rng) {
  Tensor& t = create(name, rows, cols);
  t = Tensor::uniform_fan_in(rows, cols, rng);
  return t;
}

Tensor& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
  return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
  return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
  return it->second.grad;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) std::fill(e.grad.data.begin(), e.grad.data.end(), 0.0);
}

void ParamStore::scale_grads(double s) {
  for (auto& [name, e] : entries_)
    for (auto& g : e.grad.data) g *= s;
}

double ParamStore::global_grad_norm() const {
  double sq = 0.0;
  for (const auto& [name, e] : entries_)
    for (double g : e.grad.data) sq += g * g;
  return std::sqrt(sq);
}

void ParamStore::clip_gradients(double max_norm) {
  const double norm = global_grad_norm();
  if (norm > max_norm && norm > 0.0) scale_grads(max_norm / norm);
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(beta1, adam_t_);
  const double bc2 = 1.0 - std::pow(beta2, adam_t_);
  for (auto& [name, e] : entries_) {
    for (std::size_t i = 0; i < e.value.data.size(); ++i) {
      const double g = e.grad.data[i];
      double& m = e.adam_m.data[i];
      double& v = e.adam_v.data[i];
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g * g;
      const double mh = m / bc1;
      const double vh = v / bc2;
      e.value.data[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (entries_.size() != other.entries_.size())
    throw std::invalid_argument("ParamStore::copy_values_from: parameter sets differ");
  auto it = entries_.begin();
  auto jt = other.entries_.begin();
  for (; it != entries_.end(); ++it, ++jt) {
    if (it->first != jt->first || !it->second.value.same_shape(jt->second.value))
      throw std::invalid_argument("ParamStore::copy_values_from: mismatch at " + it->first);
    it->second.value.data = jt->second.value.data;
  }
}

bool ParamStore::all_finite() const {
  for (const auto& [name, e] : entries_)
    for (double x : e.value.data)
      if (!std::isfinite(x)) return false;
  return true;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::total_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

// ============================ checkpoint IO ============================

namespace {
constexpr char kMagic[4] = {'W', 'S', 'C', 'K'};
constexpr std::uint8_t kVersion = 0x01;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_i32(std::ofstream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
std::int32_t read_i32(std::ifstream& in) {
  std::int32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}
}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& topology_id,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot write " + path);
  out.write(kMagic, 4);
  out.put(static_cast<char>(kVersion));
  write_u32(out, static_cast<std::uint32_t>(topology_id.size()));
  out.write(topology_id.data(), static_cast<std::streamsize>(topology_id.size()));
  write_u32(out, static_cast<std::uint32_t>(store.entries().size()));
  for (const auto& [name, e] : store.entries()) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_i32(out, e.value.rows);
    write_i32(out, e.value.cols);
    out.write(reinterpret_cast<const char*>(e.value.data.data()),
              static_cast<std::streamsize>(e.value.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

CheckpointLoad load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  const int version = in.get();
  if (version != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version " + std::to_string(version));
  CheckpointLoad out;
  const std::uint32_t topo_len = read_u32(in);
  out.topology_id.resize(topo_len);
  in.read(out.topology_id.data(), topo_len);
  const std::uint32_t n_params = read_u32(in);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const std::uint32_t name_len = read_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const int rows = read_i32(in);
    const int cols = read_i32(in);
    if (!in || rows < 0 || cols < 0)
      throw std::runtime_error("load_checkpoint: truncated header in " + path);
    Tensor& t = out.store.create(name, rows, cols);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated data in " + path);
  }
  return out;
}

// ============================ Tape ============================

Tape::Id Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::ensure_grad(Id id) {
  Node& n = nodes_[id];
  if (n.grad.rows == 0) n.grad = Tensor(n.val.rows, n.val.cols);
}

Tape::Id Tape::constant(Tensor t) {
  Node n;
  n.val = std::move(t);
  return push(std::move(n));
}

Tape::Id Tape::param(const std::string& name) {
  if (!store_) throw std::invalid_argument("Tape::param: tape has no ParamStore");
  Node n;
  n.val = store_->value(name);
  n.needs_grad = true;
  n.param_name = name;
  return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.cols != B.rows) shape_error("matmul", A, B);
  Node n;
  n.val = Tensor(A.rows, B.cols);
  mmap(n.val).noalias() = cmap(A) * cmap(B);
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, b, out]() {
      const Tensor& g = nodes_[out].grad;
      if (nodes_[a].needs_grad) {
        ensure_grad(a);
        mmap(nodes_[a].grad).noalias() += cmap(g) * cmap(nodes_[b].val).transpose();
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        mmap(nodes_[b].grad).noalias() += cmap(nodes_[a].val).transpose() * cmap(g);
      }
    };
  return out;
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) shape_error("add", A, B);
  Node n;
  n.val = A;
  for (std::size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] += B.data[i];
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, b, out]() {
      const Tensor& g = nodes_[out].grad;
      for (Id src : {a, b})
        if (nodes_[src].needs_grad) {
          ensure_grad(src);
          for (std::size_t i = 0; i < g.data.size(); ++i) nodes_[src].grad.data[i] += g.data[i];
        }
    };
  return out;
}

Tape::Id Tape::sub(Id a, Id b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) shape_error("sub", A, B);
  Node n;
  n.val = A;
  for (std::size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] -= B.data[i];
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, b, out]() {
      const Tensor& g = nodes_[out].grad;
      if (nodes_[a].needs_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < g.data.size(); ++i) nodes_[a].grad.data[i] += g.data[i];
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        for (std::size_t i = 0; i < g.data.size(); ++i) nodes_[b].grad.data[i] -= g.data[i];
      }
    };
  return out;
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (!A.same_shape(B)) shape_error("mul", A, B);
  Node n;
  n.val = A;
  for (std::size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] *= B.data[i];
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, b, out]() {
      const Tensor& g = nodes_[out].grad;
      if (nodes_[a].needs_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < g.data.size(); ++i)
          nodes_[a].grad.data[i] += g.data[i] * nodes_[b].val.data[i];
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        for (std::size_t i = 0; i < g.data.size(); ++i)
          nodes_[b].grad.data[i] += g.data[i] * nodes_[a].val.data[i];
      }
    };
  return out;
}

Tape::Id Tape::scale(Id a, double c) {
  Node n;
  n.val = nodes_[a].val;
  for (auto& x : n.val.data) x *= c;
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, c, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      for (std::size_t i = 0; i < g.data.size(); ++i) nodes_[a].grad.data[i] += c * g.data[i];
    };
  return out;
}

Tape::Id Tape::relu(Id a) {
  Node n;
  n.val = nodes_[a].val;
  for (auto& x : n.val.data) x = x > 0.0 ? x : 0.0;
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      const Tensor& x = nodes_[a].val;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (x.data[i] > 0.0) nodes_[a].grad.data[i] += g.data[i];
    };
  return out;
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.rows != B.rows) shape_error("concat_cols", A, B);
  Node n;
  n.val = Tensor(A.rows, A.cols + B.cols);
  for (int r = 0; r < A.rows; ++r) {
    for (int c = 0; c < A.cols; ++c) n.val.at(r, c) = A.at(r, c);
    for (int c = 0; c < B.cols; ++c) n.val.at(r, A.cols + c) = B.at(r, c);
  }
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, b, out]() {
      const Tensor& g = nodes_[out].grad;
      const int ac = nodes_[a].val.cols;
      if (nodes_[a].needs_grad) {
        ensure_grad(a);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < ac; ++c) nodes_[a].grad.at(r, c) += g.at(r, c);
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        for (int r = 0; r < g.rows; ++r)
          for (int c = 0; c < nodes_[b].val.cols; ++c)
            nodes_[b].grad.at(r, c) += g.at(r, ac + c);
      }
    };
  return out;
}

Tape::Id Tape::concat_rows(Id a, Id b) {
  const Tensor& A = nodes_[a].val;
  const Tensor& B = nodes_[b].val;
  if (A.cols != B.cols) shape_error("concat_rows", A, B);
  Node n;
  n.val = Tensor(A.rows + B.rows, A.cols);
  std::copy(A.data.begin(), A.data.end(), n.val.data.begin());
  std::copy(B.data.begin(), B.data.end(), n.val.data.begin() + A.data.size());
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, b, out]() {
      const Tensor& g = nodes_[out].grad;
      const std::size_t asz = nodes_[a].val.data.size();
      if (nodes_[a].needs_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < asz; ++i) nodes_[a].grad.data[i] += g.data[i];
      }
      if (nodes_[b].needs_grad) {
        ensure_grad(b);
        for (std::size_t i = 0; i < nodes_[b].val.data.size(); ++i)
          nodes_[b].grad.data[i] += g.data[asz + i];
      }
    };
  return out;
}

Tape::Id Tape::mean_rows(Id a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.val = Tensor(1, A.cols);
  std::vector<double> buf(static_cast<std::size_t>(A.rows));
  for (int c = 0; c < A.cols; ++c) {
    for (int r = 0; r < A.rows; ++r) buf[r] = A.at(r, c);
    n.val.at(0, c) = canonical_sum(buf) / static_cast<double>(A.rows);
  }
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      const double inv = 1.0 / nodes_[a].val.rows;
      for (int r = 0; r < nodes_[a].val.rows; ++r)
        for (int c = 0; c < g.cols; ++c) nodes_[a].grad.at(r, c) += inv * g.at(0, c);
    };
  return out;
}

Tape::Id Tape::sum_rows(Id a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.val = Tensor(1, A.cols);
  std::vector<double> buf(static_cast<std::size_t>(A.rows));
  for (int c = 0; c < A.cols; ++c) {
    for (int r = 0; r < A.rows; ++r) buf[r] = A.at(r, c);
    n.val.at(0, c) = canonical_sum(buf);
  }
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      for (int r = 0; r < nodes_[a].val.rows; ++r)
        for (int c = 0; c < g.cols; ++c) nodes_[a].grad.at(r, c) += g.at(0, c);
    };
  return out;
}

Tape::Id Tape::broadcast_row(Id a, int rows) {
  const Tensor& A = nodes_[a].val;
  if (A.rows != 1) throw std::invalid_argument("Tape::broadcast_row: input must be 1 x c");
  Node n;
  n.val = Tensor(rows, A.cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < A.cols; ++c) n.val.at(r, c) = A.at(0, c);
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) nodes_[a].grad.at(0, c) += g.at(r, c);
    };
  return out;
}

Tape::Id Tape::row(Id a, int r) {
  const Tensor& A = nodes_[a].val;
  if (r < 0 || r >= A.rows) throw std::invalid_argument("Tape::row: index out of range");
  Node n;
  n.val = Tensor(1, A.cols);
  for (int c = 0; c < A.cols; ++c) n.val.at(0, c) = A.at(r, c);
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, r, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      for (int c = 0; c < g.cols; ++c) nodes_[a].grad.at(r, c) += g.at(0, c);
    };
  return out;
}

Tape::Id Tape::transpose(Id a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.val = Tensor(A.cols, A.rows);
  for (int r = 0; r < A.rows; ++r)
    for (int c = 0; c < A.cols; ++c) n.val.at(c, r) = A.at(r, c);
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      for (int r = 0; r < g.rows; ++r)
        for (int c = 0; c < g.cols; ++c) nodes_[a].grad.at(c, r) += g.at(r, c);
    };
  return out;
}

Tape::Id Tape::gather_sum(Id a, std::vector<std::vector<int>> groups) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.val = Tensor(static_cast<int>(groups.size()), A.cols);
  std::vector<double> buf;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (int u : groups[g])
      if (u < 0 || u >= A.rows)
        throw std::invalid_argument("Tape::gather_sum: group index out of range");
    for (int c = 0; c < A.cols; ++c) {
      buf.clear();
      for (int u : groups[g]) buf.push_back(A.at(u, c));
      n.val.at(static_cast<int>(g), c) = canonical_sum(buf);
    }
  }
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, out, groups = std::move(groups)]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      for (std::size_t gi = 0; gi < groups.size(); ++gi)
        for (int u : groups[gi])
          for (int c = 0; c < g.cols; ++c)
            nodes_[a].grad.at(u, c) += g.at(static_cast<int>(gi), c);
    };
  return out;
}

Tape::Id Tape::softmax_rows(Id a) {
  const Tensor& A = nodes_[a].val;
  Node n;
  n.val = Tensor(A.rows, A.cols);
  std::vector<double> buf(static_cast<std::size_t>(A.cols));
  for (int r = 0; r < A.rows; ++r) {
    double m = A.at(r, 0);
    for (int c = 1; c < A.cols; ++c) m = std::max(m, A.at(r, c));
    for (int c = 0; c < A.cols; ++c) {
      const double e = std::exp(A.at(r, c) - m);
      n.val.at(r, c) = e;
      buf[c] = e;
    }
    const double denom = canonical_sum(buf);
    for (int c = 0; c < A.cols; ++c) n.val.at(r, c) /= denom;
  }
  n.needs_grad = nodes_[a].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, a, out]() {
      ensure_grad(a);
      const Tensor& g = nodes_[out].grad;
      const Tensor& s = nodes_[out].val;
      for (int r = 0; r < g.rows; ++r) {
        double dot = 0.0;
        for (int c = 0; c < g.cols; ++c) dot += g.at(r, c) * s.at(r, c);
        for (int c = 0; c < g.cols; ++c)
          nodes_[a].grad.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
      }
    };
  return out;
}

Tape::Id Tape::attn_combine(Id attn, Id values) {
  const Tensor& A = nodes_[attn].val;
  const Tensor& V = nodes_[values].val;
  if (A.cols != V.rows) shape_error("attn_combine", A, V);
  Node n;
  n.val = Tensor(A.rows, V.cols);
  std::vector<int> order(static_cast<std::size_t>(A.cols));
  for (int r = 0; r < A.rows; ++r) {
    for (int j = 0; j < A.cols; ++j) order[j] = j;
    std::sort(order.begin(), order.end(),
              [&](int x, int y) { return A.at(r, x) < A.at(r, y); });
    for (int j : order) {
      const double w = A.at(r, j);
      for (int c = 0; c < V.cols; ++c) n.val.at(r, c) += w * V.at(j, c);
    }
  }
  n.needs_grad = nodes_[attn].needs_grad || nodes_[values].needs_grad;
  Id out = push(std::move(n));
  if (nodes_[out].needs_grad)
    nodes_[out].back = [this, attn, values, out]() {
      const Tensor& g = nodes_[out].grad;
      if (nodes_[attn].needs_grad) {
        ensure_grad(attn);
        mmap(nodes_[attn].grad).noalias() += cmap(g) * cmap(nodes_[values].val).transpose();
      }
      if (nodes_[values].needs_grad) {
        ensure_grad(values);
        mmap(nodes_[values].grad).noalias() += cmap(nodes_[attn].val).transpose() * cmap(g);
      }
    };
  return out;
}

void Tape::backward(Id root, double seed) {
  if (root < 0 || root >= static_cast<Id>(nodes_.size()))
    throw std::invalid_argument("Tape::backward: bad root");
  if (nodes_[root].val.rows != 1 || nodes_[root].val.cols != 1)
    throw std::invalid_argument("Tape::backward: root must be 1x1, got " +
                                nodes_[root].val.shape_str());
  ensure_grad(root);
  nodes_[root].grad.at(0, 0) += seed;
  for (Id i = root; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.rows == 0) continue;
    if (n.back) n.back();
    if (!n.param_name.empty() && store_) {
      Tensor& pg = store_->grad(n.param_name);
      for (std::size_t k = 0; k < pg.data.size(); ++k) pg.data[k] += n.grad.data[k];
    }
  }
}

// ============================ gradient probing ============================

GradCheckReport check_gradients(ParamStore& store, const std::function<double()>& loss_fn,
                                const std::function<void()>& backward_fn, int probes, Rng& rng,
                                double rel_tol, const std::vector<double>& eps_ladder) {
  store.zero_grad();
  backward_fn();

  // Snapshot analytic gradients: probing must not depend on later accumulation.
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, e] : store.entries()) analytic.emplace(name, e.grad);

  const auto names = store.names();
  std::vector<std::size_t> sizes;
  std::size_t total = 0;
  for (const auto& nm : names) {
    sizes.push_back(store.value(nm).size());
    total += sizes.back();
  }

  GradCheckReport rep;
  rep.probes = probes;
  for (int p = 0; p < probes; ++p) {
    std::size_t flat = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(total));
    if (flat >= total) flat = total - 1;
    std::size_t pi = 0;
    while (flat >= sizes[pi]) {
      flat -= sizes[pi];
      ++pi;
    }
    Tensor& t = store.value(names[pi]);
    const double ad = analytic.at(names[pi]).data[flat];
    const double orig = t.data[flat];

    double best = std::numeric_limits<double>::infinity();
    for (double eps : eps_ladder) {
      t.data[flat] = orig + eps;
      const double fp = loss_fn();
      t.data[flat] = orig - eps;
      const double fm = loss_fn();
      t.data[flat] = orig;
      const double fd = (fp - fm) / (2.0 * eps);
      const double rel = std::abs(fd - ad) / std::max({std::abs(fd), std::abs(ad), 1e-6});
      best = std::min(best, rel);
      if (best <= rel_tol) break;
    }
    rep.max_rel_err = std::max(rep.max_rel_err, best);
  }
  rep.ok = rep.max_rel_err <= rel_tol;
  return rep;
}

}  // namespace wsopt
