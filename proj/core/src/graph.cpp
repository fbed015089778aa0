#include "wsopt/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace wsopt {

namespace {
std::uint64_t edge_key(int u, int v) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(u)) << 32) |
         static_cast<std::uint32_t>(v);
}
}  // namespace

DirectedGraph::DirectedGraph(int n, const std::vector<std::pair<int, int>>& edges) : n_(n) {
  if (n < 0) throw std::invalid_argument("DirectedGraph: negative node count");
  adj_out_.resize(n_);
  adj_in_.resize(n_);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(edges.size() * 2);
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= n_ || v < 0 || v >= n_)
      throw std::invalid_argument("DirectedGraph: edge endpoint out of range: (" +
                                  std::to_string(u) + "," + std::to_string(v) + ")");
    if (u == v)
      throw std::invalid_argument("DirectedGraph: self loop at node " + std::to_string(u));
    if (!seen.insert(edge_key(u, v)).second)
      throw std::invalid_argument("DirectedGraph: duplicate edge (" + std::to_string(u) + "," +
                                  std::to_string(v) + ")");
    edges_.emplace_back(u, v);
    adj_out_[u].push_back(v);
    adj_in_[v].push_back(u);
  }
}

int DirectedGraph::max_out_degree() const {
  int m = 0;
  for (int v = 0; v < n_; ++v) m = std::max(m, out_degree(v));
  return m;
}

EuclideanGraph::EuclideanGraph(std::vector<std::pair<double, double>> coords)
    : coords_(std::move(coords)) {}

double EuclideanGraph::distance(int i, int j) const {
  const double dx = coords_[i].first - coords_[j].first;
  const double dy = coords_[i].second - coords_[j].second;
  return std::sqrt(dx * dx + dy * dy);
}

double EuclideanGraph::max_distance() const {
  double m = 0.0;
  const int n = num_nodes();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) m = std::max(m, distance(i, j));
  return m;
}

DirectedGraph generate_er(int n, double p, std::uint64_t seed, bool undirected) {
  if (n < 0) throw std::invalid_argument("generate_er: negative n");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("generate_er: p outside [0,1]");
  Rng rng(seed);
  std::vector<std::pair<int, int>> edges;
  if (undirected) {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (bernoulli(rng, p)) {
          edges.emplace_back(u, v);
          edges.emplace_back(v, u);
        }
  } else {
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v) {
        if (u == v) continue;
        if (bernoulli(rng, p)) edges.emplace_back(u, v);
      }
  }
  return DirectedGraph(n, edges);
}

EuclideanGraph generate_euclidean(int n, double scale, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("generate_euclidean: need at least 2 points");
  if (scale <= 0.0) throw std::invalid_argument("generate_euclidean: scale must be positive");
  Rng rng(seed);
  std::vector<std::pair<double, double>> coords;
  coords.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = uniform_real(rng, 0.0, scale);
    const double y = uniform_real(rng, 0.0, scale);
    coords.emplace_back(x, y);
  }
  return EuclideanGraph(std::move(coords));
}

EdgeListLoad load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_edge_list: cannot open " + path);
  std::vector<std::pair<int, int>> edges;
  std::unordered_set<std::uint64_t> seen;
  int max_id = -1, duplicates = 0, self_loops = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long u, v;
    std::string trailing;
    if (!(ls >> u) || !(ls >> v) || (ls >> trailing) || u < 0 || v < 0)
      throw std::runtime_error("load_edge_list: malformed line " + std::to_string(line_no) +
                               " in " + path);
    if (u == v) {
      ++self_loops;
      max_id = std::max(max_id, static_cast<int>(u));
      continue;
    }
    max_id = std::max({max_id, static_cast<int>(u), static_cast<int>(v)});
    if (!seen.insert(edge_key(static_cast<int>(u), static_cast<int>(v))).second) {
      ++duplicates;
      continue;
    }
    edges.emplace_back(static_cast<int>(u), static_cast<int>(v));
  }
  if (edges.empty()) throw std::runtime_error("load_edge_list: no edges in " + path);
  EdgeListLoad out{DirectedGraph(max_id + 1, edges), duplicates, self_loops};
  return out;
}

void save_edge_list(const DirectedGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_edge_list: cannot write " + path);
  out << "# directed edge list, " << g.num_nodes() << " nodes, " << g.num_edges() << " edges\n";
  for (const auto& [u, v] : g.edges()) out << u << " " << v << "\n";
}

EuclideanGraph load_coords_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_coords_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,x,y", 0) != 0)
    throw std::runtime_error("load_coords_csv: missing id,x,y header in " + path);
  std::vector<std::pair<double, double>> coords;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id_s, x_s, y_s;
    if (!std::getline(ls, id_s, ',') || !std::getline(ls, x_s, ',') || !std::getline(ls, y_s))
      throw std::runtime_error("load_coords_csv: malformed line " + std::to_string(line_no) +
                               " in " + path);
    try {
      const long long id = std::stoll(id_s);
      if (id != static_cast<long long>(coords.size()))
        throw std::runtime_error("load_coords_csv: ids must be 0..n-1 in order, line " +
                                 std::to_string(line_no));
      coords.emplace_back(std::stod(x_s), std::stod(y_s));
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("load_coords_csv: malformed line " + std::to_string(line_no) +
                               " in " + path);
    }
  }
  if (coords.empty()) throw std::runtime_error("load_coords_csv: no rows in " + path);
  return EuclideanGraph(std::move(coords));
}

void save_coords_csv(const EuclideanGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_coords_csv: cannot write " + path);
  out << "id,x,y\n";
  const auto& c = g.coords();
  out.precision(17);
  for (std::size_t i = 0; i < c.size(); ++i)
    out << i << "," << c[i].first << "," << c[i].second << "\n";
}

void GraphDistribution::validate() const {
  if (n_min < 1 || n_max < n_min)
    throw std::invalid_argument("GraphDistribution: need 1 <= n_min <= n_max");
  if (kind == Kind::erdos_renyi && (er_p < 0.0 || er_p > 1.0))
    throw std::invalid_argument("GraphDistribution: er_p outside [0,1]");
  if (kind == Kind::euclidean_uniform && scale <= 0.0)
    throw std::invalid_argument("GraphDistribution: scale must be positive");
}

int GraphDistribution::sample_n(Rng& rng) const {
  return uniform_int(rng, n_min, n_max);
}

}  // namespace wsopt
