#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wsopt/rng.hpp"

namespace wsopt {

/// Simple directed graph over nodes 0..n-1. No self loops, no duplicate edges.
/// Adjacency lists preserve edge insertion order.
class DirectedGraph {
 public:
  DirectedGraph() = default;
  /// Throws std::invalid_argument on out-of-range endpoints, self loops, or duplicates.
  DirectedGraph(int n, const std::vector<std::pair<int, int>>& edges);

  int num_nodes() const { return n_; }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& out_neighbors(int v) const { return adj_out_[v]; }
  const std::vector<int>& in_neighbors(int v) const { return adj_in_[v]; }
  int out_degree(int v) const { return static_cast<int>(adj_out_[v].size()); }
  int in_degree(int v) const { return static_cast<int>(adj_in_[v].size()); }
  int max_out_degree() const;

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adj_out_;
  std::vector<std::vector<int>> adj_in_;
};

/// Complete geometric graph: n points in [0,scale]^2 with Euclidean distances.
class EuclideanGraph {
 public:
  EuclideanGraph() = default;
  /// Explicit coordinates (injection hook for tests and file loading).
  explicit EuclideanGraph(std::vector<std::pair<double, double>> coords);

  int num_nodes() const { return static_cast<int>(coords_.size()); }
  const std::vector<std::pair<double, double>>& coords() const { return coords_; }
  double distance(int i, int j) const;
  /// Largest pairwise distance (0 for n < 2).
  double max_distance() const;

 private:
  std::vector<std::pair<double, double>> coords_;
};

/**
 * Erdos-Renyi digraph: every ordered pair (u,v), u != v, becomes an edge
 * independently with probability p. With undirected=true, unordered pairs are
 * sampled once and mirrored into both directions. Reproducible from (n,p,seed).
 */
DirectedGraph generate_er(int n, double p, std::uint64_t seed, bool undirected = false);

/// n points uniform in [0,scale]^2.
EuclideanGraph generate_euclidean(int n, double scale, std::uint64_t seed);

struct EdgeListLoad {
  DirectedGraph graph;
  int duplicate_edges_dropped = 0;
  int self_loops_dropped = 0;
};

/**
 * Edge list file: one "u v" pair per line, '#' starts a comment, blank lines
 * ignored. Node count = max node id + 1. Throws std::runtime_error with the
 * offending line number on malformed input, and on files with no edges.
 */
EdgeListLoad load_edge_list(const std::string& path);
void save_edge_list(const DirectedGraph& g, const std::string& path);

/// Coordinate CSV: header "id,x,y", then one row per node in id order.
EuclideanGraph load_coords_csv(const std::string& path);
void save_coords_csv(const EuclideanGraph& g, const std::string& path);

/// Family of random problem graphs; n drawn uniformly from [n_min, n_max].
struct GraphDistribution {
  enum class Kind { erdos_renyi, euclidean_uniform };
  Kind kind = Kind::erdos_renyi;
  int n_min = 50;
  int n_max = 100;
  double er_p = 0.01;       // erdos_renyi only
  bool undirected = false;  // erdos_renyi only
  double scale = 100.0;     // euclidean_uniform only

  /// Throws std::invalid_argument on bad ranges or probabilities.
  void validate() const;
  int sample_n(Rng& rng) const;
};

}  // namespace wsopt
