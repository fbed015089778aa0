#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "test_util.hpp"
#include "wsopt/graph.hpp"

using namespace wsopt;
using wsopt_test::tmp_dir;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("directed graph construction and adjacency") {
  DirectedGraph g(4, {{0, 1}, {1, 2}, {2, 0}, {0, 2}});
  CHECK(g.num_nodes() == 4);
  CHECK(g.num_edges() == 4);
  CHECK(g.out_neighbors(0) == std::vector<int>{1, 2});
  CHECK(g.in_neighbors(2) == std::vector<int>{1, 0});  // insertion order
  CHECK(g.out_degree(3) == 0);
  CHECK(g.in_degree(0) == 1);
  CHECK(g.max_out_degree() == 2);

  CHECK_THROWS_AS(DirectedGraph(3, {{0, 3}}), std::invalid_argument);
  CHECK_THROWS_AS(DirectedGraph(3, {{-1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(DirectedGraph(3, {{1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(DirectedGraph(3, {{0, 1}, {0, 1}}), std::invalid_argument);
}

TEST_CASE("er generator edge cases") {
  CHECK(generate_er(1, 0.5, 7).num_edges() == 0);
  CHECK(generate_er(3, 1.0, 7).num_edges() == 6);

  const DirectedGraph u = generate_er(3, 1.0, 7, /*undirected=*/true);
  CHECK(u.num_edges() == 6);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != b) {
        bool found = false;
        for (int w : u.out_neighbors(a)) found = found || (w == b);
        CHECK(found);
      }

  // reproducible from the seed
  const DirectedGraph g1 = generate_er(40, 0.1, 99);
  const DirectedGraph g2 = generate_er(40, 0.1, 99);
  CHECK(g1.edges() == g2.edges());
  CHECK(generate_er(40, 0.1, 100).edges() != g1.edges());
}

TEST_CASE("er edge count concentrates on n(n-1)p") {
  const int n = 200;
  const double p = 0.01;
  const int reps = 1000;
  double total = 0.0;
  for (int s = 0; s < reps; ++s) total += generate_er(n, p, 1000 + s).num_edges();
  const double mean_edges = total / reps;
  const double expected = n * (n - 1) * p;                            // 398
  const double se = std::sqrt(n * (n - 1) * p * (1 - p) / reps);      // ~0.63
  CHECK(std::abs(mean_edges - expected) <= 3.0 * se);
}

TEST_CASE("undirected er keeps mirrored pairs and halves the pair draws") {
  const DirectedGraph u = generate_er(30, 0.2, 5, true);
  std::set<std::pair<int, int>> es(u.edges().begin(), u.edges().end());
  for (const auto& [a, b] : es) CHECK(es.count({b, a}) == 1);
  CHECK(u.num_edges() % 2 == 0);
}

TEST_CASE("euclidean distances from injected coordinates") {
  EuclideanGraph g({{0.0, 0.0}, {3.0, 4.0}});
  CHECK(g.distance(0, 1) == doctest::Approx(5.0));
  CHECK(g.distance(1, 0) == doctest::Approx(5.0));
  CHECK(g.distance(0, 0) == 0.0);
  CHECK(g.max_distance() == doctest::Approx(5.0));

  EuclideanGraph tri({{0.0, 0.0}, {1.0, 0.0}, {0.3, 2.0}});
  CHECK(tri.distance(0, 2) <= tri.distance(0, 1) + tri.distance(1, 2) + 1e-12);
  CHECK(tri.max_distance() == doctest::Approx(tri.distance(1, 2)));
}

TEST_CASE("euclidean generator fills the square uniformly") {
  const EuclideanGraph g = generate_euclidean(1000, 100.0, 2028);
  double sx = 0.0;
  for (const auto& [x, y] : g.coords()) {
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 100.0);
    REQUIRE(y >= 0.0);
    REQUIRE(y <= 100.0);
    sx += x;
  }
  CHECK(std::abs(sx / 1000.0 - 50.0) < 1.0);
  CHECK_THROWS_AS(generate_euclidean(1, 100.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_euclidean(0, 100.0, 1), std::invalid_argument);
}

TEST_CASE("edge list round trip") {
  auto dir = tmp_dir("graph_io");
  const DirectedGraph g = generate_er(25, 0.15, 3);
  const std::string path = (dir / "g.edges").string();
  save_edge_list(g, path);
  const EdgeListLoad back = load_edge_list(path);
  CHECK(back.graph.num_nodes() == g.num_nodes());
  CHECK(back.graph.edges() == g.edges());
  CHECK(back.duplicate_edges_dropped == 0);
  CHECK(back.self_loops_dropped == 0);

  std::ifstream in(path);
  std::string first;
  std::getline(in, first);
  CHECK(first.rfind("#", 0) == 0);  // header comment survives as a comment
}

TEST_CASE("edge list loader drops and counts junk edges") {
  auto dir = tmp_dir("graph_junk");
  write_file(dir / "j.edges",
             "# comment\n"
             "0 1\n"
             "\n"
             "1 1\n"
             "0 1\n"
             "2 0\n"
             "1 1\n");
  const EdgeListLoad l = load_edge_list((dir / "j.edges").string());
  CHECK(l.graph.num_nodes() == 3);
  CHECK(l.graph.num_edges() == 2);
  CHECK(l.duplicate_edges_dropped == 1);
  CHECK(l.self_loops_dropped == 2);
}

TEST_CASE("edge list loader reports the offending line") {
  auto dir = tmp_dir("graph_bad");
  write_file(dir / "bad.edges", "0 1\n1 2\nnot numbers\n");
  try {
    load_edge_list((dir / "bad.edges").string());
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }

  write_file(dir / "neg.edges", "0 -2\n");
  CHECK_THROWS_AS(load_edge_list((dir / "neg.edges").string()), std::runtime_error);
  write_file(dir / "empty.edges", "# nothing\n\n");
  CHECK_THROWS_AS(load_edge_list((dir / "empty.edges").string()), std::runtime_error);
  CHECK_THROWS_AS(load_edge_list((dir / "missing.edges").string()), std::runtime_error);
}

TEST_CASE("coordinate csv round trip keeps full precision") {
  auto dir = tmp_dir("coords_io");
  const EuclideanGraph g = generate_euclidean(40, 100.0, 11);
  const std::string path = (dir / "c.csv").string();
  save_coords_csv(g, path);
  const EuclideanGraph back = load_coords_csv(path);
  REQUIRE(back.num_nodes() == 40);
  for (int i = 0; i < 40; ++i) {
    CHECK(back.coords()[i].first == g.coords()[i].first);
    CHECK(back.coords()[i].second == g.coords()[i].second);
  }

  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "id,x,y");
}

TEST_CASE("coordinate csv validates header and id order") {
  auto dir = tmp_dir("coords_bad");
  write_file(dir / "h.csv", "x,y\n0,1\n");
  CHECK_THROWS_AS(load_coords_csv((dir / "h.csv").string()), std::runtime_error);
  write_file(dir / "o.csv", "id,x,y\n1,0.0,0.0\n0,1.0,1.0\n");
  CHECK_THROWS_AS(load_coords_csv((dir / "o.csv").string()), std::runtime_error);
  write_file(dir / "t.csv", "id,x,y\n0,0.0\n");
  CHECK_THROWS_AS(load_coords_csv((dir / "t.csv").string()), std::runtime_error);
}

TEST_CASE("graph distribution validation and sampling") {
  GraphDistribution d;
  d.n_min = 10;
  d.n_max = 20;
  d.validate();

  Rng rng(8);
  std::set<int> seen;
  for (int i = 0; i < 500; ++i) {
    const int n = d.sample_n(rng);
    REQUIRE(n >= 10);
    REQUIRE(n <= 20);
    seen.insert(n);
  }
  CHECK(seen.size() == 11);  // inclusive on both ends

  GraphDistribution bad = d;
  bad.n_min = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.n_max = 5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.er_p = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.er_p = -0.1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = d;
  bad.kind = GraphDistribution::Kind::euclidean_uniform;
  bad.scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

}  // TEST_SUITE
