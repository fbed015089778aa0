#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "test_util.hpp"
#include "wsopt/graph.hpp"
#include "wsopt/nets.hpp"

using namespace wsopt;
using wsopt_test::fill_patterned;
using wsopt_test::patterned;

namespace {

NetSpec tiny_s2v() {
  NetSpec s;
  s.encoder = EncoderKind::s2v;
  s.feat_dim = 2;
  s.embed_dim = 2;
  s.depth = 2;
  s.use_node_context = false;
  s.head_layers = 2;
  s.prefix = "t/";
  return s;
}

NetSpec tiny_attn() {
  NetSpec s;
  s.encoder = EncoderKind::attention;
  s.feat_dim = 2;
  s.embed_dim = 2;
  s.depth = 1;
  s.use_node_context = true;
  s.head_layers = 2;
  s.prefix = "t/";
  return s;
}

StateView tiny_view(const DirectedGraph* g) {
  StateView v;
  v.features = Tensor(3, 2, {0.5, -1.0, 1.0, 0.25, -0.5, 2.0});
  v.globals = {0.5, 0.25};
  v.graph = g;
  return v;
}

StateView random_view(const DirectedGraph& g, int feat, Rng& rng, bool with_nodes) {
  StateView v;
  v.features = Tensor(g.num_nodes(), feat);
  for (double& x : v.features.data) x = uniform_real(rng, -1, 1);
  v.globals = {uniform01(rng), uniform01(rng)};
  v.graph = &g;
  if (with_nodes) {
    v.current = uniform_int(rng, 0, g.num_nodes() - 1);
    v.start = uniform_int(rng, 0, g.num_nodes() - 1);
  }
  return v;
}

}  // namespace

TEST_SUITE("nets") {

TEST_CASE("topology ids encode the architecture") {
  NetSpec s;
  s.encoder = EncoderKind::s2v;
  s.feat_dim = 5;
  s.embed_dim = 64;
  s.depth = 3;
  s.use_node_context = false;
  s.head_layers = 3;
  s.prefix = "high/";
  CHECK(s.topology_id() == "high/s2v:f5:d64:r3:ctx0:h3");
  s.encoder = EncoderKind::attention;
  s.use_node_context = true;
  s.prefix = "low/";
  s.depth = 1;
  CHECK(s.topology_id() == "low/attn:f5:d64:r1:ctx1:h3");
}

TEST_CASE("init creates the documented parameter set with zero biases") {
  ParamStore store;
  Rng rng(1);
  HigherNet net(tiny_s2v());
  net.init_params(store, rng);
  CHECK(store.names() == std::vector<std::string>{"t/enc/r0/W1", "t/enc/r1/W1", "t/enc/r1/W2",
                                                  "t/head/W0", "t/head/W1", "t/head/b0",
                                                  "t/head/b1", "t/opt/W"});
  // ctx = embed + 2 globals; head input = embed + ctx
  CHECK(store.value("t/head/W0").rows == 6);
  CHECK(store.value("t/head/W0").cols == 2);
  CHECK(store.value("t/head/W1").rows == 2);
  CHECK(store.value("t/head/W1").cols == 1);
  for (double b : store.value("t/head/b0").data) CHECK(b == 0.0);
  for (double v : store.value("t/enc/r0/W1").data) CHECK(std::abs(v) <= 1.0 / std::sqrt(2.0));

  ParamStore ls;
  LowerNet lnet(tiny_attn());
  lnet.init_params(ls, rng);
  CHECK(ls.has("t/enc/Win"));
  CHECK(ls.has("t/enc/l0/Wq"));
  CHECK(ls.has("t/node/W0"));
  CHECK(ls.has("t/null/W0"));
  // ctx1: ctx = embed + 2*embed + 2 = 8; node head input = embed + 8
  CHECK(ls.value("t/node/W0").rows == 10);
  CHECK(ls.value("t/null/W0").rows == 10);
}

TEST_CASE("s2v encode matches the hand-unrolled two-round recursion") {
  // 3 nodes, edges (0,1),(1,2),(2,0),(0,2): in-nbrs 0:[2] 1:[0] 2:[1,0]
  DirectedGraph g(3, {{0, 1}, {1, 2}, {2, 0}, {0, 2}});
  ParamStore store;
  Rng rng(1);
  Encoder enc(tiny_s2v());
  enc.init_params(store, rng);
  fill_patterned(store, {"t/enc/r0/W1", "t/enc/r1/W1", "t/enc/r1/W2"});

  StateView v = tiny_view(&g);
  Tape tape(&store);
  const Tensor& h = tape.value(enc.encode(tape, v));
  REQUIRE(h.rows == 3);
  REQUIRE(h.cols == 2);
  // frozen from an independent reference computation of the same recursion
  const double want[3][2] = {{0.0, 0.3046875}, {0.0625, 0.125}, {1.5625, 0.0}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(h.at(i, j) == doctest::Approx(want[i][j]).epsilon(1e-13));
}

TEST_CASE("higher net q_options matches frozen forward values") {
  DirectedGraph g(3, {{0, 1}, {1, 2}, {2, 0}, {0, 2}});
  ParamStore store;
  Rng rng(1);
  HigherNet net(tiny_s2v());
  net.init_params(store, rng);
  fill_patterned(store, {"t/enc/r0/W1", "t/enc/r1/W1", "t/enc/r1/W2", "t/opt/W", "t/head/W0",
                         "t/head/b0", "t/head/W1", "t/head/b1"});

  const auto q = net.q_options(store, tiny_view(&g), {0.0, 1.0, 2.0});
  REQUIRE(q.size() == 3);
  CHECK(q[0] == doctest::Approx(0.23828124999999994).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(0.18513997395833334).epsilon(1e-12));
  CHECK(q[2] == doctest::Approx(0.20076497395833331).epsilon(1e-12));
  // the option input actually reaches the head
  CHECK(q[0] != q[2]);
}

TEST_CASE("attention encode matches frozen forward values") {
  ParamStore store;
  Rng rng(1);
  NetSpec spec = tiny_attn();
  Encoder enc(spec);
  enc.init_params(store, rng);
  fill_patterned(store, {"t/enc/Win", "t/enc/l0/Wq", "t/enc/l0/Wk", "t/enc/l0/Wv", "t/enc/l0/Wo",
                         "t/enc/l0/Wf1", "t/enc/l0/Wf2"});

  StateView v = tiny_view(nullptr);
  v.current = 1;
  v.start = 0;
  Tape tape(&store);
  const Tensor& h = tape.value(enc.encode(tape, v));
  const double want[3][2] = {{-0.5029107354117415, -0.6458040439632073},
                             {-0.5706391943547104, -0.3961300499431772},
                             {0.5527866179955745, 1.1442023352368207}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 2; ++j) CHECK(h.at(i, j) == doctest::Approx(want[i][j]).epsilon(1e-9));
}

TEST_CASE("lower net q_all matches frozen forward values") {
  ParamStore store;
  Rng rng(1);
  LowerNet net(tiny_attn());
  net.init_params(store, rng);
  fill_patterned(store,
                 {"t/enc/Win", "t/enc/l0/Wq", "t/enc/l0/Wk", "t/enc/l0/Wv", "t/enc/l0/Wo",
                  "t/enc/l0/Wf1", "t/enc/l0/Wf2", "t/opt/W", "t/node/W0", "t/node/b0",
                  "t/node/W1", "t/node/b1", "t/null/W0", "t/null/b0", "t/null/W1", "t/null/b1"});

  StateView v = tiny_view(nullptr);
  v.current = 1;
  v.start = 0;
  const auto q = net.q_all(store, v, 2.0);
  REQUIRE(q.size() == 4);
  CHECK(q[0] == doctest::Approx(-0.46865577996742186).epsilon(1e-9));
  CHECK(q[1] == doctest::Approx(-0.4248100842519774).epsilon(1e-9));
  CHECK(q[2] == doctest::Approx(-0.7026301285040049).epsilon(1e-9));
  CHECK(q[3] == doctest::Approx(0.6915860734519065).epsilon(1e-9));

  Tape tape(&store);
  for (int a = 0; a < 4; ++a)
    CHECK(tape.value(net.q_action(tape, v, 2.0, a)).at(0, 0) == doctest::Approx(q[a]).epsilon(1e-12));
  CHECK_THROWS_AS(net.q_action(tape, v, 2.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(net.q_action(tape, v, 2.0, -1), std::invalid_argument);
}

TEST_CASE("identical feature rows on an edgeless graph score identically") {
  DirectedGraph g(4, {});
  NetSpec spec = tiny_s2v();
  spec.feat_dim = 3;
  ParamStore store;
  Rng rng(7);
  LowerNet net(spec);
  net.init_params(store, rng);

  StateView v;
  v.features = Tensor(4, 3, {0.2, -0.4, 0.9, 0.2, -0.4, 0.9, 0.2, -0.4, 0.9, 0.2, -0.4, 0.9});
  v.globals = {0.3, 0.7};
  v.graph = &g;
  const auto q = net.q_all(store, v, 1.0);
  REQUIRE(q.size() == 5);
  CHECK(q[0] == q[1]);
  CHECK(q[1] == q[2]);
  CHECK(q[2] == q[3]);
}

TEST_CASE("one parameter set serves any graph size") {
  NetSpec hs = tiny_s2v();
  hs.feat_dim = 5;
  hs.embed_dim = 8;
  ParamStore store;
  Rng rng(3);
  HigherNet hi(hs);
  LowerNet lo(hs);
  hi.init_params(store, rng);
  const std::size_t before = store.total_scalars();

  for (int n : {50, 200}) {
    DirectedGraph g = generate_er(n, 0.05, 100 + n);
    Rng vr(n);
    StateView v = random_view(g, 5, vr, false);
    CHECK(std::isfinite(hi.q_options(store, v, {1.0})[0]));
  }
  CHECK(store.total_scalars() == before);  // no per-size parameters appeared

  ParamStore ls;
  lo.init_params(ls, rng);
  for (int n : {50, 200}) {
    DirectedGraph g = generate_er(n, 0.05, 200 + n);
    Rng vr(n);
    StateView v = random_view(g, 5, vr, false);
    CHECK(static_cast<int>(lo.q_all(ls, v, 1.0).size()) == n + 1);
  }
}

TEST_CASE("both encoders are permutation equivariant down to the bit") {
  for (EncoderKind kind : {EncoderKind::s2v, EncoderKind::attention}) {
    NetSpec hs;
    hs.encoder = kind;
    hs.feat_dim = 4;
    hs.embed_dim = 6;
    hs.depth = 2;
    hs.use_node_context = (kind == EncoderKind::attention);
    hs.head_layers = 2;
    hs.prefix = "t/";

    ParamStore hstore, lstore;
    Rng rng(55);
    HigherNet hi(hs);
    LowerNet lo(hs);
    hi.init_params(hstore, rng);
    lo.init_params(lstore, rng);

    const int n = 12;
    DirectedGraph g = generate_er(n, 0.3, 5);
    Rng vr(9);
    StateView v = random_view(g, 4, vr, hs.use_node_context);

    const auto q_hi = hi.q_options(hstore, v, {0.0, 1.0, 2.0});
    const auto q_lo = lo.q_all(lstore, v, 2.0);

    Rng prng(1234);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_int(prng, 0, i)]);

      std::vector<std::pair<int, int>> edges;
      for (int u = 0; u < n; ++u)
        for (int w : g.out_neighbors(u)) edges.push_back({perm[u], perm[w]});
      DirectedGraph pg(n, edges);

      StateView pv;
      pv.features = Tensor(n, 4);
      for (int u = 0; u < n; ++u)
        for (int c = 0; c < 4; ++c) pv.features.at(perm[u], c) = v.features.at(u, c);
      pv.globals = v.globals;
      pv.graph = &pg;
      if (hs.use_node_context) {
        pv.current = perm[v.current];
        pv.start = perm[v.start];
      }

      const auto q_hi_p = hi.q_options(hstore, pv, {0.0, 1.0, 2.0});
      for (std::size_t i = 0; i < q_hi.size(); ++i) CHECK(q_hi_p[i] == q_hi[i]);

      const auto q_lo_p = lo.q_all(lstore, pv, 2.0);
      for (int u = 0; u < n; ++u) CHECK(q_lo_p[perm[u]] == q_lo[u]);
      CHECK(q_lo_p[n] == q_lo[n]);  // null entry stays put
    }
  }
}

TEST_CASE("all four network shapes pass finite-difference gradient checks") {
  struct Case {
    EncoderKind kind;
    bool ctx;
    bool lower;
  };
  const Case cases[] = {{EncoderKind::s2v, false, false},
                        {EncoderKind::s2v, false, true},
                        {EncoderKind::attention, true, false},
                        {EncoderKind::attention, true, true}};
  int idx = 0;
  for (const Case& c : cases) {
    CAPTURE(idx);
    NetSpec s;
    s.encoder = c.kind;
    s.feat_dim = 5;
    s.embed_dim = 6;
    s.depth = 2;
    s.use_node_context = c.ctx;
    s.head_layers = 2;
    s.prefix = "t/";

    ParamStore store;
    Rng rng(31 + idx);
    const int n = 6;
    DirectedGraph g = generate_er(n, 0.4, 41 + idx);
    Rng vr(51 + idx);
    StateView v = random_view(g, 5, vr, c.ctx);

    HigherNet hi(s);
    LowerNet lo(s);
    if (c.lower)
      lo.init_params(store, rng);
    else
      hi.init_params(store, rng);

    auto forward = [&]() {
      Tape tape(&store);
      return c.lower ? tape.value(lo.q_action(tape, v, 2.0, 3)).at(0, 0)
                     : tape.value(hi.q_node(tape, v, 2.0)).at(0, 0);
    };
    auto backward = [&]() {
      Tape tape(&store);
      tape.backward(c.lower ? lo.q_action(tape, v, 2.0, 3) : hi.q_node(tape, v, 2.0));
    };
    Rng probe(61 + idx);
    auto rep = check_gradients(store, forward, backward, 40, probe, 1e-4);
    CHECK(rep.ok);
    ++idx;
  }
}

TEST_CASE("masked argmax semantics") {
  CHECK(masked_argmax({1.0, 3.0, 3.0, 2.0}, {0, 0, 0, 0}) == 1);  // ties -> lowest
  CHECK(masked_argmax({0.0, 0.0, 0.0}, {0, 0, 0}) == 0);
  CHECK(masked_argmax({1.0, 5.0, 2.0}, {0, 1, 0}) == 2);
  CHECK(masked_argmax({1.0, 5.0, 2.0}, {1, 1, 1}) == 0);  // everything masked
  CHECK(masked_argmax({-4.0, -2.0}, {0, 0}) == 1);
  CHECK_THROWS_AS(masked_argmax({1.0}, {0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(masked_argmax({}, {}), std::invalid_argument);
}

TEST_CASE("views that violate the contract are rejected") {
  ParamStore store;
  Rng rng(2);

  // s2v needs a graph
  HigherNet hi(tiny_s2v());
  hi.init_params(store, rng);
  StateView v = tiny_view(nullptr);
  CHECK_THROWS_AS(hi.q_options(store, v, {1.0}), std::invalid_argument);

  // feature width must match the spec
  DirectedGraph g(3, {{0, 1}});
  StateView wide = tiny_view(&g);
  wide.features = Tensor(3, 4);
  CHECK_THROWS_AS(hi.q_options(store, wide, {1.0}), std::invalid_argument);

  // exactly two global scalars
  StateView g3 = tiny_view(&g);
  g3.globals = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(hi.q_options(store, g3, {1.0}), std::invalid_argument);

  // node context requested but absent from the view
  ParamStore ls;
  LowerNet lo(tiny_attn());
  lo.init_params(ls, rng);
  StateView noctx = tiny_view(nullptr);
  CHECK_THROWS_AS(lo.q_all(ls, noctx, 1.0), std::invalid_argument);
}

}  // TEST_SUITE
