#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "wsopt/config.hpp"
#include "wsopt/eval.hpp"
#include "wsopt/tabular.hpp"
#include "wsopt/trainer.hpp"

namespace fs = std::filesystem;
using namespace wsopt;

namespace {

int default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct NetPair {
  NetSpec higher;
  NetSpec lower;
};

NetPair make_net_specs(const RunConfig& rc) {
  const bool aim = rc.env == "aim";
  NetPair p;
  p.higher.encoder = rc.encoder == "s2v" ? EncoderKind::s2v : EncoderKind::attention;
  p.higher.feat_dim = 5;
  p.higher.embed_dim = 64;
  p.higher.depth = 3;
  p.higher.use_node_context = !aim;
  p.higher.head_layers = 3;
  p.higher.prefix = "high/";
  p.lower = p.higher;
  p.lower.depth = 1;
  p.lower.head_layers = aim ? 2 : 3;
  p.lower.prefix = "low/";
  return p;
}

RunConfig load_run_config(const std::string& path) {
  KvConfig kv = KvConfig::load_file(path);
  kv.apply_env_overrides();
  return parse_run_config(kv);
}

std::uint64_t config_hash_of(const std::string& path) {
  KvConfig kv = KvConfig::load_file(path);
  kv.apply_env_overrides();
  return kv.hash();
}

std::function<std::shared_ptr<const AimEnv>(std::uint64_t)> aim_factory(
    const RunConfig& rc) {
  if (!rc.graph_file.empty()) {
    const auto env = std::make_shared<const AimEnv>(
        load_edge_list(rc.graph_file).graph, rc.horizon, rc.budget);
    return [env](std::uint64_t) { return env; };
  }
  const GraphDistribution dist = rc.graphs;
  const int T = rc.horizon, K = rc.budget;
  return [dist, T, K](std::uint64_t seed) {
    Rng r(derive_seed(seed, {0}));
    const int n = dist.sample_n(r);
    return std::make_shared<const AimEnv>(
        generate_er(n, dist.er_p, derive_seed(seed, {1}), dist.undirected), T, K);
  };
}

std::function<std::shared_ptr<const RpEnv>(std::uint64_t)> rp_factory(
    const RunConfig& rc) {
  const GraphDistribution dist = rc.graphs;
  RpEnv::Config ec;
  ec.horizon = rc.horizon;
  ec.budget = rc.budget;
  ec.coord_scale = dist.scale;
  return [dist, ec](std::uint64_t seed) {
    Rng r(derive_seed(seed, {0}));
    const int n = dist.sample_n(r);
    return std::make_shared<const RpEnv>(
        generate_euclidean(n, dist.scale, derive_seed(seed, {1})), ec);
  };
}

/// Evaluation pins the largest trained size (or the given graph file) so every
/// method sees one fixed instance distribution under shared episode seeds.
std::shared_ptr<const AimEnv> aim_eval_env(const RunConfig& rc, int n_override = 0) {
  if (!rc.graph_file.empty())
    return std::make_shared<const AimEnv>(load_edge_list(rc.graph_file).graph,
                                          rc.horizon, rc.budget);
  const int n = n_override > 0 ? n_override : rc.graphs.n_max;
  return std::make_shared<const AimEnv>(
      generate_er(n, rc.graphs.er_p, derive_seed(rc.train.seed, {0xe0}),
                  rc.graphs.undirected),
      rc.horizon, rc.budget);
}

std::shared_ptr<const RpEnv> rp_eval_env(const RunConfig& rc) {
  RpEnv::Config ec;
  ec.horizon = rc.horizon;
  ec.budget = rc.budget;
  ec.coord_scale = rc.graphs.scale;
  return std::make_shared<const RpEnv>(
      generate_euclidean(rc.graphs.n_max, rc.graphs.scale,
                         derive_seed(rc.train.seed, {0xe0})),
      ec);
}

std::uint64_t eval_seed_of(const RunConfig& rc) {
  return derive_seed(rc.train.seed, {0xe7a1});
}

struct Policy {
  HigherNet higher;
  LowerNet lower;
  ParamStore higher_params;
  ParamStore lower_params;

  explicit Policy(const NetPair& specs) : higher(specs.higher), lower(specs.lower) {}
};

void load_store(ParamStore& store, const NetSpec& spec, const std::string& path) {
  CheckpointLoad ck = load_checkpoint(path);
  if (ck.topology_id != spec.topology_id())
    throw std::invalid_argument("checkpoint topology '" + ck.topology_id +
                                "' does not match configured net '" +
                                spec.topology_id() + "' (" + path + ")");
  store = std::move(ck.store);
}

Policy load_policy(const RunConfig& rc, const std::string& dir,
                   const std::string& tag = "final") {
  const NetPair specs = make_net_specs(rc);
  Policy p(specs);
  load_store(p.higher_params, specs.higher, dir + "/" + tag + "_higher.ck");
  load_store(p.lower_params, specs.lower, dir + "/" + tag + "_lower.ck");
  return p;
}

void emit_report(const EvalReport& report, const std::string& out_dir,
                 const std::string& stem) {
  write_report_csv(report, out_dir + "/" + stem + ".csv");
  const std::string text = format_report_text(report);
  std::ofstream txt(out_dir + "/" + stem + ".txt");
  txt << text;
  std::cout << text;
}

// ---------------------------------------------------------------- commands

int cmd_generate_graphs(const std::string& kind, int n, int count, double p,
                        double scale, bool undirected, std::uint64_t seed,
                        const std::string& out) {
  fs::create_directories(out);
  KvConfig kv;
  kv.set("kind", kind);
  kv.set("n", std::to_string(n));
  kv.set("count", std::to_string(count));
  kv.set("p", std::to_string(p));
  kv.set("scale", std::to_string(scale));
  kv.set("undirected", undirected ? "true" : "false");
  write_manifest(out + "/manifest.json", "generate-graphs", kv.hash(), seed);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(i)});
    char name[64];
    if (kind == "er") {
      std::snprintf(name, sizeof(name), "%s/graph_%03d.edges", out.c_str(), i);
      save_edge_list(generate_er(n, p, s, undirected), name);
    } else {
      std::snprintf(name, sizeof(name), "%s/coords_%03d.csv", out.c_str(), i);
      save_coords_csv(generate_euclidean(n, scale, s), name);
    }
    std::cout << "wrote " << name << "\n";
  }
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out) {
  const RunConfig rc = load_run_config(config_path);
  fs::create_directories(out);
  write_manifest(out + "/manifest.json", "train", config_hash_of(config_path),
                 rc.train.seed);
  const NetPair specs = make_net_specs(rc);
  const HigherNet higher(specs.higher);
  const LowerNet lower(specs.lower);
  std::vector<MetricsRow> metrics;
  if (rc.env == "aim") {
    metrics = train<AimEnv>(higher, lower, aim_factory(rc), rc.train, out,
                            &std::cout)
                  .metrics;
  } else {
    metrics =
        train<RpEnv>(higher, lower, rp_factory(rc), rc.train, out, &std::cout)
            .metrics;
  }
  write_metrics_csv(metrics, out + "/metrics.csv");
  std::cout << "checkpoints and metrics.csv written to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& out,
             const std::string& ckpt_dir, int episodes, int workers,
             bool score_reversed) {
  const RunConfig rc = load_run_config(config_path);
  fs::create_directories(out);
  write_manifest(out + "/manifest.json", "eval", config_hash_of(config_path),
                 rc.train.seed);
  const int eps = episodes > 0 ? episodes : rc.eval_episodes;
  const std::uint64_t seed = eval_seed_of(rc);

  if (rc.env == "aim") {
    const auto env = aim_eval_env(rc);
    EvalReport report;
    if (!ckpt_dir.empty()) {
      Policy p = load_policy(rc, ckpt_dir);
      report = aim_report(env, &p.higher, &p.higher_params, &p.lower,
                          &p.lower_params, eps, seed, workers);
    } else {
      report = aim_report(env, nullptr, nullptr, nullptr, nullptr, eps, seed, workers);
    }
    if (score_reversed) {
      report.methods.push_back(
          {"average-score-reversed",
           eval_aim_heuristic(env, {BudgetKind::average, 2},
                              AimSelector::score_reversed, eps, seed, workers)});
    }
    emit_report(report, out, "report");
  } else {
    const auto env = rp_eval_env(rc);
    EvalReport report;
    if (!ckpt_dir.empty()) {
      Policy p = load_policy(rc, ckpt_dir);
      report = rp_report(env, &p.higher, &p.higher_params, &p.lower, &p.lower_params,
                         eps, seed, workers);
    } else {
      report = rp_report(env, nullptr, nullptr, nullptr, nullptr, eps, seed, workers);
    }
    emit_report(report, out, "report");
  }
  return 0;
}

int cmd_isolate(const std::string& config_path, const std::string& out,
                const std::string& ckpt_dir, const std::string& mode, int episodes,
                int workers) {
  const RunConfig rc = load_run_config(config_path);
  fs::create_directories(out);
  write_manifest(out + "/manifest.json", "isolate-layers",
                 config_hash_of(config_path), rc.train.seed);
  const int eps = episodes > 0 ? episodes : rc.eval_episodes;
  const std::uint64_t seed = eval_seed_of(rc);
  Policy p = load_policy(rc, ckpt_dir);

  EvalReport report;
  if (mode == "fix-lower") {
    if (rc.env == "aim")
      report = isolation_fix_lower(aim_eval_env(rc), p.higher, p.higher_params,
                                   p.lower, p.lower_params, eps, seed, workers);
    else
      report = isolation_fix_lower(rp_eval_env(rc), p.higher, p.higher_params,
                                   p.lower, p.lower_params, eps, seed, workers);
  } else {
    if (rc.env != "aim")
      throw std::invalid_argument(
          "mode fix-higher needs the aim environment (degree/score selectors)");
    report = isolation_fix_higher(aim_eval_env(rc), p.higher, p.higher_params,
                                  p.lower, p.lower_params, eps, seed, workers);
  }
  emit_report(report, out, "isolation_" + mode);
  return 0;
}

int cmd_generalize(const std::string& config_path, const std::string& out,
                   const std::string& ckpt_dir, const std::vector<int>& sizes,
                   int episodes, int workers) {
  const RunConfig rc = load_run_config(config_path);
  if (rc.env != "aim")
    throw std::invalid_argument("generalize sweeps are defined for the aim environment");
  fs::create_directories(out);
  write_manifest(out + "/manifest.json", "generalize", config_hash_of(config_path),
                 rc.train.seed);
  const int eps = episodes > 0 ? episodes : rc.eval_episodes;
  Policy p = load_policy(rc, ckpt_dir);
  const auto rows = generalization_sweep_aim(
      p.higher, p.higher_params, p.lower, p.lower_params, rc.graphs.er_p,
      rc.graphs.undirected, sizes, rc.horizon, rc.budget, eps, eval_seed_of(rc),
      workers);
  for (const auto& row : rows)
    emit_report(row.report, out, "report_n" + std::to_string(row.n));
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out,
               const std::string& what, int episodes, int workers) {
  const RunConfig rc = load_run_config(config_path);
  fs::create_directories(out);
  write_manifest(out + "/manifest.json", "ablate", config_hash_of(config_path),
                 rc.train.seed);
  const int eps = episodes > 0 ? episodes : rc.eval_episodes;
  const std::uint64_t seed = eval_seed_of(rc);

  std::vector<std::pair<std::string, RunConfig>> variants;
  if (what == "sleep-fraction") {
    RunConfig half = rc, third = rc;
    half.train.sleep_fraction = 0.5;
    third.train.sleep_fraction = 1.0 / 3.0;
    variants = {{"sleep-half", half}, {"sleep-third", third}};
  } else if (what == "option-encoding") {
    RunConfig binary = rc, numeric = rc;
    binary.train.lower_option_numeric = false;
    numeric.train.lower_option_numeric = true;
    variants = {{"option-binary", binary}, {"option-numeric", numeric}};
  } else {
    throw std::invalid_argument("unknown ablation: " + what);
  }

  EvalReport report;
  report.env_name = rc.env;
  report.horizon = rc.horizon;
  report.budget = rc.budget;
  report.reference = variants.front().first;
  for (const auto& [name, vrc] : variants) {
    const std::string vdir = out + "/" + name;
    fs::create_directories(vdir);
    const NetPair specs = make_net_specs(vrc);
    const HigherNet higher(specs.higher);
    const LowerNet lower(specs.lower);
    std::cout << "== training variant " << name << "\n";
    PolicyConfig pol;
    pol.lower_option_numeric = vrc.train.lower_option_numeric;
    if (vrc.env == "aim") {
      auto res = train<AimEnv>(higher, lower, aim_factory(vrc), vrc.train, vdir,
                               &std::cout);
      write_metrics_csv(res.metrics, vdir + "/metrics.csv");
      const auto env = aim_eval_env(vrc);
      report.n = env->num_nodes();
      report.methods.push_back(
          {name, eval_learned(env, higher, res.higher_params, lower,
                              res.lower_params, pol, eps, seed, workers)});
    } else {
      auto res =
          train<RpEnv>(higher, lower, rp_factory(vrc), vrc.train, vdir, &std::cout);
      write_metrics_csv(res.metrics, vdir + "/metrics.csv");
      const auto env = rp_eval_env(vrc);
      report.n = env->num_nodes();
      report.methods.push_back(
          {name, eval_learned(env, higher, res.higher_params, lower,
                              res.lower_params, pol, eps, seed, workers)});
    }
  }
  emit_report(report, out, "ablate_" + what);
  return 0;
}

int cmd_verify_tabular(const std::vector<std::string>& toy_files, long episodes,
                       bool alpha_one, double threshold, std::uint64_t seed,
                       const std::string& out) {
  fs::create_directories(out);
  KvConfig kv;
  kv.set("episodes", std::to_string(episodes));
  kv.set("alpha-one", alpha_one ? "true" : "false");
  kv.set("threshold", std::to_string(threshold));
  write_manifest(out + "/manifest.json", "verify-tabular", kv.hash(), seed);

  std::vector<ToySsco> toys;
  if (toy_files.empty())
    toys = bundled_toys();
  else
    for (const auto& f : toy_files) toys.push_back(load_toy(f));

  std::ofstream csv(out + "/verify_tabular.csv");
  csv << "toy,q1_error,q2_error,threshold,greedy_return,optimal_return,pass\n";
  csv << std::setprecision(12);
  bool all_pass = true;
  for (const ToySsco& toy : toys) {
    const QTables oracle = brute_force_q(toy);
    TabularConfig cfg;
    cfg.episodes = episodes;
    cfg.alpha_one = alpha_one;
    cfg.seed = derive_seed(seed, {std::hash<std::string>{}(toy.name)});
    const TabularResult res = tabular_ws_option(toy, cfg, &oracle);
    const auto [e1, e2] = table_errors(toy, res.q, oracle);
    const double greedy = greedy_expected_return(toy, res.q);
    double optimal = -std::numeric_limits<double>::infinity();
    for (int o = 0; o <= toy.budget; ++o)
      optimal = std::max(
          optimal, oracle.q1_at(toy.initial_state, toy.budget, toy.horizon, o));
    const bool pass =
        e1 < threshold && e2 < threshold && std::abs(greedy - optimal) <= 1e-9;
    all_pass = all_pass && pass;
    std::cout << toy.name << ": |q1-q1*| = " << e1 << "  |q2-q2*| = " << e2
              << "  greedy return = " << greedy << "  optimal = " << optimal
              << "  sleep episodes = " << res.sleep_episodes << "  -> "
              << (pass ? "PASS" : "FAIL") << "\n";
    csv << toy.name << ',' << e1 << ',' << e2 << ',' << threshold << ',' << greedy
        << ',' << optimal << ',' << (pass ? 1 : 0) << '\n';
  }
  if (!all_pass) {
    std::cerr << "verify-tabular: at least one toy failed the max-norm check\n";
    return 2;
  }
  return 0;
}

int cmd_plot_data(const std::string& metrics_path, const std::string& config_path,
                  const std::string& ckpt_dir, int episodes, const std::string& out) {
  if (metrics_path.empty() && (config_path.empty() || ckpt_dir.empty()))
    throw std::invalid_argument(
        "plot-data needs --metrics and/or (--config with --checkpoint-dir)");
  fs::create_directories(out);
  KvConfig kv;
  kv.set("metrics", metrics_path);
  kv.set("checkpoint-dir", ckpt_dir);
  std::uint64_t seed = 0;

  if (!metrics_path.empty()) {
    std::ifstream in(metrics_path);
    if (!in) throw std::invalid_argument("cannot open metrics file: " + metrics_path);
    std::string line;
    std::getline(in, line);  // header
    std::map<int, std::pair<double, long>> acc;
    while (std::getline(in, line)) {
      std::istringstream row(line);
      std::string field;
      std::vector<std::string> fields;
      while (std::getline(row, field, ',')) fields.push_back(field);
      if (fields.size() < 3) continue;
      const int epoch = std::stoi(fields[0]);
      acc[epoch].first += std::stod(fields[2]);
      acc[epoch].second += 1;
    }
    std::ofstream plot(out + "/plot_reward.csv");
    plot << "epoch,mean_cumulative_reward\n" << std::setprecision(12);
    for (const auto& [epoch, sums] : acc)
      plot << epoch << ',' << sums.first / static_cast<double>(sums.second) << '\n';
    std::cout << "wrote " << out << "/plot_reward.csv\n";
  }

  if (!config_path.empty() && !ckpt_dir.empty()) {
    const RunConfig rc = load_run_config(config_path);
    seed = rc.train.seed;
    Policy p = load_policy(rc, ckpt_dir);
    std::vector<std::vector<long>> hist;
    if (rc.env == "aim")
      hist = option_histogram(aim_eval_env(rc), p.higher, p.higher_params, p.lower,
                              p.lower_params, {}, episodes, eval_seed_of(rc));
    else
      hist = option_histogram(rp_eval_env(rc), p.higher, p.higher_params, p.lower,
                              p.lower_params, {}, episodes, eval_seed_of(rc));
    write_option_histogram_csv(hist, out + "/plot_allocation.csv");
    std::cout << "wrote " << out << "/plot_allocation.csv\n";
  }
  write_manifest(out + "/manifest.json", "plot-data", kv.hash(), seed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-layer budgeted-selection training and evaluation"};
  app.require_subcommand(1);
  int exit_code = 0;

  // generate-graphs
  std::string gg_kind = "er", gg_out;
  int gg_n = 100, gg_count = 1;
  double gg_p = 0.01, gg_scale = 100.0;
  bool gg_undirected = false;
  std::uint64_t gg_seed = 1;
  auto* gg = app.add_subcommand("generate-graphs", "write sample problem graphs");
  gg->add_option("--kind", gg_kind)->check(CLI::IsMember({"er", "euclidean"}));
  gg->add_option("--n", gg_n)->check(CLI::PositiveNumber);
  gg->add_option("--count", gg_count)->check(CLI::PositiveNumber);
  gg->add_option("--p", gg_p);
  gg->add_option("--scale", gg_scale);
  gg->add_flag("--undirected", gg_undirected);
  gg->add_option("--seed", gg_seed);
  gg->add_option("--out", gg_out)->required();
  gg->callback([&] {
    exit_code = cmd_generate_graphs(gg_kind, gg_n, gg_count, gg_p, gg_scale,
                                    gg_undirected, gg_seed, gg_out);
  });

  // train
  std::string tr_config, tr_out;
  auto* tr = app.add_subcommand("train", "train the two-layer policy");
  tr->add_option("--config", tr_config)->required();
  tr->add_option("--out", tr_out)->required();
  tr->callback([&] { exit_code = cmd_train(tr_config, tr_out); });

  // eval
  std::string ev_config, ev_out, ev_ckpt;
  int ev_episodes = 0, ev_workers = default_workers();
  bool ev_score_rev = false;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint against baselines");
  ev->add_option("--config", ev_config)->required();
  ev->add_option("--out", ev_out)->required();
  ev->add_option("--checkpoint-dir", ev_ckpt);
  ev->add_option("--episodes", ev_episodes);
  ev->add_option("--workers", ev_workers)->check(CLI::PositiveNumber);
  ev->add_flag("--score-reversed", ev_score_rev,
               "also evaluate the reversed-direction score heuristic");
  ev->callback([&] {
    exit_code = cmd_eval(ev_config, ev_out, ev_ckpt, ev_episodes, ev_workers,
                         ev_score_rev);
  });

  // isolate-layers
  std::string il_config, il_out, il_ckpt, il_mode;
  int il_episodes = 0, il_workers = default_workers();
  auto* il = app.add_subcommand("isolate-layers", "swap one layer against baselines");
  il->add_option("--config", il_config)->required();
  il->add_option("--out", il_out)->required();
  il->add_option("--checkpoint-dir", il_ckpt)->required();
  il->add_option("--mode", il_mode)
      ->required()
      ->check(CLI::IsMember({"fix-lower", "fix-higher"}));
  il->add_option("--episodes", il_episodes);
  il->add_option("--workers", il_workers)->check(CLI::PositiveNumber);
  il->callback([&] {
    exit_code =
        cmd_isolate(il_config, il_out, il_ckpt, il_mode, il_episodes, il_workers);
  });

  // generalize
  std::string gz_config, gz_out, gz_ckpt;
  std::vector<int> gz_sizes = {200, 400, 700, 1000};
  int gz_episodes = 0, gz_workers = default_workers();
  auto* gz = app.add_subcommand("generalize", "evaluate one checkpoint across sizes");
  gz->add_option("--config", gz_config)->required();
  gz->add_option("--out", gz_out)->required();
  gz->add_option("--checkpoint-dir", gz_ckpt)->required();
  gz->add_option("--sizes", gz_sizes)->delimiter(',');
  gz->add_option("--episodes", gz_episodes);
  gz->add_option("--workers", gz_workers)->check(CLI::PositiveNumber);
  gz->callback([&] {
    exit_code = cmd_generalize(gz_config, gz_out, gz_ckpt, gz_sizes, gz_episodes,
                               gz_workers);
  });

  // ablate
  std::string ab_config, ab_out, ab_what;
  int ab_episodes = 0, ab_workers = default_workers();
  auto* ab = app.add_subcommand("ablate", "train and compare two config variants");
  ab->add_option("--config", ab_config)->required();
  ab->add_option("--out", ab_out)->required();
  ab->add_option("--what", ab_what)
      ->required()
      ->check(CLI::IsMember({"sleep-fraction", "option-encoding"}));
  ab->add_option("--episodes", ab_episodes);
  ab->add_option("--workers", ab_workers)->check(CLI::PositiveNumber);
  ab->callback([&] {
    exit_code = cmd_ablate(ab_config, ab_out, ab_what, ab_episodes, ab_workers);
  });

  // verify-tabular
  std::vector<std::string> vt_toys;
  long vt_episodes = 1000000;
  bool vt_alpha_one = false;
  double vt_threshold = 1e-2;
  std::uint64_t vt_seed = 1;
  std::string vt_out;
  auto* vt = app.add_subcommand("verify-tabular",
                                "check tabular learning against the exact oracle");
  vt->add_option("--toy", vt_toys, "toy JSON file (repeatable; default: bundled)");
  vt->add_option("--episodes", vt_episodes)->check(CLI::PositiveNumber);
  vt->add_flag("--alpha-one", vt_alpha_one);
  vt->add_option("--threshold", vt_threshold);
  vt->add_option("--seed", vt_seed);
  vt->add_option("--out", vt_out)->required();
  vt->callback([&] {
    exit_code = cmd_verify_tabular(vt_toys, vt_episodes, vt_alpha_one, vt_threshold,
                                   vt_seed, vt_out);
  });

  // plot-data
  std::string pd_metrics, pd_config, pd_ckpt, pd_out;
  int pd_episodes = 100;
  auto* pd = app.add_subcommand("plot-data", "derive plot CSVs from run outputs");
  pd->add_option("--metrics", pd_metrics);
  pd->add_option("--config", pd_config);
  pd->add_option("--checkpoint-dir", pd_ckpt);
  pd->add_option("--episodes", pd_episodes)->check(CLI::PositiveNumber);
  pd->add_option("--out", pd_out)->required();
  pd->callback([&] {
    exit_code = cmd_plot_data(pd_metrics, pd_config, pd_ckpt, pd_episodes, pd_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}
