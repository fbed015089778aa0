#include "wsopt/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

extern char** environ;

namespace wsopt {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

KvConfig KvConfig::from_string(const std::string& text) {
  KvConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    if (cfg.values_.count(key))
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

KvConfig KvConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

void KvConfig::apply_env_overrides(const std::string& prefix) {
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.compare(0, prefix.size(), prefix) != 0) continue;
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos || eq <= prefix.size()) continue;
    std::string key = entry.substr(prefix.size(), eq - prefix.size());
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
      return c == '_' ? '-' : static_cast<char>(std::tolower(c));
    });
    values_[key] = entry.substr(eq + 1);
  }
}

bool KvConfig::has(const std::string& key) const {
  accessed_.insert(key);
  return values_.count(key) > 0;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string KvConfig::require_string(const std::string& key) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end())
    throw std::invalid_argument("missing required key: " + key);
  return it->second;
}

long KvConfig::get_int(const std::string& key, long fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != it->second.size() || it->second.empty())
    throw std::invalid_argument("key '" + key + "': expected integer, got '" +
                                it->second + "'");
  return v;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(it->second, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != it->second.size() || it->second.empty())
    throw std::invalid_argument("key '" + key + "': expected number, got '" +
                                it->second + "'");
  return v;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = it->second;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("key '" + key + "': expected boolean, got '" +
                              it->second + "'");
}

std::uint64_t KvConfig::get_seed(const std::string& key,
                                 std::uint64_t fallback) const {
  accessed_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(it->second, &pos, 0);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != it->second.size() || it->second.empty())
    throw std::invalid_argument("key '" + key + "': expected unsigned integer, got '" +
                                it->second + "'");
  return v;
}

void KvConfig::reject_unknown() const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    (void)value;
    if (!accessed_.count(key)) {
      if (!unknown.empty()) unknown += ", ";
      unknown += key;
    }
  }
  if (!unknown.empty())
    throw std::invalid_argument("unknown config keys: " + unknown);
}

std::uint64_t KvConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  const auto mix = [&h](const std::string& s) {
    for (char c : s) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
  };
  for (const auto& [key, value] : values_) {
    mix(key);
    mix("=");
    mix(value);
    mix("\n");
  }
  return h;
}

RunConfig parse_run_config(const KvConfig& cfg) {
  RunConfig rc;
  rc.env = cfg.require_string("env");
  if (rc.env != "aim" && rc.env != "rp")
    throw std::invalid_argument("key 'env': expected aim or rp, got '" + rc.env + "'");
  const bool aim = rc.env == "aim";

  rc.encoder = cfg.get_string("encoder", aim ? "s2v" : "attn");
  if (rc.encoder != "s2v" && rc.encoder != "attn")
    throw std::invalid_argument("key 'encoder': expected s2v or attn, got '" +
                                rc.encoder + "'");

  rc.graphs.kind = aim ? GraphDistribution::Kind::erdos_renyi
                       : GraphDistribution::Kind::euclidean_uniform;
  rc.graphs.n_min = static_cast<int>(cfg.get_int("n-min", aim ? 50 : 20));
  rc.graphs.n_max = static_cast<int>(cfg.get_int("n-max", aim ? 100 : 50));
  rc.graphs.er_p = cfg.get_double("er-p", 0.01);
  rc.graphs.undirected = cfg.get_bool("undirected", false);
  rc.graphs.scale = cfg.get_double("scale", 100.0);
  rc.graph_file = cfg.get_string("graph-file", "");
  rc.graphs.validate();

  rc.horizon = static_cast<int>(cfg.get_int("horizon", 10));
  rc.budget = static_cast<int>(cfg.get_int("budget", 10));
  if (rc.horizon < 1) throw std::invalid_argument("key 'horizon': must be >= 1");
  if (rc.budget < 1) throw std::invalid_argument("key 'budget': must be >= 1");
  rc.eval_episodes = static_cast<int>(cfg.get_int("eval-episodes", 200));
  if (rc.eval_episodes < 1)
    throw std::invalid_argument("key 'eval-episodes': must be >= 1");

  TrainConfig& t = rc.train;
  t.lr_high = aim ? 1e-3 : 1e-2;
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.episodes_per_epoch =
      static_cast<int>(cfg.get_int("episodes-per-epoch", t.episodes_per_epoch));
  t.sleep_fraction = cfg.get_double("sleep-fraction", t.sleep_fraction);
  t.gamma = cfg.get_double("gamma", t.gamma);
  t.lr_high = cfg.get_double("lr-high", t.lr_high);
  t.lr_low = cfg.get_double("lr-low", t.lr_low);
  t.batch = static_cast<int>(cfg.get_int("batch", t.batch));
  t.target_sync_every =
      static_cast<int>(cfg.get_int("target-sync-every", t.target_sync_every));
  t.eps0 = cfg.get_double("eps0", t.eps0);
  t.eps_decay = cfg.get_double("eps-decay", t.eps_decay);
  t.eps_floor = cfg.get_double("eps-floor", t.eps_floor);
  t.eps1_override = cfg.get_double("eps1", t.eps1_override);
  t.eps2_override = cfg.get_double("eps2", t.eps2_override);
  t.updates_per_pass =
      static_cast<int>(cfg.get_int("updates-per-pass", t.updates_per_pass));
  t.n_sims = static_cast<int>(cfg.get_int("n-sims", t.n_sims));
  t.gain_exponent_literal =
      cfg.get_bool("gain-exponent-literal", t.gain_exponent_literal);
  t.lower_option_numeric = cfg.get_bool("option-numeric", t.lower_option_numeric);
  t.grad_clip = cfg.get_double("grad-clip", t.grad_clip);
  t.m1_capacity = static_cast<int>(cfg.get_int("m1-capacity", t.m1_capacity));
  t.m2_capacity = static_cast<int>(cfg.get_int("m2-capacity", t.m2_capacity));
  t.seed = cfg.get_seed("seed", t.seed);
  t.validate();

  cfg.reject_unknown();
  return rc;
}

void write_manifest(const std::string& path, const std::string& command,
                    std::uint64_t config_hash, std::uint64_t seed,
                    const std::map<std::string, std::string>& extra) {
  nlohmann::json j;
  j["command"] = command;
  char hex[19];
  std::snprintf(hex, sizeof(hex), "0x%016llx",
                static_cast<unsigned long long>(config_hash));
  j["config-hash"] = hex;
  j["seed"] = seed;
  for (const auto& [k, v] : extra) j[k] = v;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace wsopt
