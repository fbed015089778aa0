#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "wsopt/graph.hpp"
#include "wsopt/trainer.hpp"

namespace wsopt {

/**
 * Flat key=value config file. '#' starts a comment, blank lines are skipped,
 * keys and values are whitespace-trimmed. Environment variables override file
 * entries: WSOPT_SLEEP_FRACTION sets "sleep-fraction" (prefix stripped,
 * lowercased, '_' -> '-'), and may introduce keys absent from the file.
 *
 * Typed getters record which keys were consumed; reject_unknown() then throws
 * listing every key nobody asked for, so typos fail loudly.
 */
class KvConfig {
 public:
  static KvConfig load_file(const std::string& path);
  static KvConfig from_string(const std::string& text);

  void apply_env_overrides(const std::string& prefix = "WSOPT_");

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  /// Throws std::invalid_argument("missing required key: <key>") when absent.
  std::string require_string(const std::string& key) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;

  void reject_unknown() const;
  /// FNV-1a over the sorted key=value entries (post-override); stable across runs.
  std::uint64_t hash() const;
  const std::map<std::string, std::string>& entries() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> accessed_;
};

/**
 * One experiment definition: environment kind, graph distribution, encoder
 * choice, episode shape (T, K), and the full training schedule. The master
 * seed lives in train.seed.
 */
struct RunConfig {
  std::string env;        // "aim" | "rp" (required key)
  std::string encoder;    // "s2v" | "attn"; defaults to s2v for aim, attn for rp
  TrainConfig train;
  GraphDistribution graphs;
  std::string graph_file;  // evaluate/train on one fixed graph instead
  int horizon = 10;
  int budget = 10;
  int eval_episodes = 200;
};

/// Reads every recognized key, validates, and calls reject_unknown().
RunConfig parse_run_config(const KvConfig& cfg);

/// Deterministic JSON manifest (command, config hash, seed, extras). No
/// timestamps: reruns of the same config produce byte-identical files.
void write_manifest(const std::string& path, const std::string& command,
                    std::uint64_t config_hash, std::uint64_t seed,
                    const std::map<std::string, std::string>& extra = {});

}  // namespace wsopt
