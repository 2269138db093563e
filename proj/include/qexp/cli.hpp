// Copyright 2026 The qexp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line front end. Kept in a header so tests can drive it in-process;
// tools/qexp.cpp is a one-line main.

#include "qexp/config.hpp"
#include "qexp/experiments.hpp"
#include "qexp/parallel.hpp"
#include "qexp/sampling.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace qexp::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kConfigError = 3, kIoError = 4 };

/// Master seed used when neither --seed nor the config file sets one.
inline constexpr std::uint64_t kDefaultSeed = 42;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::optional<std::string> n_grid, n, coeffs, p, q, trials, seed, threads;
};

struct Invocation {
  std::string subcommand;
  std::optional<std::string> config_path;
  Overrides overrides;
  std::string output_dir = ".";
  bool quick = false;
  std::string sample_kind = "ginibre";
};

// ---------------------------------------------------------------------------
// Value parsing

inline std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw UsageError("empty entry in list '" + s + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

inline double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string(what) + ": '" + s + "' is not a number");
}

inline long long parse_int(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string(what) + ": '" + s + "' is not an integer");
}

inline std::uint64_t parse_u64(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    if (!s.empty() && s[0] != '-') {
      const unsigned long long v = std::stoull(s, &pos);
      if (pos == s.size()) return v;
    }
  } catch (const std::exception&) {
  }
  throw UsageError(std::string(what) + ": '" + s + "' is not a non-negative integer");
}

inline double parse_q(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "infinity") return kInf;
  return parse_double(s, "--q");
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// --coeffs: a comma list of reals, or a JSON file holding {"coeffs": ...},
/// {"blocks": ...}, {"coeff_matrix": ...} or a bare list of scalars.
inline void apply_coeffs_flag(ExperimentConfig& cfg, const std::string& v) {
  cfg.coeffs.clear();
  cfg.blocks.clear();
  cfg.coeff_matrix.resize(0, 0);
  const bool is_file = v.size() > 5 && v.compare(v.size() - 5, 5, ".json") == 0;
  if (!is_file) {
    for (const auto& s : split_commas(v)) cfg.coeffs.emplace_back(parse_double(s, "--coeffs"), 0.0);
    return;
  }
  const nlohmann::json j = read_json_file(v);
  try {
    if (j.is_array()) {
      for (const auto& z : j) cfg.coeffs.push_back(complex_from_json(z));
    } else if (j.is_object()) {
      apply_coefficients_json(cfg, j);
    } else {
      throw ConfigError("'" + v + "': expected a list or an object");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("'" + v + "': " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError("'" + v + "': " + e.what());
  }
}

inline void clear_coefficients(ExperimentConfig& cfg) {
  cfg.n = 0;
  cfg.coeffs.clear();
  cfg.blocks.clear();
  cfg.coeff_matrix.resize(0, 0);
}

/// defaults <- config file <- flags. A layer that mentions the term count or
/// any coefficient key replaces the coefficient set as a whole.
inline ExperimentConfig merge_config(ExperimentKind kind, const Invocation& inv,
                                     const std::optional<nlohmann::json>& file) {
  ExperimentConfig cfg = default_config(kind, inv.quick);
  cfg.master_seed = kDefaultSeed;
  if (file) {
    try {
      if (file->is_object() && (file->contains("n") || file->contains("coeffs") || file->contains("blocks") ||
                                file->contains("coeff_matrix"))) {
        clear_coefficients(cfg);
      }
      apply_config_json(cfg, *file);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  const Overrides& o = inv.overrides;
  if (o.n || o.coeffs) clear_coefficients(cfg);
  if (o.n_grid) {
    cfg.n_grid.clear();
    for (const auto& s : split_commas(*o.n_grid)) cfg.n_grid.push_back(parse_int(s, "--N"));
  }
  if (o.n) cfg.n = static_cast<int>(parse_int(*o.n, "--n"));
  if (o.coeffs) apply_coeffs_flag(cfg, *o.coeffs);
  if (o.p) {
    cfg.p.clear();
    for (const auto& s : split_commas(*o.p)) cfg.p.push_back(parse_double(s, "--p"));
  }
  if (o.q) cfg.q = parse_q(*o.q);
  if (o.trials) cfg.trials = parse_u64(*o.trials, "--trials");
  if (o.seed) cfg.master_seed = parse_u64(*o.seed, "--seed");
  // Worker count: flag, then config file, then QEXP_THREADS.
  if (o.threads) {
    cfg.threads = static_cast<unsigned>(parse_u64(*o.threads, "--threads"));
  } else if (!(file && file->is_object() && file->contains("threads"))) {
    cfg.threads = default_thread_count();
  }
  if (cfg.threads == 0) throw UsageError("--threads must be >= 1");
  try {
    resolve_config(cfg, kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Hashing and manifests

inline std::string hex_digest(const EVP_MD* md, const std::string& data) {
  unsigned char buf[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), buf, &len, md, nullptr) != 1) throw std::runtime_error("digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[buf[i] >> 4];
    out += hex[buf[i] & 15];
  }
  return out;
}

/// Object id git assigns to a file with these contents.
inline std::string git_blob_id(const std::string& contents) {
  return hex_digest(EVP_sha1(), "blob " + std::to_string(contents.size()) + '\0' + contents);
}

inline std::string sha256_hex(const std::string& data) { return hex_digest(EVP_sha256(), data); }

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << contents;
  out.close();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

struct Written {
  std::string file;
  std::string content_id;
};

inline void write_manifest(const std::filesystem::path& dir, const std::string& stem, const std::string& subcommand,
                           const nlohmann::json& resolved, std::uint64_t seed,
                           std::chrono::system_clock::time_point started, double seconds,
                           const std::vector<Written>& files, bool passed) {
  nlohmann::ordered_json m;
  m["subcommand"] = subcommand;
  m["resolved_config"] = resolved;
  m["master_seed"] = seed;
  m["version"] = kVersion;
  m["started_at"] = utc_timestamp(started);
  m["duration_seconds"] = seconds;
  m["config_hash"] = "sha256:" + sha256_hex(resolved.dump());
  nlohmann::ordered_json outs = nlohmann::ordered_json::array();
  for (const auto& w : files) outs.push_back({{"file", w.file}, {"content_id", w.content_id}});
  m["outputs"] = outs;
  m["passed"] = passed;
  write_file(dir / (stem + ".manifest.json"), m.dump(2) + "\n");
}

/// Rows whose pass column is 0, echoed to stderr.
inline void report_failures(std::ostream& err, const std::string& stem, const CsvTable& t) {
  const auto& h = t.header();
  if (h.empty() || h.back() != "pass") return;
  bool first = true;
  for (const auto& row : t.rows()) {
    if (row.back() != "0") continue;
    if (first) {
      err << stem << ": failed rows\n";
      std::string line;
      for (std::size_t i = 0; i < h.size(); ++i) line += (i ? "," : "") + h[i];
      err << "  " << line << "\n";
      first = false;
    }
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) line += (i ? "," : "") + row[i];
    err << "  " << line << "\n";
  }
}

// ---------------------------------------------------------------------------
// Subcommands

inline const std::vector<std::pair<std::string, ExperimentKind>>& experiment_commands() {
  static const std::vector<std::pair<std::string, ExperimentKind>> cmds{
      {"chi", ExperimentKind::chi},
      {"lemma", ExperimentKind::lemma},
      {"gaussian-bound", ExperimentKind::gaussian_bound},
      {"decouple", ExperimentKind::decouple},
      {"theorem", ExperimentKind::theorem},
      {"concentration", ExperimentKind::concentration},
      {"matrix-coeff", ExperimentKind::matrix_coeff},
      {"double-sum", ExperimentKind::double_sum},
  };
  return cmds;
}

inline bool run_one(ExperimentKind kind, const Invocation& inv, const std::optional<nlohmann::json>& file,
                    std::ostream& out, std::ostream& err) {
  const ExperimentConfig cfg = merge_config(kind, inv, file);
  const std::filesystem::path dir(inv.output_dir);
  ensure_dir(dir);
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentOutput res;
  try {
    res = run_experiment(kind, cfg);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  } catch (const InvalidDimension& e) {
    throw ConfigError(e.what());
  } catch (const SizeCapExceeded& e) {
    throw ConfigError(e.what());
  } catch (const DegenerateConfig& e) {
    throw ConfigError(e.what());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::vector<Written> files;
  for (const auto& [stem, table] : res.tables) {
    const std::string text = table.str();
    write_file(dir / (stem + ".csv"), text);
    files.push_back({stem + ".csv", git_blob_id(text)});
  }
  const std::string stem = file_stem(kind);
  write_manifest(dir, stem, to_string(kind), to_json(res.resolved), res.resolved.master_seed, started, seconds, files,
                 res.passed);
  out << to_string(kind) << ": " << (res.passed ? "pass" : "FAIL") << " (" << (dir / (stem + ".csv")).string()
      << ", " << format_number(seconds) << " s)\n";
  if (!res.passed) {
    for (const auto& [s, table] : res.tables) report_failures(err, s, table);
  }
  return res.passed;
}

inline void run_sample(const Invocation& inv, const std::optional<nlohmann::json>& file, std::ostream& out) {
  ExperimentConfig cfg;
  cfg.n_grid = {4};
  cfg.master_seed = kDefaultSeed;
  if (file) {
    try {
      apply_config_json(cfg, *file);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
  if (inv.overrides.n_grid) cfg.n_grid = {parse_int(split_commas(*inv.overrides.n_grid).front(), "--N")};
  if (inv.overrides.seed) cfg.master_seed = parse_u64(*inv.overrides.seed, "--seed");
  const Eigen::Index n = cfg.n_grid.front();
  if (n < 1) throw ConfigError("sample: N must be >= 1");
  const std::filesystem::path dir(inv.output_dir);
  ensure_dir(dir);
  const auto started = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const SeedStream s(cfg.master_seed);
  ComplexMatrix m;
  if (inv.sample_kind == "ginibre") {
    m = sample_ginibre(n, s);
  } else if (inv.sample_kind == "haar") {
    m = sample_haar_unitary(n, s);
  } else {
    m = modulus(sample_ginibre(n, s));
  }
  const std::string text = matrix_to_csv(m).str();
  write_file(dir / "sample.csv", text);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const nlohmann::json resolved{{"N", n}, {"kind", inv.sample_kind}, {"seed", cfg.master_seed}};
  write_manifest(dir, "sample", "sample", resolved, cfg.master_seed, started, seconds,
                 {{"sample.csv", git_blob_id(text)}}, true);
  out << "sample: " << inv.sample_kind << " " << dims_string(n, n) << " (" << (dir / "sample.csv").string() << ")\n";
}

inline int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  try {
    std::optional<nlohmann::json> file;
    if (inv.config_path) file = read_json_file(*inv.config_path);
    if (inv.subcommand == "sample") {
      run_sample(inv, file, out);
      return kOk;
    }
    bool ok = true;
    for (const auto& [name, kind] : experiment_commands()) {
      if (inv.subcommand == name || inv.subcommand == "all") ok = run_one(kind, inv, file, out, err) && ok;
    }
    return ok ? kOk : kCheckFailed;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kIoError;
  } catch (const NonConvergence& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

/// Parses argv into `inv`. Returns an exit code when the process should stop
/// here (help, usage error), nullopt to go on and run.
inline std::optional<int> parse_args(int argc, const char* const* argv, Invocation& inv, std::ostream& out,
                                     std::ostream& err) {
  CLI::App app{"qexp: Monte Carlo checks for random unitary tensor sums", "qexp"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  auto common = [&](CLI::App* sub) {
    auto& o = inv.overrides;
    sub->add_option("--N", o.n_grid, "Matrix sizes, comma separated");
    sub->add_option("--n", o.n, "Number of terms");
    sub->add_option("--coeffs", o.coeffs, "Coefficients: comma list, or a .json file for blocks/arrays");
    sub->add_option("--p", o.p, "Moment exponents, comma separated");
    sub->add_option("--q", o.q, "Schatten index (number or inf)");
    sub->add_option("--trials", o.trials, "Samples per grid point");
    sub->add_option("--seed", o.seed, "Master seed (default 42)");
    sub->add_option("--threads", o.threads, "Worker threads (default $QEXP_THREADS or 1)");
    sub->add_option("--out", inv.output_dir, "Output directory")->capture_default_str();
    sub->add_flag("--quick", inv.quick, "Small pinned grids");
    sub->add_option("--config", inv.config_path, "JSON config file");
  };

  auto* sample = app.add_subcommand("sample", "Dump one sampled matrix as CSV");
  common(sample);
  sample->add_option("--kind", inv.sample_kind, "ginibre, haar or modulus")
      ->check(CLI::IsMember({"ginibre", "haar", "modulus"}))
      ->capture_default_str();
  const std::vector<std::pair<std::string, std::string>> help{
      {"chi", "Estimate chi_N three ways"},
      {"lemma", "Unitary versus Gaussian tensor sums"},
      {"gaussian-bound", "Trace moment bound for Gaussian tensor sums"},
      {"decouple", "Decoupling inequality and rotation invariance"},
      {"theorem", "Operator norm sweep over N"},
      {"concentration", "Moments of ||Y|| against 2 + O(sqrt(p/N))"},
      {"matrix-coeff", "Sweep with matrix coefficients"},
      {"double-sum", "Sweep over double sums"},
  };
  for (const auto& [name, text] : help) common(app.add_subcommand(name, text));
  common(app.add_subcommand("all", "Run every experiment"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  for (const auto* sub : app.get_subcommands()) inv.subcommand = sub->get_name();
  return std::nullopt;
}

inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Invocation inv;
  if (auto code = parse_args(argc, argv, inv, out, err)) return *code;
  return run(inv, out, err);
}

}  // namespace qexp::cli
