#pragma once

// Experiment harness behind the command-line tool: scenario configuration,
// test signals, method dispatch, error metrics, seeded sweeps and
// plot-data emission. All output is deterministic for a fixed config.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsr/errors.hpp"
#include "bsr/fourier.hpp"
#include "bsr/inference.hpp"
#include "bsr/io.hpp"
#include "bsr/reprojection.hpp"

namespace bsr::harness {

enum class Estimator { fourier, gegenbauer, bsr, gbsr };

inline const std::vector<Estimator>& all_estimators() {
  static const std::vector<Estimator> all{Estimator::fourier, Estimator::gegenbauer, Estimator::bsr,
                                          Estimator::gbsr};
  return all;
}

inline const char* estimator_name(Estimator e) {
  switch (e) {
    case Estimator::fourier: return "fourier";
    case Estimator::gegenbauer: return "gegenbauer";
    case Estimator::bsr: return "bsr";
    case Estimator::gbsr: return "gbsr";
  }
  return "?";
}

inline Estimator parse_estimator(const std::string& s) {
  for (Estimator e : all_estimators()) {
    if (s == estimator_name(e)) return e;
  }
  throw ConfigError("methods", "unknown method '" + s + "' (expected fourier, gegenbauer, bsr or gbsr)");
}

// ---------------------------------------------------------------------------
// Test signals

/// exp_sin: e^x sin(5x). cos_shift: cos(1.4 pi (x+1)). poly:a0,a1,...: sum a_i x^i.
class TestSignal {
 public:
  static TestSignal parse(const std::string& spec) {
    TestSignal s;
    s.label_ = spec;
    if (spec == "exp_sin") {
      s.kind_ = Kind::exp_sin;
    } else if (spec == "cos_shift") {
      s.kind_ = Kind::cos_shift;
    } else if (spec.rfind("poly:", 0) == 0) {
      s.kind_ = Kind::polynomial;
      std::istringstream is(spec.substr(5));
      std::string tok;
      while (std::getline(is, tok, ',')) {
        try {
          s.coeffs_.push_back(io::parse_real(trim(tok)));
        } catch (const DomainError& e) {
          throw ConfigError("signal", e.what());
        }
      }
      if (s.coeffs_.empty()) throw ConfigError("signal", "polynomial needs at least one coefficient");
    } else {
      throw ConfigError("signal", "unknown signal '" + spec + "' (expected exp_sin, cos_shift or poly:a0,a1,...)");
    }
    return s;
  }

  double operator()(double x) const {
    switch (kind_) {
      case Kind::exp_sin: return std::exp(x) * std::sin(5.0 * x);
      case Kind::cos_shift: return std::cos(1.4 * std::numbers::pi * (x + 1.0));
      case Kind::polynomial: {
        double acc = 0.0;
        for (auto it = coeffs_.rbegin(); it != coeffs_.rend(); ++it) acc = acc * x + *it;
        return acc;
      }
    }
    return 0.0;
  }

  const std::string& label() const { return label_; }

  /// Samples on the grid; the truth is never taken from coefficients.
  Vector sample(const Grid& grid) const {
    Vector v(grid.n());
    for (int j = 0; j < grid.n(); ++j) v(j) = (*this)(grid[j]);
    return v;
  }

 private:
  enum class Kind { exp_sin, cos_shift, polynomial };

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  Kind kind_ = Kind::exp_sin;
  std::vector<double> coeffs_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Configuration

enum class BandMethod { empirical, analytic };

struct ScenarioConfig {
  std::string signal = "exp_sin";
  int n = 128;
  int m = 9;
  double lambda = 4.0;
  std::optional<double> snr_db;
  std::optional<double> inv_variance;
  std::uint64_t seed = 0;
  std::vector<Estimator> methods = all_estimators();
  int refine = 8;
  BcdConfig bcd;
  double credible_level = 0.999;
  int samples = 10000;  // 0 disables credible bands
  BandMethod band = BandMethod::empirical;
  int trials = 1;
  std::vector<double> snr_list;
  std::vector<double> lambda_list;
  std::string output_dir = "out";
  bool timing = false;  // runtime_ms in metrics.csv breaks byte-determinism

  void validate() const {
    (void)TestSignal::parse(signal);
    if (n < 4 || n % 2 != 0) throw ConfigError("n", "must be even and at least 4, got " + std::to_string(n));
    if (m < 0) throw ConfigError("m", "must be non-negative");
    if (m + 1 > n) throw ConfigError("m", "m+1 must not exceed n");
    check_lambda("lambda", lambda);
    if (snr_db.has_value() == inv_variance.has_value()) {
      throw ConfigError("noise", "set exactly one of snr_db and inv_variance");
    }
    if (snr_db && !std::isfinite(*snr_db)) throw ConfigError("snr_db", "must be finite");
    if (inv_variance && !(*inv_variance >= 0.0 && std::isfinite(*inv_variance))) {
      throw ConfigError("inv_variance", "must be finite and non-negative");
    }
    if (methods.empty()) throw ConfigError("methods", "at least one method is required");
    if (refine < 1) throw ConfigError("refine", "must be at least 1");
    bcd.validate();
    if (!(credible_level > 0.0 && credible_level < 1.0)) throw ConfigError("credible_level", "must lie in (0, 1)");
    if (samples != 0 && samples < 2) throw ConfigError("samples", "must be 0 or at least 2");
    if (trials < 1) throw ConfigError("trials", "must be at least 1");
    for (double s : snr_list) {
      if (!std::isfinite(s)) throw ConfigError("snr_list", "entries must be finite");
    }
    for (double l : lambda_list) check_lambda("lambda_list", l);
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  }

 private:
  static void check_lambda(const char* field, double l) {
    if (!(l >= 0.5) || !std::isfinite(l)) throw ConfigError(field, "lambda must be finite and at least 1/2");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double to_real(const std::string& key, const std::string& v) {
  try {
    return io::parse_real(v);
  } catch (const DomainError& e) {
    throw ConfigError(key, e.what());
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  const double d = to_real(key, v);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return static_cast<long long>(d);
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

inline std::vector<double> to_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& t : split_list(v)) out.push_back(to_real(key, t));
  if (out.empty()) throw ConfigError(key, "list is empty");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline GbsrAdjoint to_adjoint(const std::string& v) {
  if (v == "conjugate_transpose") return GbsrAdjoint::conjugate_transpose;
  if (v == "unnormalized") return GbsrAdjoint::unnormalized;
  if (v == "dense") return GbsrAdjoint::dense;
  throw ConfigError("adjoint", "expected conjugate_transpose, unnormalized or dense, got '" + v + "'");
}

inline const char* adjoint_name(GbsrAdjoint a) {
  switch (a) {
    case GbsrAdjoint::conjugate_transpose: return "conjugate_transpose";
    case GbsrAdjoint::unnormalized: return "unnormalized";
    case GbsrAdjoint::dense: return "dense";
  }
  return "?";
}

inline std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + io::format_real(v[i]);
  return s;
}

}  // namespace detail

/// Applies one `key = value` assignment. Used by the file parser and by
/// command-line overrides.
inline void set_option(ScenarioConfig& cfg, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim(raw);
  if (v.empty()) throw ConfigError(key, "missing value");
  if (key == "signal") {
    cfg.signal = v;
  } else if (key == "n") {
    cfg.n = static_cast<int>(to_int(key, v));
  } else if (key == "m") {
    cfg.m = static_cast<int>(to_int(key, v));
  } else if (key == "lambda") {
    cfg.lambda = to_real(key, v);
  } else if (key == "snr_db") {
    cfg.snr_db = to_real(key, v);
  } else if (key == "inv_variance") {
    cfg.inv_variance = to_real(key, v);
  } else if (key == "seed") {
    const long long s = to_int(key, v);
    if (s < 0) throw ConfigError(key, "must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(s);
  } else if (key == "methods") {
    cfg.methods.clear();
    for (const auto& t : split_list(v)) {
      const Estimator e = parse_estimator(t);
      if (std::find(cfg.methods.begin(), cfg.methods.end(), e) == cfg.methods.end()) cfg.methods.push_back(e);
    }
  } else if (key == "refine") {
    cfg.refine = static_cast<int>(to_int(key, v));
  } else if (key == "rel_tol") {
    cfg.bcd.rel_tol = to_real(key, v);
  } else if (key == "max_iter") {
    cfg.bcd.max_iter = static_cast<int>(to_int(key, v));
  } else if (key == "init_likelihood_precision") {
    cfg.bcd.init_likelihood_precision = to_real(key, v);
  } else if (key == "init_prior_precision") {
    cfg.bcd.init_prior_precision = to_real(key, v);
  } else if (key == "shape") {
    cfg.bcd.shape = to_real(key, v);
  } else if (key == "rate") {
    cfg.bcd.rate = to_real(key, v);
  } else if (key == "adjoint") {
    cfg.bcd.adjoint = to_adjoint(v);
  } else if (key == "credible_level") {
    cfg.credible_level = to_real(key, v);
  } else if (key == "samples") {
    cfg.samples = static_cast<int>(to_int(key, v));
  } else if (key == "band") {
    if (v == "empirical") {
      cfg.band = BandMethod::empirical;
    } else if (v == "analytic") {
      cfg.band = BandMethod::analytic;
    } else {
      throw ConfigError(key, "expected empirical or analytic, got '" + v + "'");
    }
  } else if (key == "trials") {
    cfg.trials = static_cast<int>(to_int(key, v));
  } else if (key == "snr_list") {
    cfg.snr_list = to_reals(key, v);
  } else if (key == "lambda_list") {
    cfg.lambda_list = to_reals(key, v);
  } else if (key == "output_dir") {
    cfg.output_dir = v;
  } else if (key == "timing") {
    cfg.timing = to_bool(key, v);
  } else {
    throw ConfigError(key, "unknown key");
  }
}

/// Parses the flat config format: one `key = value` per line, `#` starts a
/// comment, blank lines ignored, each key at most once. The result is
/// validated.
inline ScenarioConfig parse_config(const std::string& text) {
  ScenarioConfig cfg;
  std::map<std::string, int> seen;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno), "missing key");
    if (auto [it, fresh] = seen.emplace(key, lineno); !fresh) {
      throw ConfigError(key, "repeated on line " + std::to_string(lineno) + " (first on line " +
                                 std::to_string(it->second) + ")");
    }
    set_option(cfg, key, line.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_text(path)); }

/// Canonical text form; parse_config(dump_config(c)) reproduces c.
inline std::string dump_config(const ScenarioConfig& cfg) {
  std::ostringstream os;
  auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  line("signal", cfg.signal);
  line("n", std::to_string(cfg.n));
  line("m", std::to_string(cfg.m));
  line("lambda", io::format_real(cfg.lambda));
  if (cfg.snr_db) line("snr_db", io::format_real(*cfg.snr_db));
  if (cfg.inv_variance) line("inv_variance", io::format_real(*cfg.inv_variance));
  line("seed", std::to_string(cfg.seed));
  std::string methods;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) methods += (i ? "," : "") + std::string(estimator_name(cfg.methods[i]));
  line("methods", methods);
  line("refine", std::to_string(cfg.refine));
  line("rel_tol", io::format_real(cfg.bcd.rel_tol));
  line("max_iter", std::to_string(cfg.bcd.max_iter));
  line("init_likelihood_precision", io::format_real(cfg.bcd.init_likelihood_precision));
  line("init_prior_precision", io::format_real(cfg.bcd.init_prior_precision));
  line("shape", io::format_real(cfg.bcd.shape));
  line("rate", io::format_real(cfg.bcd.rate));
  line("adjoint", detail::adjoint_name(cfg.bcd.adjoint));
  line("credible_level", io::format_real(cfg.credible_level));
  line("samples", std::to_string(cfg.samples));
  line("band", cfg.band == BandMethod::empirical ? "empirical" : "analytic");
  line("trials", std::to_string(cfg.trials));
  if (!cfg.snr_list.empty()) line("snr_list", detail::join_reals(cfg.snr_list));
  if (!cfg.lambda_list.empty()) line("lambda_list", detail::join_reals(cfg.lambda_list));
  line("output_dir", cfg.output_dir);
  line("timing", cfg.timing ? "true" : "false");
  return os.str();
}

// ---------------------------------------------------------------------------
// Seeds

/// splitmix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of stream `stream` under `base`. A single scenario uses stream 0,
/// so one-element sweeps reproduce it exactly.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix64(base ^ mix64(stream));
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsRecord {
  std::string method;
  double lambda = 0.0;
  double snr_db = 0.0;  // +inf for noiseless data
  double l2_full = 0.0;
  double err_at_minus1 = 0.0;
  double err_at_minus08 = 0.0;
  double l2_interior = 0.0;
  double runtime_ms = 0.0;
  double iterations = 0.0;  // mean over trials
  int trials = 1;
};

struct ErrorMetrics {
  double l2_full = 0.0;
  double err_at_minus1 = 0.0;
  double err_at_minus08 = 0.0;
  double l2_interior = 0.0;
};

/// Plain 2-norms over grid index sets: all points, |x| <= 1/2; pointwise at
/// x_0 = -1 and at the grid point nearest -0.8.
inline ErrorMetrics compute_errors(const Vector& estimate, const Vector& truth, const Grid& grid) {
  bsr::detail::check_length(static_cast<int>(estimate.size()), grid.n(), "compute_errors");
  bsr::detail::check_length(static_cast<int>(truth.size()), grid.n(), "compute_errors");
  const Vector e = estimate - truth;
  ErrorMetrics m;
  m.l2_full = e.norm();
  m.err_at_minus1 = std::abs(e(0));
  m.err_at_minus08 = std::abs(e(grid.nearest(-0.8)));
  double interior = 0.0;
  for (int j = 0; j < grid.n(); ++j) {
    if (std::abs(grid[j]) <= 0.5) interior += e(j) * e(j);
  }
  m.l2_interior = std::sqrt(interior);
  return m;
}

inline io::Table metrics_table(const std::vector<MetricsRecord>& records, bool timing) {
  std::vector<std::string> header{"method", "lambda", "snr_db", "l2_full", "err_at_minus1",
                                  "err_at_minus08", "l2_interior", "iterations", "trials"};
  if (timing) header.push_back("runtime_ms");
  io::Table t(header);
  for (const auto& r : records) {
    std::vector<std::string> row{r.method,
                                 io::format_real(r.lambda),
                                 io::format_real(r.snr_db),
                                 io::format_real(r.l2_full),
                                 io::format_real(r.err_at_minus1),
                                 io::format_real(r.err_at_minus08),
                                 io::format_real(r.l2_interior),
                                 io::format_real(r.iterations),
                                 std::to_string(r.trials)};
    if (timing) row.push_back(io::format_real(r.runtime_ms));
    t.add_row(row);
  }
  return t;
}

// ---------------------------------------------------------------------------
// One scenario cell: a signal, an operator set, one noise realization.

struct NoiseSetting {
  std::optional<double> snr_db;
  std::optional<double> inv_variance;
};

struct MethodRun {
  Estimator method = Estimator::fourier;
  Vector estimate;
  std::optional<MapResult> map;
  std::optional<CredibleBand> band;
  double runtime_ms = 0.0;
};

struct CellResult {
  Grid grid;
  Vector truth;
  SpectralData clean;
  SpectralData data;
  double lambda = 0.0;
  double inv_variance = 0.0;
  double snr_db = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<MethodRun> runs;
  std::vector<MetricsRecord> metrics;
};

/// Clean coefficients on the refine*N mesh, truth sampled on the grid.
struct SignalData {
  Grid grid;
  Vector truth;
  SpectralData clean;
};

inline SignalData prepare_signal(const ScenarioConfig& cfg) {
  const TestSignal sig = TestSignal::parse(cfg.signal);
  Grid grid(cfg.n);
  Vector truth = sig.sample(grid);
  SpectralData clean = synthesize_clean_coeffs(sig, cfg.n, cfg.refine);
  return {std::move(grid), std::move(truth), std::move(clean)};
}

/// inv_variance for the requested setting. The SNR reference energy is the
/// DFT of the grid-sampled truth.
inline double resolve_inv_variance(const SignalData& sig, const NoiseSetting& noise) {
  if (noise.inv_variance) return *noise.inv_variance;
  return inv_variance_for_snr(dft_forward({sig.truth}), *noise.snr_db);
}

inline void run_methods(const ScenarioConfig& cfg, const OperatorSet& ops, CellResult& cell, bool with_bands);

inline CellResult run_cell(const ScenarioConfig& cfg, const SignalData& sig, const OperatorSet& ops,
                           const NoiseSetting& noise, std::uint64_t noise_seed, bool with_bands) {
  CellResult cell;
  cell.grid = sig.grid;
  cell.truth = sig.truth;
  cell.clean = sig.clean;
  cell.lambda = ops.params().lambda;
  cell.noise_seed = noise_seed;
  cell.inv_variance = resolve_inv_variance(sig, noise);
  cell.snr_db = cell.inv_variance > 0.0 ? snr_db(dft_forward({sig.truth}), cell.inv_variance)
                                        : std::numeric_limits<double>::infinity();
  cell.data = add_noise(sig.clean, {cell.inv_variance, noise_seed});
  run_methods(cfg, ops, cell, with_bands);
  return cell;
}

/// Runs cfg.methods on cell.data, appending to cell.runs and cell.metrics.
/// Credible-band draws are seeded from cell.noise_seed.
inline void run_methods(const ScenarioConfig& cfg, const OperatorSet& ops, CellResult& cell, bool with_bands) {
  const std::uint64_t noise_seed = cell.noise_seed;
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    const Estimator method = cfg.methods[i];
    MethodRun run;
    run.method = method;
    const auto t0 = std::chrono::steady_clock::now();
    switch (method) {
      case Estimator::fourier: run.estimate = fourier_partial_sum(cell.data, cell.grid).values; break;
      case Estimator::gegenbauer: run.estimate = gegenbauer_reconstruct(ops, cell.data).values; break;
      case Estimator::bsr:
      case Estimator::gbsr: {
        const Method mm = method == Estimator::bsr ? Method::bsr : Method::gbsr;
        run.map = mm == Method::bsr ? bsr_map(cell.data, ops, cfg.bcd) : gbsr_map(cell.data, ops, cfg.bcd);
        run.estimate = run.map->estimate.values;
        if (with_bands && (cfg.band == BandMethod::analytic || cfg.samples > 0)) {
          const auto post = fixed_posterior(mm, run.map->hyper, cell.data, ops, cfg.bcd.adjoint);
          if (cfg.band == BandMethod::analytic) {
            run.band = analytic_band(post, cfg.credible_level);
          } else {
            const auto draws =
                sample_posterior(post, cfg.samples, derive_seed(noise_seed, 1 + static_cast<std::uint64_t>(method)));
            run.band = credible_band(draws, cfg.credible_level);
          }
        }
        break;
      }
    }
    run.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    const ErrorMetrics err = compute_errors(run.estimate, cell.truth, cell.grid);
    MetricsRecord rec;
    rec.method = estimator_name(method);
    rec.lambda = cell.lambda;
    rec.snr_db = cell.snr_db;
    rec.l2_full = err.l2_full;
    rec.err_at_minus1 = err.err_at_minus1;
    rec.err_at_minus08 = err.err_at_minus08;
    rec.l2_interior = err.l2_interior;
    rec.runtime_ms = run.runtime_ms;
    rec.iterations = run.map ? run.map->iterations : 0;
    cell.metrics.push_back(rec);
    cell.runs.push_back(std::move(run));
  }
}

inline NoiseSetting noise_of(const ScenarioConfig& cfg) { return {cfg.snr_db, cfg.inv_variance}; }

inline io::Table estimate_table(const CellResult& cell, const MethodRun& run) {
  std::vector<std::string> header{"x", "truth", "estimate"};
  if (run.band) {
    header.push_back("lower");
    header.push_back("upper");
  }
  io::Table t(header);
  for (int j = 0; j < cell.grid.n(); ++j) {
    std::vector<double> row{cell.grid[j], cell.truth(j), run.estimate(j)};
    if (run.band) {
      row.push_back(run.band->lower(j));
      row.push_back(run.band->upper(j));
    }
    t.add_row(row);
  }
  return t;
}

inline nlohmann::ordered_json manifest_json(const ScenarioConfig& cfg, const CellResult& cell,
                                            const OperatorSet& ops) {
  using nlohmann::ordered_json;
  ordered_json j;
  ordered_json c;
  std::istringstream is(dump_config(cfg));
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    c[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = c;
  const int i08 = cell.grid.nearest(-0.8);
  j["grid"] = {{"n", cell.grid.n()},
               {"x_minus1_index", 0},
               {"x_minus08_index", i08},
               {"x_minus08_value", io::format_real(cell.grid[i08])},
               {"x_minus08_convention", "nearest grid point"}};
  j["noise"] = {{"inv_variance", io::format_real(cell.inv_variance)},
                {"snr_db", io::format_real(cell.snr_db)},
                {"seed", cell.noise_seed},
                {"snr_reference", "dft of grid-sampled truth"}};
  const auto kappa = kappa_report(ops.params(), ops.n());
  j["kappa_warnings"] = kappa.warnings();
  ordered_json methods = ordered_json::array();
  for (const auto& run : cell.runs) {
    ordered_json r;
    r["method"] = estimator_name(run.method);
    if (run.map) {
      r["iterations"] = run.map->iterations;
      r["converged"] = run.map->converged;
      r["likelihood_precision"] = io::format_real(run.map->hyper.likelihood_precision);
      r["prior_precision"] = io::format_real(run.map->hyper.prior_precision);
      std::vector<std::string> trace;
      for (double v : run.map->objective_trace) trace.push_back(io::format_real(v));
      r["objective_trace"] = trace;
      if (run.band) {
        r["band"] = {{"level", io::format_real(run.band->level)},
                     {"method", cfg.band == BandMethod::empirical ? "empirical" : "analytic"},
                     {"samples", cfg.band == BandMethod::empirical ? cfg.samples : 0}};
      }
    }
    r["file"] = std::string(estimator_name(run.method)) + ".csv";
    methods.push_back(r);
  }
  j["methods"] = methods;
  return j;
}

/// Runs every configured method on one noise realization (stream 0 of
/// cfg.seed) and writes, under cfg.output_dir: one `<method>.csv` per
/// method, `coefficients.csv`, `metrics.csv` and `manifest.json`.
///
/// With `data` given, the methods run on those coefficients instead of a
/// synthesized realization; the truth still comes from cfg.signal and the
/// noise level is recorded as unknown (nan).
inline CellResult run_scenario(const ScenarioConfig& cfg, const std::optional<SpectralData>& data = std::nullopt) {
  cfg.validate();
  const SignalData sig = prepare_signal(cfg);
  const OperatorSet ops = build_operators(sig.grid, {cfg.lambda, cfg.m});
  CellResult cell;
  if (data) {
    if (data->n() != cfg.n) {
      throw ConfigError("coeffs", "file has " + std::to_string(data->n()) + " modes, config n = " + std::to_string(cfg.n));
    }
    cell.grid = sig.grid;
    cell.truth = sig.truth;
    cell.clean = sig.clean;
    cell.data = *data;
    cell.lambda = cfg.lambda;
    cell.noise_seed = derive_seed(cfg.seed, 0);
    cell.inv_variance = std::numeric_limits<double>::quiet_NaN();
    cell.snr_db = std::numeric_limits<double>::quiet_NaN();
    run_methods(cfg, ops, cell, true);
  } else {
    cell = run_cell(cfg, sig, ops, noise_of(cfg), derive_seed(cfg.seed, 0), true);
  }

  const std::filesystem::path dir(cfg.output_dir);
  io::ensure_directory(dir);
  for (const auto& run : cell.runs) estimate_table(cell, run).write(dir / (std::string(estimator_name(run.method)) + ".csv"));
  io::write_spectral_csv(dir / "coefficients.csv", cell.data);
  metrics_table(cell.metrics, cfg.timing).write(dir / "metrics.csv");
  io::write_text(dir / "manifest.json", manifest_json(cfg, cell, ops).dump(2) + "\n");
  return cell;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace detail {

/// Per-method mean over trials. Records come out ordered by method in the
/// config's method order.
inline std::vector<MetricsRecord> average(const std::vector<std::vector<MetricsRecord>>& trials) {
  std::vector<MetricsRecord> out = trials.front();
  for (std::size_t t = 1; t < trials.size(); ++t) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto& r = trials[t][i];
      out[i].l2_full += r.l2_full;
      out[i].err_at_minus1 += r.err_at_minus1;
      out[i].err_at_minus08 += r.err_at_minus08;
      out[i].l2_interior += r.l2_interior;
      out[i].runtime_ms += r.runtime_ms;
      out[i].iterations += r.iterations;
    }
  }
  const double k = static_cast<double>(trials.size());
  for (auto& r : out) {
    r.l2_full /= k;
    r.err_at_minus1 /= k;
    r.err_at_minus08 /= k;
    r.l2_interior /= k;
    r.runtime_ms /= k;
    r.iterations /= k;
    r.trials = static_cast<int>(trials.size());
  }
  return out;
}

/// Reorders cell-major records into method-major order.
inline std::vector<MetricsRecord> method_major(const std::vector<std::vector<MetricsRecord>>& cells) {
  std::vector<MetricsRecord> out;
  if (cells.empty()) return out;
  for (std::size_t i = 0; i < cells.front().size(); ++i) {
    for (const auto& c : cells) out.push_back(c[i]);
  }
  return out;
}

}  // namespace detail

/// One record per (method, SNR), averaged over cfg.trials realizations.
/// Trial t at list index i draws noise from stream i * trials + t.
inline std::vector<MetricsRecord> sweep_snr(const ScenarioConfig& cfg, const std::vector<double>& snr_list) {
  cfg.validate();
  if (snr_list.empty()) throw ConfigError("snr_list", "must not be empty");
  const SignalData sig = prepare_signal(cfg);
  const OperatorSet ops = build_operators(sig.grid, {cfg.lambda, cfg.m});
  std::vector<std::vector<MetricsRecord>> cells;
  for (std::size_t i = 0; i < snr_list.size(); ++i) {
    if (!std::isfinite(snr_list[i])) throw ConfigError("snr_list", "entries must be finite");
    std::vector<std::vector<MetricsRecord>> trials;
    for (int t = 0; t < cfg.trials; ++t) {
      const std::uint64_t stream = i * static_cast<std::uint64_t>(cfg.trials) + static_cast<std::uint64_t>(t);
      trials.push_back(run_cell(cfg, sig, ops, {snr_list[i], std::nullopt}, derive_seed(cfg.seed, stream), false).metrics);
    }
    cells.push_back(detail::average(trials));
  }
  return detail::method_major(cells);
}

/// One record per (method, lambda), averaged over cfg.trials realizations.
/// Trial t uses noise stream t for every lambda, so lambdas are compared on
/// identical data.
inline std::vector<MetricsRecord> sweep_lambda(const ScenarioConfig& cfg, const std::vector<double>& lambda_list) {
  cfg.validate();
  if (lambda_list.empty()) throw ConfigError("lambda_list", "must not be empty");
  const SignalData sig = prepare_signal(cfg);
  std::vector<std::vector<MetricsRecord>> cells;
  for (double lambda : lambda_list) {
    if (!(lambda >= 0.5) || !std::isfinite(lambda)) throw ConfigError("lambda_list", "lambda must be at least 1/2");
    const OperatorSet ops = build_operators(sig.grid, {lambda, cfg.m});
    std::vector<std::vector<MetricsRecord>> trials;
    for (int t = 0; t < cfg.trials; ++t) {
      trials.push_back(
          run_cell(cfg, sig, ops, noise_of(cfg), derive_seed(cfg.seed, static_cast<std::uint64_t>(t)), false).metrics);
    }
    cells.push_back(detail::average(trials));
  }
  return detail::method_major(cells);
}

// ---------------------------------------------------------------------------
// Plot data

enum class Layout { fig3, fig4 };

/// Estimate and band for one (method, lambda, SNR) credible-interval panel.
struct BandPanel {
  std::string method;
  double lambda = 0.0;
  double snr_db = 0.0;
  Vector x;
  Vector truth;
  Vector estimate;
  Vector lower;
  Vector upper;
};

namespace detail {

inline std::string tag(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

inline double plot_log10(double err) { return std::log10(std::max(err, 1e-16)); }

struct Panel {
  const char* name;
  const char* title;
  double MetricsRecord::*field;
};

inline const std::vector<Panel>& panels() {
  static const std::vector<Panel> p{{"l2_full", "l2 error in [-1,1]", &MetricsRecord::l2_full},
                                    {"err_at_minus1", "error at x=-1", &MetricsRecord::err_at_minus1},
                                    {"err_at_minus08", "error at x=-0.8", &MetricsRecord::err_at_minus08},
                                    {"l2_interior", "l2 error in [-.5,.5]", &MetricsRecord::l2_interior}};
  return p;
}

}  // namespace detail

/// fig3 layout (error vs SNR) or fig4 layout (error vs lambda): one tidy CSV per panel
/// with columns `method,<param>,error,log10_error`, plus a gnuplot script.
/// log10_error floors zero errors at 1e-16; the error column is untouched.
inline std::vector<std::filesystem::path> emit_plotdata(const std::vector<MetricsRecord>& records, Layout layout,
                                                        const std::filesystem::path& dir) {
  if (records.empty()) throw DomainError("emit_plotdata: no records");
  io::ensure_directory(dir);
  const bool snr = layout == Layout::fig3;
  const std::string fig = snr ? "fig3" : "fig4";
  const std::string param = snr ? "snr_db" : "lambda";
  std::vector<std::string> methods;
  for (const auto& r : records) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }

  std::vector<std::filesystem::path> written;
  std::ostringstream gp;
  gp << "# gnuplot script: gnuplot " << fig << ".gp\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 1200,900\n"
     << "set output '" << fig << ".png'\n"
     << "set multiplot layout 2,2\n"
     << "set xlabel '" << (snr ? "SNR (dB)" : "lambda") << "'\n"
     << "set ylabel 'log10 error'\n"
     << "set key outside\n";
  for (const auto& panel : detail::panels()) {
    io::Table t({"method", param, "error", "log10_error"});
    for (const auto& r : records) {
      const double err = r.*(panel.field);
      t.add_row({r.method, io::format_real(snr ? r.snr_db : r.lambda), io::format_real(err),
                 io::format_real(detail::plot_log10(err))});
    }
    const std::string file = fig + "_" + panel.name + ".csv";
    t.write(dir / file);
    written.push_back(dir / file);
    gp << "set title '" << panel.title << "'\nplot ";
    for (std::size_t i = 0; i < methods.size(); ++i) {
      gp << (i ? ", \\\n     " : "") << "'" << file << "' using 2:($1 eq '" << methods[i]
         << "' ? $4 : 1/0) skip 1 with linespoints title '" << methods[i] << "'";
    }
    gp << "\n";
  }
  gp << "unset multiplot\n";
  io::write_text(dir / (fig + ".gp"), gp.str());
  written.push_back(dir / (fig + ".gp"));
  return written;
}

/// Band panels: one `fig5_<method>_lambda<l>_snr<s>.csv` per panel with columns
/// `x,truth,estimate,lower,upper`, plus a gnuplot script.
inline std::vector<std::filesystem::path> emit_band_plotdata(const std::vector<BandPanel>& panels,
                                                             const std::filesystem::path& dir) {
  if (panels.empty()) throw DomainError("emit_band_plotdata: no panels");
  io::ensure_directory(dir);
  std::vector<std::filesystem::path> written;
  std::ostringstream gp;
  gp << "# gnuplot script: gnuplot fig5.gp\n"
     << "set datafile separator ','\n"
     << "set terminal pngcairo size 1600,1200\n"
     << "set output 'fig5.png'\n"
     << "set multiplot layout " << (panels.size() + 3) / 4 << ",4\n";
  for (const auto& p : panels) {
    io::Table t({"x", "truth", "estimate", "lower", "upper"});
    for (Eigen::Index j = 0; j < p.x.size(); ++j) t.add_row({p.x(j), p.truth(j), p.estimate(j), p.lower(j), p.upper(j)});
    const std::string file =
        "fig5_" + p.method + "_lambda" + detail::tag(p.lambda) + "_snr" + detail::tag(p.snr_db) + ".csv";
    t.write(dir / file);
    written.push_back(dir / file);
    gp << "set title '" << p.method << ", lambda=" << detail::tag(p.lambda) << ", SNR=" << detail::tag(p.snr_db)
       << "'\nplot '" << file << "' using 1:4:5 skip 1 with filledcurves lc rgb '#c0c0ff' title 'band', \\\n"
       << "     '' using 1:2 skip 1 with lines lc rgb 'black' title 'truth', \\\n"
       << "     '' using 1:3 skip 1 with lines lc rgb 'red' title 'estimate'\n";
  }
  gp << "unset multiplot\n";
  io::write_text(dir / "fig5.gp", gp.str());
  written.push_back(dir / "fig5.gp");
  return written;
}

/// Credible-band panels for every (lambda, SNR) pair and each of bsr/gbsr
/// in cfg.methods. Cell (lambda index a, SNR index b) draws noise from
/// stream b, so both lambdas see the same data at a given SNR.
inline std::vector<BandPanel> band_panels(const ScenarioConfig& cfg, const std::vector<double>& lambdas,
                                          const std::vector<double>& snrs) {
  cfg.validate();
  if (lambdas.empty() || snrs.empty()) throw ConfigError("lambda_list", "band panels need lambdas and SNRs");
  ScenarioConfig local = cfg;
  local.methods.clear();
  for (Estimator e : cfg.methods) {
    if (e == Estimator::bsr || e == Estimator::gbsr) local.methods.push_back(e);
  }
  if (local.methods.empty()) throw ConfigError("methods", "band panels need bsr or gbsr");
  if (local.samples == 0) local.band = BandMethod::analytic;
  const SignalData sig = prepare_signal(local);
  std::vector<BandPanel> out;
  for (double lambda : lambdas) {
    const OperatorSet ops = build_operators(sig.grid, {lambda, local.m});
    for (std::size_t b = 0; b < snrs.size(); ++b) {
      const CellResult cell = run_cell(local, sig, ops, {snrs[b], std::nullopt}, derive_seed(local.seed, b), true);
      for (const auto& run : cell.runs) {
        out.push_back({estimator_name(run.method), lambda, snrs[b], cell.grid.points(), cell.truth, run.estimate,
                       run.band->lower, run.band->upper});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const BandPanel& a, const BandPanel& b) { return a.method < b.method; });
  return out;
}

}  // namespace bsr::harness
