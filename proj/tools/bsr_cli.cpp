// bsr: command-line front end for the reconstruction experiments.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 1 anything else (I/O).

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "bsr/harness.hpp"

namespace {

using namespace bsr;
using namespace bsr::harness;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitOther = 1;

/// Options shared by every subcommand. Values are kept as strings and
/// applied through the same setter the config parser uses.
struct Common {
  std::string config;
  std::map<std::string, std::string> values;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "scenario file (key = value lines)");
    add(sub, "--seed", "seed", "base seed");
    add(sub, "--out", "output_dir", "output directory");
    add(sub, "--signal", "signal", "exp_sin, cos_shift or poly:a0,a1,...");
    add(sub, "--n", "n", "number of Fourier modes (even)");
    add(sub, "--m", "m", "Gegenbauer truncation degree");
    add(sub, "--lambda", "lambda", "Gegenbauer weight parameter");
    add(sub, "--snr-db", "snr_db", "noise level as SNR in dB");
    add(sub, "--inv-variance", "inv_variance", "noise variance alpha^-1 (0 = noiseless)");
    add(sub, "--refine", "refine", "quadrature mesh refinement for clean coefficients");
    add(sub, "--trials", "trials", "noise realizations averaged per sweep cell");
    add(sub, "--samples", "samples", "posterior draws for credible bands (0 = none)");
    add(sub, "--level", "credible_level", "credible level in (0,1)");
    add(sub, "--band", "band", "empirical or analytic credible bands");
    add(sub, "--adjoint", "adjoint", "GBSR data term: conjugate_transpose, unnormalized or dense");
    add(sub, "--max-iter", "max_iter", "BCD iteration cap");
    add(sub, "--rel-tol", "rel_tol", "BCD relative stopping tolerance");
  }

  void add(CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option(flag, values[key], help);
  }

  ScenarioConfig load(const CLI::App* sub) const {
    std::string text;
    if (!config.empty()) text = io::read_text(config);
    // Overridden keys are dropped from the file text and re-appended, so
    // validation sees the merged scenario. A noise flag on the command line
    // replaces either noise key from the file.
    bool noise_from_cli = false;
    std::vector<std::pair<std::string, std::string>> apply;
    for (const auto& [key, value] : values) {
      const std::string flag = "--" + flag_of(key);
      if (sub->count(flag) > 0) {
        apply.emplace_back(key, value);
        if (key == "snr_db" || key == "inv_variance") noise_from_cli = true;
      }
    }
    std::string merged;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      std::string body = line.substr(0, line.find('#'));
      const auto eq = body.find('=');
      const std::string key = eq == std::string::npos ? "" : harness::detail::trim(body.substr(0, eq));
      const bool overridden = std::any_of(apply.begin(), apply.end(), [&](const auto& kv) { return kv.first == key; });
      const bool noise_key = key == "snr_db" || key == "inv_variance";
      if (overridden || (noise_from_cli && noise_key)) continue;
      merged += line + '\n';
    }
    for (const auto& [key, value] : apply) merged += key + " = " + value + '\n';
    return parse_config(merged);
  }

  static std::string flag_of(const std::string& key) {
    static const std::map<std::string, std::string> special{{"output_dir", "out"},
                                                            {"snr_db", "snr-db"},
                                                            {"inv_variance", "inv-variance"},
                                                            {"credible_level", "level"},
                                                            {"max_iter", "max-iter"},
                                                            {"rel_tol", "rel-tol"}};
    const auto it = special.find(key);
    return it == special.end() ? key : it->second;
  }
};

std::vector<Estimator> parse_methods(const std::vector<std::string>& names) {
  std::vector<Estimator> out;
  for (const auto& n : names) {
    for (const auto& part : harness::detail::split_list(n)) {
      const Estimator e = parse_estimator(part);
      if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
    }
  }
  return out;
}

void print_paths(const std::vector<std::filesystem::path>& paths) {
  for (const auto& p : paths) std::cout << p.string() << '\n';
}

int cmd_synthesize(const ScenarioConfig& cfg) {
  const SignalData sig = prepare_signal(cfg);
  const double iv = resolve_inv_variance(sig, noise_of(cfg));
  const SpectralData noisy = add_noise(sig.clean, {iv, derive_seed(cfg.seed, 0)});
  const std::filesystem::path dir(cfg.output_dir);
  io::ensure_directory(dir);
  io::write_spectral_csv(dir / "clean.csv", sig.clean);
  io::write_spectral_csv(dir / "noisy.csv", noisy);
  io::Table truth({"x", "value"});
  for (int j = 0; j < sig.grid.n(); ++j) truth.add_row({sig.grid[j], sig.truth(j)});
  truth.write(dir / "truth.csv");
  std::cout << "inv_variance: " << io::format_real(iv) << '\n';
  if (iv > 0.0) std::cout << "snr_db: " << io::format_real(snr_db(dft_forward({sig.truth}), iv)) << '\n';
  print_paths({dir / "clean.csv", dir / "noisy.csv", dir / "truth.csv"});
  return 0;
}

int cmd_reconstruct(ScenarioConfig cfg, const std::vector<std::string>& methods, const std::string& coeffs) {
  if (!methods.empty()) cfg.methods = parse_methods(methods);
  std::optional<SpectralData> data;
  if (!coeffs.empty()) data = io::read_spectral_csv(coeffs);
  const CellResult cell = run_scenario(cfg, data);
  std::cout << metrics_table(cell.metrics, cfg.timing).str();
  return 0;
}

int cmd_sweep(ScenarioConfig cfg, bool snr, std::vector<double> list, bool plot) {
  if (list.empty()) list = snr ? cfg.snr_list : cfg.lambda_list;
  if (list.empty()) {
    throw ConfigError(snr ? "snr_list" : "lambda_list", "give the list in the config or on the command line");
  }
  const auto records = snr ? sweep_snr(cfg, list) : sweep_lambda(cfg, list);
  const std::filesystem::path dir(cfg.output_dir);
  io::ensure_directory(dir);
  const auto file = dir / (snr ? "sweep_snr.csv" : "sweep_lambda.csv");
  metrics_table(records, cfg.timing).write(file);
  std::cout << file.string() << '\n';
  if (plot) print_paths(emit_plotdata(records, snr ? Layout::fig3 : Layout::fig4, dir / "plots"));
  return 0;
}

int cmd_sample(ScenarioConfig cfg, const std::vector<std::string>& methods, bool write_samples, bool panels) {
  cfg.methods = methods.empty() ? std::vector<Estimator>{Estimator::bsr, Estimator::gbsr} : parse_methods(methods);
  for (Estimator e : cfg.methods) {
    if (e != Estimator::bsr && e != Estimator::gbsr) {
      throw ConfigError("method", "sample-posterior supports bsr and gbsr only");
    }
  }
  const std::filesystem::path dir(cfg.output_dir);
  if (panels) {
    const auto lambdas = cfg.lambda_list.empty() ? std::vector<double>{2.0, 4.0} : cfg.lambda_list;
    const auto snrs = cfg.snr_list.empty() ? std::vector<double>{2.0, 10.0, 30.0} : cfg.snr_list;
    print_paths(emit_band_plotdata(band_panels(cfg, lambdas, snrs), dir / "plots"));
    return 0;
  }
  if (cfg.samples == 0 && cfg.band == BandMethod::empirical) {
    throw ConfigError("samples", "empirical bands need samples >= 2");
  }
  const CellResult cell = run_scenario(cfg);
  if (write_samples) {
    const OperatorSet ops = build_operators(cell.grid, {cfg.lambda, cfg.m});
    for (const auto& run : cell.runs) {
      const Method mm = run.method == Estimator::bsr ? Method::bsr : Method::gbsr;
      const auto post = fixed_posterior(mm, run.map->hyper, cell.data, ops, cfg.bcd.adjoint);
      const int count = std::max(cfg.samples, 2);
      const Matrix draws =
          sample_posterior(post, count, derive_seed(cell.noise_seed, 1 + static_cast<std::uint64_t>(run.method)));
      std::vector<std::string> header{"x"};
      for (int s = 0; s < count; ++s) header.push_back("s" + std::to_string(s));
      io::Table t(header);
      for (int j = 0; j < cell.grid.n(); ++j) {
        std::vector<double> row{cell.grid[j]};
        for (int s = 0; s < count; ++s) row.push_back(draws(j, s));
        t.add_row(row);
      }
      const auto file = dir / (std::string(estimator_name(run.method)) + "_samples.csv");
      t.write(file);
      std::cout << file.string() << '\n';
    }
  }
  std::cout << metrics_table(cell.metrics, cfg.timing).str();
  return 0;
}

int cmd_validate(const ScenarioConfig& cfg) {
  std::cout << dump_config(cfg);
  const Grid grid(cfg.n);
  const OperatorSet ops = build_operators(grid, {cfg.lambda, cfg.m});
  std::cout << "--\n" << diagnostic_dump(ops);
  const EigenEstimate ck = common_kernel_check(ops);
  std::cout << "common_kernel_min_eig: " << io::format_real(ck.value) << (ck.converged ? "" : " (not converged)")
            << '\n';
  for (const auto& w : kappa_report(ops.params(), ops.n()).warnings()) std::cerr << "warning: " << w << '\n';
  if (!(ck.value > 0.0)) throw NumericalError("common kernel condition fails: A^T A + M^T M is not positive definite");
  std::cout << "ok\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian spectral reprojection experiments"};
  app.require_subcommand(1);

  Common common;

  auto* synth = app.add_subcommand("synthesize", "write clean and noisy Fourier coefficients");
  common.attach(synth);

  std::vector<std::string> methods;
  std::string coeffs;
  auto* recon = app.add_subcommand("reconstruct", "run reconstruction methods on one realization");
  common.attach(recon);
  recon->add_option("--method", methods, "fourier, gegenbauer, bsr, gbsr (repeatable or comma list)");
  recon->add_option("--coeffs", coeffs, "k,re,im file to reconstruct instead of synthesizing")->check(CLI::ExistingFile);

  std::vector<double> snr_list;
  bool plot = false;
  auto* ssnr = app.add_subcommand("sweep-snr", "metrics over a list of SNRs");
  common.attach(ssnr);
  ssnr->add_option("--snr-list", snr_list, "SNR values in dB")->delimiter(',');
  ssnr->add_flag("--plot", plot, "also write error-vs-SNR plot data (fig3_*.csv)");

  std::vector<double> lambda_list;
  auto* slam = app.add_subcommand("sweep-lambda", "metrics over a list of lambdas");
  common.attach(slam);
  slam->add_option("--lambda-list", lambda_list, "lambda values")->delimiter(',');
  slam->add_flag("--plot", plot, "also write error-vs-lambda plot data (fig4_*.csv)");

  bool write_samples = false;
  bool panels = false;
  auto* samp = app.add_subcommand("sample-posterior", "credible bands from the fixed-hyperparameter posterior");
  common.attach(samp);
  samp->add_option("--method", methods, "bsr and/or gbsr");
  samp->add_flag("--write-samples", write_samples, "also write the raw draws");
  samp->add_flag("--panels", panels, "write credible-band panels (fig5_*.csv) over lambda_list x snr_list");

  auto* validate = app.add_subcommand("validate-config", "check a scenario and print operator diagnostics");
  common.attach(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const ScenarioConfig cfg = common.load(sub);
    if (sub == synth) return cmd_synthesize(cfg);
    if (sub == recon) return cmd_reconstruct(cfg, methods, coeffs);
    if (sub == ssnr) return cmd_sweep(cfg, true, snr_list, plot);
    if (sub == slam) return cmd_sweep(cfg, false, lambda_list, plot);
    if (sub == samp) return cmd_sample(cfg, methods, write_samples, panels);
    return cmd_validate(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DomainError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitOther;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
}
