// rws: synthesize random wavelet series, estimate their spectra, inspect
// selfsimilarity kernels.
//
// Exit codes: 0 ok, 1 selftest failure, 2 input or parse error,
// 3 mathematical-validity error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rws/estimation.hpp"
#include "rws/selftest.hpp"
#include "rws/synthesis.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* tool_version = "0.3.0";

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  double grid_step = 0.005;
  int scales = 10;
  std::optional<std::string> wavelet;
  double alpha_max = 3.0;
  unsigned threads = 0;
  bool gnuplot = false;
};

class Manifest {
 public:
  explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
    set("command", std::move(command));
    set("version", tool_version);
  }

  void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
  void output(const std::string& path) { outputs_.push_back(path); }

  void write(const fs::path& dir) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::string text;
    for (const auto& [key, value] : entries_) text += key + '=' + value + '\n';
    for (const auto& path : outputs_) text += "output=" + path + '\n';
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", seconds);
    text += std::string("duration_s=") + buf + '\n';
    rws::io::write_file((dir / "manifest.txt").string(), text);
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::string> entries_;
  std::vector<std::string> outputs_;
};

fs::path prepare_out(const Globals& g) {
  fs::path dir(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw rws::Error(rws::ErrorKind::io, "cannot create output directory " + dir.string());
  return dir;
}

void emit(Manifest& manifest, const fs::path& path, const std::string& contents) {
  rws::io::write_file(path.string(), contents);
  manifest.output(path.string());
}

std::string spectrum_plot_script() {
  return "set datafile separator ','\n"
         "set xlabel 'h'\nset ylabel 'd(h)'\nset yrange [0:1.1]\n"
         "plot 'spectrum.csv' using 1:2 with points title 'd2', \\\n"
         "     'spectrum.csv' using 1:3 with lines title 'd1'\n";
}

std::string kernel_plot_script() {
  return "set datafile separator ','\n"
         "set xlabel 'alpha'\nset yrange [-1:1.1]\n"
         "plot 'rho.csv' using 1:2 with lines lw 1 title 'rho', \\\n"
         "     'spectrum.csv' using 1:2 with lines lw 3 title 'd'\n";
}

int run_synth(const Globals& g, const std::string& config_path, bool csv) {
  auto loaded = rws::load_config(config_path);
  auto& config = loaded.config;
  if (g.seed) {
    config.seed = *g.seed;
    loaded.resolved["seed"] = std::to_string(*g.seed);
  }
  if (g.wavelet) {
    config.wavelet_order = rws::parse_wavelet(*g.wavelet).order;
    loaded.resolved["wavelet"] = "db" + std::to_string(config.wavelet_order);
  }
  rws::validate_config(config);
  if (auto warning = rws::regularity_warning(config)) std::cerr << "warning: " << *warning << '\n';

  const auto dir = prepare_out(g);
  Manifest manifest("synth");
  manifest.set("input", config_path);
  for (const auto& [key, value] : loaded.resolved) manifest.set("config." + key, value);
  manifest.set("seed", std::to_string(config.seed));

  const auto signal = rws::synthesize(config, g.threads);
  emit(manifest, dir / "signal.rws", rws::io::encode_signal(signal));
  if (csv) emit(manifest, dir / "signal.csv", rws::io::signal_csv(signal));
  manifest.write(dir);
  std::cout << "wrote " << signal.samples.size() << " samples to " << (dir / "signal.rws").string() << '\n';
  return 0;
}

int run_analyze(const Globals& g, const std::string& signal_path, double q_lo, double q_hi, double q_step,
                int min_scales) {
  const auto signal = rws::io::read_signal(signal_path);
  rws::AnalysisOptions options;
  options.wavelet_order = rws::parse_wavelet(g.wavelet.value_or("db3")).order;
  options.scale_count = g.scales;
  options.min_scales = min_scales;
  options.grid_step = g.grid_step;
  options.alpha_max = g.alpha_max;
  options.q_lo = q_lo;
  options.q_hi = q_hi;
  options.q_step = q_step;
  options.threads = g.threads;
  if (!(options.grid_step > 0.0) || !(options.alpha_max > options.grid_step)) {
    throw rws::Error(rws::ErrorKind::parse, "--grid-step must be positive and below --alpha-max");
  }
  if (!(q_step > 0.0) || !(q_hi > q_lo)) throw rws::Error(rws::ErrorKind::parse, "bad q grid");

  auto est = rws::analyze_signal(signal, options);
  if (g.seed) est.metadata["source_seed"] = std::to_string(*g.seed);
  if (!est.q_c_found) std::cerr << "warning: tau has no sign change on the q grid, d1 uses q >= " << q_lo << '\n';

  const auto dir = prepare_out(g);
  Manifest manifest("analyze");
  manifest.set("input", signal_path);
  for (const auto& [key, value] : est.metadata) manifest.set("config." + key, value);
  manifest.set("config.min_scales", std::to_string(min_scales));
  manifest.set("seed", g.seed ? std::to_string(*g.seed) : "unknown");
  emit(manifest, dir / "lambda.csv", rws::lambda_csv(est));
  emit(manifest, dir / "tau.csv", rws::tau_csv(est));
  emit(manifest, dir / "spectrum.csv", rws::estimated_spectrum_csv(est));
  emit(manifest, dir / "meta.txt", rws::meta_text(est.metadata));
  if (g.gnuplot) emit(manifest, dir / "spectrum.gp", spectrum_plot_script());
  manifest.write(dir);
  std::cout << "q_c=" << rws::io::format_number(est.q_c)
            << " h_max=" << rws::io::format_optional(est.h_max) << '\n';
  return 0;
}

struct KernelArgs {
  std::string kind;
  double m = 1.0, sigma = 0.3, alpha0 = 0.0, nu = 2.0, beta = 4.0, c = 1.0, H = 0.5;
};

rws::KernelLaw make_kernel(const KernelArgs& a) {
  if (a.kind == "gaussian") return rws::GaussianKernel{a.m, a.sigma};
  if (a.kind == "gamma") return rws::ShiftedGammaKernel{a.alpha0, a.nu, a.beta};
  if (a.kind == "poisson") return rws::ShiftedPoissonKernel{a.alpha0, a.c};
  if (a.kind == "dirac") return rws::DiracKernel{a.H};
  throw rws::Error(rws::ErrorKind::parse, "unknown kernel '" + a.kind + "'");
}

int run_kernel(const Globals& g, const KernelArgs& args) {
  const auto kernel = make_kernel(args);
  std::cout << "kernel " << rws::kernel_name(kernel) << '\n';
  const bool has_threshold = std::holds_alternative<rws::ShiftedGammaKernel>(kernel) ||
                             std::holds_alternative<rws::ShiftedPoissonKernel>(kernel);
  if (has_threshold) std::cout << "alpha_star=" << rws::io::format_number(rws::kernel_alpha_star(kernel)) << '\n';
  if (const auto* gk = std::get_if<rws::GaussianKernel>(&kernel)) {
    std::cout << "threshold m > " << rws::io::format_number(gk->sigma * std::sqrt(2.0 * rws::ln2)) << '\n';
  }
  if (auto violation = rws::kernel_violation(kernel)) {
    std::cout << "valid=false\n";
    std::cerr << "error: kernel-validity: " << *violation << '\n';
    return 3;
  }
  std::cout << "valid=true\n";

  const auto grid = rws::uniform_grid(g.grid_step, g.alpha_max);
  const rws::LogDensity density{kernel};
  const auto sampled = density.sample(grid);
  const auto spectrum = rws::spectrum_from_rho(density, grid);

  const auto dir = prepare_out(g);
  Manifest manifest("kernel");
  manifest.set("config.kernel", rws::kernel_name(kernel));
  manifest.set("config.grid_step", rws::io::format_number(g.grid_step));
  manifest.set("config.alpha_max", rws::io::format_number(g.alpha_max));
  manifest.set("seed", "none");
  emit(manifest, dir / "rho.csv", rws::density_csv(sampled));
  emit(manifest, dir / "spectrum.csv", rws::spectrum_csv(spectrum));
  if (g.gnuplot) emit(manifest, dir / "kernel.gp", kernel_plot_script());
  manifest.write(dir);
  return 0;
}

int run_selftest() {
  int failures = 0;
  for (const auto& check : rws::selftest::run_all()) {
    std::cout << (check.passed ? "ok   " : "FAIL ") << check.name;
    if (!check.passed) {
      std::cout << ": " << check.detail;
      ++failures;
    }
    std::cout << '\n';
  }
  if (failures) {
    std::cerr << failures << " selftest check(s) failed\n";
    return 1;
  }
  std::cout << "all checks passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random wavelet series synthesis and multifractal analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);

  Globals g;
  app.add_option("--seed", g.seed, "RNG seed (synth) or recorded source seed (analyze)");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--grid-step", g.grid_step, "alpha/h grid step")->capture_default_str();
  app.add_option("--scales", g.scales, "number of finest scales used in regressions")->capture_default_str();
  app.add_option("--wavelet", g.wavelet, "db<order>; synth overrides the config, analyze defaults to db3");
  app.add_option("--alpha-max", g.alpha_max, "upper end of the alpha/h grid")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads, 0 = hardware concurrency")->capture_default_str();
  app.add_flag("--gnuplot", g.gnuplot, "also write a gnuplot script");

  auto* synth = app.add_subcommand("synth", "synthesize a signal from a config file");
  std::string config_path;
  bool csv = false;
  synth->add_option("config", config_path, "config file")->required();
  synth->add_flag("--csv", csv, "also write signal.csv");

  auto* analyze = app.add_subcommand("analyze", "estimate d2 and d1 of a signal");
  std::string signal_path;
  double q_lo = -5.0, q_hi = 10.0, q_step = 0.1;
  int min_scales = 3;
  analyze->add_option("signal", signal_path, "rws-sig or CSV signal file")->required();
  analyze->add_option("--q-min", q_lo)->capture_default_str();
  analyze->add_option("--q-max", q_hi)->capture_default_str();
  analyze->add_option("--q-step", q_step)->capture_default_str();
  analyze->add_option("--min-scales", min_scales, "scales with N_j > 0 needed for a lambda value")
      ->capture_default_str();

  auto* kernel = app.add_subcommand("kernel", "tabulate rho and d for a selfsimilarity kernel");
  KernelArgs kargs;
  kernel->add_option("kind", kargs.kind, "gaussian|gamma|poisson|dirac")
      ->required()
      ->check(CLI::IsMember({"gaussian", "gamma", "poisson", "dirac"}));
  kernel->add_option("--m", kargs.m)->capture_default_str();
  kernel->add_option("--sigma", kargs.sigma)->capture_default_str();
  kernel->add_option("--alpha0", kargs.alpha0)->capture_default_str();
  kernel->add_option("--nu", kargs.nu)->capture_default_str();
  kernel->add_option("--beta", kargs.beta)->capture_default_str();
  kernel->add_option("--c", kargs.c)->capture_default_str();
  kernel->add_option("--H", kargs.H)->capture_default_str();

  auto* selftest = app.add_subcommand("selftest", "run the built-in numerical checks");

  for (auto* sub : {synth, analyze, kernel, selftest}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return run_synth(g, config_path, csv);
    if (*analyze) return run_analyze(g, signal_path, q_lo, q_hi, q_step, min_scales);
    if (*kernel) return run_kernel(g, kargs);
    return run_selftest();
  } catch (const rws::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_input_error() ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
