#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "rws/error.hpp"
#include "rws/io.hpp"
#include "rws/rng.hpp"
#include "rws/spectra.hpp"
#include "rws/wavelet.hpp"

namespace rws {

inline constexpr double infinite_alpha = std::numeric_limits<double>::infinity();

/// Law of alpha = -log2|C_{j,k}|/j at one scale, with an atom at +inf for
/// zero coefficients.
struct ScaleLawTable {
  struct Tabulated {};
  using Sampler = std::variant<Tabulated, KernelLaw>;

  int j = 0;
  std::vector<double> alpha_grid;  // tabulated laws only
  std::vector<double> cdf;         // same length, ends at 1 - p_inf
  double p_inf = 0.0;
  double alpha_cap = 0.0;
  Sampler sampler = Tabulated{};

  bool tabulated() const { return std::holds_alternative<Tabulated>(sampler); }

  /// Mass on (-inf, alpha], excluding the atom at +inf.
  double cdf_at(double alpha) const {
    if (tabulated()) {
      if (alpha_grid.empty() || alpha < alpha_grid.front()) return 0.0;
      if (alpha >= alpha_grid.back()) return cdf.back();
      const auto it = std::upper_bound(alpha_grid.begin(), alpha_grid.end(), alpha);
      const auto i = static_cast<std::size_t>(it - alpha_grid.begin());
      const double t = (alpha - alpha_grid[i - 1]) / (alpha_grid[i] - alpha_grid[i - 1]);
      return cdf[i - 1] + t * (cdf[i] - cdf[i - 1]);
    }
    if (const auto* dirac = std::get_if<DiracKernel>(&std::get<KernelLaw>(sampler))) {
      return alpha >= dirac->H ? 1.0 - p_inf : 0.0;
    }
    throw Error(ErrorKind::unsupported_variant, "cdf_at is only tabulated for table and dirac laws");
  }
};

// ---------------------------------------------------------------------------
// Law construction

/// Per-scale law whose upper logarithmic density is the target spectrum:
/// density (j ln2 / h_max) 2^{j (d(alpha) - 1)} on [h_min, h_max], remaining
/// mass at +inf. A single-point spectrum degenerates to an atom at H.
inline ScaleLawTable scale_law_from_spectrum(const SpectrumCurve& curve, int j) {
  if (j < 1) throw Error(ErrorKind::domain, "scale index must be >= 1");
  const auto diag = check_admissible(curve);
  if (!diag.valid) throw Error(ErrorKind::admissibility, diag.violations.front());

  ScaleLawTable law;
  law.j = j;
  law.alpha_cap = curve.h_max;
  const double h_min = curve.h_min;
  const double h_max = curve.h_max;
  if (h_max - h_min <= 1e-12 * std::max(1.0, h_max)) {
    law.sampler = KernelLaw{DiracKernel{h_max}};
    return law;
  }

  // Nodes: uniform in [h_min, h_max] plus every curve node inside, so d is
  // linear between consecutive nodes.
  const double step = std::min(0.002, h_max / 2048.0);
  std::vector<double> nodes;
  const auto count = static_cast<long>(std::ceil((h_max - h_min) / step));
  for (long i = 0; i < count; ++i) nodes.push_back(h_min + static_cast<double>(i) * step);
  for (double h : curve.h_grid) {
    if (h > h_min && h < h_max) nodes.push_back(h);
  }
  nodes.push_back(h_max);
  nodes = detail::merge_points(std::move(nodes), {});

  const double prefactor = j * ln2 / h_max;
  std::vector<double> log2_density(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto d = curve.at(nodes[i]);
    log2_density[i] = d ? j * (*d - 1.0) : -HUGE_VAL;
  }

  law.alpha_grid.reserve(nodes.size() + 1);
  law.cdf.reserve(nodes.size() + 1);
  if (h_min > 0.0) {
    law.alpha_grid.push_back(0.0);
    law.cdf.push_back(0.0);
  }
  law.alpha_grid.push_back(nodes.front());
  law.cdf.push_back(0.0);
  double total = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    // The log-density is linear on each interval; integrate the exponential exactly.
    const double width = nodes[i] - nodes[i - 1];
    const double l0 = log2_density[i - 1];
    const double l1 = log2_density[i];
    double piece = 0.0;
    if (std::isfinite(l0) && std::isfinite(l1)) {
      const double slope = (l1 - l0) * ln2;
      const double f0 = std::exp2(l0);
      piece = std::abs(slope) < 1e-12 ? width * f0 : width * f0 * std::expm1(slope) / slope;
    }
    total += prefactor * piece;
    law.alpha_grid.push_back(nodes[i]);
    law.cdf.push_back(total);
  }
  if (total > 1.0 + 1e-12) {
    throw Error(ErrorKind::admissibility,
                "scale-" + std::to_string(j) + " law has total mass " + io::format_number(total) +
                    " > 1");
  }
  law.p_inf = 1.0 - total;
  return law;
}

/// Per-scale law of a kernel-driven series, sampled directly through the
/// closed-form j-fold convolution of the kernel.
inline ScaleLawTable scale_law_from_kernel(const KernelLaw& kernel, int j) {
  if (j < 1) throw Error(ErrorKind::domain, "scale index must be >= 1");
  validate_kernel(kernel);
  ScaleLawTable law;
  law.j = j;
  law.sampler = kernel;
  const double jd = j;
  struct {
    double jd;
    double operator()(const GaussianKernel& g) const { return g.m + 12.0 * g.sigma / std::sqrt(jd); }
    double operator()(const ShiftedGammaKernel& g) const {
      return g.alpha0 + g.nu / g.beta + 12.0 * std::sqrt(jd * g.nu) / (g.beta * jd);
    }
    double operator()(const ShiftedPoissonKernel& p) const {
      return p.alpha0 + p.c + 12.0 * std::sqrt(p.c / jd);
    }
    double operator()(const DiracKernel& d) const { return d.H; }
  } cap{jd};
  law.alpha_cap = std::visit(cap, kernel);
  return law;
}

/// Degenerate flat-spectrum law: atom of mass j 2^{-j} at alpha0, rest at +inf.
inline ScaleLawTable scale_law_flat(double alpha0, int j) {
  if (!(alpha0 > 0.0)) throw Error(ErrorKind::domain, "flat mode needs alpha0 > 0");
  if (j < 1) throw Error(ErrorKind::domain, "scale index must be >= 1");
  ScaleLawTable law;
  law.j = j;
  law.sampler = KernelLaw{DiracKernel{alpha0}};
  law.p_inf = 1.0 - j * std::exp2(-j);
  law.alpha_cap = alpha0;
  return law;
}

// ---------------------------------------------------------------------------
// Sampling

namespace detail {

template <class Gen>
double draw_direct(const KernelLaw& kernel, int j, Gen& gen) {
  const double jd = j;
  struct {
    Gen& gen;
    double jd;
    double operator()(const GaussianKernel& g) {
      std::normal_distribution<double> dist(g.m, g.sigma / std::sqrt(jd));
      return dist(gen);
    }
    double operator()(const ShiftedGammaKernel& g) {
      std::gamma_distribution<double> dist(jd * g.nu, 1.0 / g.beta);
      return g.alpha0 + dist(gen) / jd;
    }
    double operator()(const ShiftedPoissonKernel& p) {
      std::poisson_distribution<long long> dist(jd * p.c);
      return p.alpha0 + static_cast<double>(dist(gen)) / jd;
    }
    double operator()(const DiracKernel& d) { return d.H; }
  } visitor{gen, jd};
  // Exponents <= 0 would give |C| >= 1; they are redrawn (truncation to alpha > 0).
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double alpha = std::visit(visitor, kernel);
    if (alpha > 0.0) return alpha;
  }
  throw Error(ErrorKind::domain, "kernel law puts almost no mass on alpha > 0");
}

}  // namespace detail

/// Draws one exponent; +inf stands for a zero coefficient.
inline double sample_alpha(const ScaleLawTable& law, KeyedStream& stream) {
  if (law.tabulated()) {
    const double u = stream.uniform();
    if (law.cdf.empty() || u >= law.cdf.back()) return infinite_alpha;
    const auto it = std::upper_bound(law.cdf.begin(), law.cdf.end(), u);
    const auto i = static_cast<std::size_t>(it - law.cdf.begin());
    const double t = (u - law.cdf[i - 1]) / (law.cdf[i] - law.cdf[i - 1]);
    return law.alpha_grid[i - 1] + t * (law.alpha_grid[i] - law.alpha_grid[i - 1]);
  }
  if (law.p_inf > 0.0 && stream.uniform() >= 1.0 - law.p_inf) return infinite_alpha;
  return detail::draw_direct(std::get<KernelLaw>(law.sampler), law.j, stream);
}

// ---------------------------------------------------------------------------
// Synthesis

struct SpectrumSource {
  SpectrumCurve curve;
};

struct FlatSource {
  double alpha0 = 0.0;
};

using SynthesisSource = std::variant<SpectrumSource, KernelLaw, FlatSource>;

enum class SignScheme {
  rademacher,
  all_positive,  // testing only: every chi_{jk} = +1
};

struct SynthesisConfig {
  int J = 0;
  SynthesisSource source;
  int wavelet_order = 10;
  std::uint64_t seed = 0;
  SignScheme sign_scheme = SignScheme::rademacher;
};

inline void validate_config(const SynthesisConfig& config) {
  if (config.J < 4 || config.J > 30) {
    throw Error(ErrorKind::domain, "J must be in 4..30, got " + std::to_string(config.J));
  }
  daubechies_filter(config.wavelet_order);
  if (const auto* spectrum = std::get_if<SpectrumSource>(&config.source)) {
    const auto diag = check_admissible(spectrum->curve);
    if (!diag.valid) throw Error(ErrorKind::admissibility, diag.violations.front());
  } else if (const auto* kernel = std::get_if<KernelLaw>(&config.source)) {
    validate_kernel(*kernel);
  } else if (!(std::get<FlatSource>(config.source).alpha0 > 0.0)) {
    throw Error(ErrorKind::domain, "flat mode needs alpha0 > 0");
  }
}

/// Upper end of the Hölder range implied by the source, if finite.
inline std::optional<double> source_h_max(const SynthesisSource& source) {
  if (const auto* spectrum = std::get_if<SpectrumSource>(&source)) return spectrum->curve.h_max;
  if (const auto* kernel = std::get_if<KernelLaw>(&source)) {
    try {
      const auto grid = uniform_grid(0.005, 4.0 * std::max(1.0, kernel_peak(*kernel)));
      return spectrum_from_rho(LogDensity{*kernel}, grid).h_max;
    } catch (const Error&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

/// Warns when h_max reaches order - 1, a rough proxy for the regularity of
/// the Daubechies wavelet used for synthesis.
inline std::optional<std::string> regularity_warning(const SynthesisConfig& config) {
  const auto h_max = source_h_max(config.source);
  if (h_max && *h_max >= config.wavelet_order - 1) {
    return "h_max=" + io::format_number(*h_max) + " is not below db" +
           std::to_string(config.wavelet_order) + " regularity proxy " +
           std::to_string(config.wavelet_order - 1);
  }
  return std::nullopt;
}

inline ScaleLawTable scale_law(const SynthesisSource& source, int j) {
  if (const auto* spectrum = std::get_if<SpectrumSource>(&source)) {
    return scale_law_from_spectrum(spectrum->curve, j);
  }
  if (const auto* kernel = std::get_if<KernelLaw>(&source)) return scale_law_from_kernel(*kernel, j);
  return scale_law_flat(std::get<FlatSource>(source).alpha0, j);
}

namespace detail {

// Splits [0, n) into at most `threads` contiguous chunks; runs inline when
// n < grain.
template <class F>
void parallel_for(std::size_t n, unsigned threads, std::size_t grain, F&& body) {
  if (threads <= 1 || n < grain || n < 2) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> workers;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    workers.emplace_back([&body, begin, end = std::min(n, begin + chunk)] { body(begin, end); });
  }
}

inline unsigned resolve_threads(unsigned threads) {
  if (threads != 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace detail

/// C_{j,k} = chi_{jk} 2^{-j alpha_{jk}}, each coefficient drawn from its own
/// keyed stream (seed, j, k): the first output gives the sign, the rest the
/// exponent. Level 0 has no exponent: kernels put |C_{0,0}| = 1 there, the
/// spectrum and flat laws put no mass at j = 0. The coarse mean is 0.
/// `threads` = 0 uses the hardware concurrency; output does not depend on it.
inline CoefficientPyramid generate_coefficients(const SynthesisConfig& config, unsigned threads = 0) {
  validate_config(config);
  CoefficientPyramid pyramid = CoefficientPyramid::zeros(config.J);
  const unsigned workers = detail::resolve_threads(threads);

  for (int j = 0; j < config.J; ++j) {
    auto& level = pyramid.levels[j];
    if (j == 0) {
      if (std::holds_alternative<KernelLaw>(config.source)) {
        KeyedStream stream(config.seed, 0, 0);
        const bool negative = (stream() >> 63) != 0 && config.sign_scheme == SignScheme::rademacher;
        level[0] = negative ? -1.0 : 1.0;
      }
      continue;
    }
    const ScaleLawTable law = scale_law(config.source, j);
    detail::parallel_for(level.size(), workers, 4096, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        KeyedStream stream(config.seed, static_cast<std::uint64_t>(j), k);
        const bool negative = (stream() >> 63) != 0 && config.sign_scheme == SignScheme::rademacher;
        const double alpha = sample_alpha(law, stream);
        const double magnitude = std::isinf(alpha) ? 0.0 : std::exp2(-j * alpha);
        level[k] = negative ? -magnitude : magnitude;
      }
    });
  }
  return pyramid;
}

/// Realization sum_j sum_k C_{j,k} psi_{j,k} sampled on 2^J points.
inline Signal synthesize(const SynthesisConfig& config, unsigned threads = 0) {
  const auto pyramid = generate_coefficients(config, threads);
  return inverse_dwt(pyramid, daubechies_filter(config.wavelet_order));
}

/// Flat-spectrum series: each C_{j,k} is nonzero with probability j 2^{-j},
/// and then equals +-2^{-j alpha0}.
inline CoefficientPyramid flat_rws(double alpha0, int J, std::uint64_t seed, unsigned threads = 0) {
  if (!(alpha0 > 0.0)) throw Error(ErrorKind::domain, "flat mode needs alpha0 > 0");
  SynthesisConfig config;
  config.J = J;
  config.source = FlatSource{alpha0};
  config.seed = seed;
  return generate_coefficients(config, threads);
}

// ---------------------------------------------------------------------------
// Config files

/// Parsed config plus the key-values it resolved to, in file order of keys.
struct LoadedConfig {
  SynthesisConfig config;
  std::map<std::string, std::string> resolved;
};

namespace detail {

inline double parse_real(const std::map<std::string, std::string>& kv, const std::string& key) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorKind::parse, "missing key '" + key + "'");
  try {
    const auto value = io::parse_optional(it->second);
    if (!value) throw Error(ErrorKind::parse, "empty value");
    return *value;
  } catch (const Error&) {
    throw Error(ErrorKind::parse, "key '" + key + "': not a number: '" + it->second + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorKind::parse, "key '" + key + "': not an unsigned integer: '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, "key '" + key + "': out of range: '" + text + "'");
  }
}

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Parses the flat key=value config format. `base_dir` resolves a relative
/// spectrum_file. Unknown or misplaced keys are parse errors; numeric
/// validity is not checked here.
inline LoadedConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
  static const std::vector<std::string> known = {"mode", "J", "seed", "wavelet", "spectrum_file",
                                                 "kernel", "m", "sigma", "alpha0", "nu",
                                                 "beta", "c", "H"};
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error(ErrorKind::parse, "unknown key '" + key + "'");
    }
    if (kv.contains(key)) throw Error(ErrorKind::parse, "duplicate key '" + key + "'");
    kv[key] = value;
  }

  LoadedConfig loaded;
  auto& config = loaded.config;
  auto& resolved = loaded.resolved;
  const auto require = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorKind::parse, "missing key '" + key + "'");
    return it->second;
  };
  std::vector<std::string> allowed = {"mode", "J", "seed", "wavelet"};

  const std::string mode = require("mode");
  const auto J = detail::parse_u64("J", require("J"));
  if (J > 64) throw Error(ErrorKind::parse, "key 'J': out of range");
  config.J = static_cast<int>(J);
  config.seed = kv.contains("seed") ? detail::parse_u64("seed", kv["seed"]) : 0;
  const std::string wavelet = kv.contains("wavelet") ? kv["wavelet"] : "db10";
  try {
    config.wavelet_order = parse_wavelet(wavelet).order;
  } catch (const Error& e) {
    throw Error(ErrorKind::parse, std::string("key 'wavelet': ") + e.what());
  }
  resolved["mode"] = mode;
  resolved["J"] = std::to_string(config.J);
  resolved["seed"] = std::to_string(config.seed);
  resolved["wavelet"] = "db" + std::to_string(config.wavelet_order);

  if (mode == "spectrum") {
    allowed.push_back("spectrum_file");
    std::filesystem::path path = require("spectrum_file");
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    config.source = SpectrumSource{parse_spectrum_csv(io::read_file(path.string()))};
    resolved["spectrum_file"] = path.string();
  } else if (mode == "kernel") {
    allowed.push_back("kernel");
    const std::string kind = require("kernel");
    resolved["kernel"] = kind;
    const auto take = [&](const std::string& key) {
      allowed.push_back(key);
      const double v = detail::parse_real(kv, key);
      resolved[key] = io::format_number(v);
      return v;
    };
    if (kind == "gaussian") {
      const double m = take("m");
      config.source = KernelLaw{GaussianKernel{m, take("sigma")}};
    } else if (kind == "gamma") {
      const double a0 = take("alpha0");
      const double nu = take("nu");
      config.source = KernelLaw{ShiftedGammaKernel{a0, nu, take("beta")}};
    } else if (kind == "poisson") {
      const double a0 = take("alpha0");
      config.source = KernelLaw{ShiftedPoissonKernel{a0, take("c")}};
    } else if (kind == "dirac") {
      config.source = KernelLaw{DiracKernel{take("H")}};
    } else {
      throw Error(ErrorKind::parse, "key 'kernel': unknown kernel '" + kind + "'");
    }
  } else if (mode == "flat") {
    allowed.push_back("alpha0");
    const double a0 = detail::parse_real(kv, "alpha0");
    config.source = FlatSource{a0};
    resolved["alpha0"] = io::format_number(a0);
  } else {
    throw Error(ErrorKind::parse, "key 'mode': expected spectrum|kernel|flat, got '" + mode + "'");
  }

  for (const auto& [key, value] : kv) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorKind::parse, "key '" + key + "' is not used by mode=" + mode);
    }
  }
  return loaded;
}

inline LoadedConfig load_config(const std::string& path) {
  return parse_config(io::read_file(path), std::filesystem::path(path).parent_path());
}

}  // namespace rws
