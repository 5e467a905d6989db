#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rws/error.hpp"
#include "rws/io.hpp"

namespace rws {

/// A value of [-inf, +inf) with -inf carried as an empty optional, so it can
/// never leak into arithmetic.
using Extended = std::optional<double>;

inline constexpr double log2e = std::numbers::log2e;
inline constexpr double ln2 = std::numbers::ln2;

/// Uniform grid step, 2*step, ..., up to `hi` (inclusive within rounding).
inline std::vector<double> uniform_grid(double step, double hi) {
  std::vector<double> grid;
  const auto n = static_cast<long>(std::floor(hi / step + 1e-9));
  grid.reserve(static_cast<std::size_t>(std::max(0L, n)));
  for (long i = 1; i <= n; ++i) grid.push_back(static_cast<double>(i) * step);
  return grid;
}

// ---------------------------------------------------------------------------
// Spectrum of singularities on a grid

struct SpectrumCurve {
  std::vector<double> h_grid;
  std::vector<Extended> d_values;
  double h_min = 0.0;
  double h_max = 0.0;

  /// Linear interpolation between present neighbours; absent outside
  /// [h_min, h_max] or next to an absent grid value.
  Extended at(double h) const {
    if (h_grid.empty()) return std::nullopt;
    const double tol = 1e-12 * std::max(1.0, h_max);
    if (h < h_min - tol || h > h_max + tol) return std::nullopt;
    auto it = std::lower_bound(h_grid.begin(), h_grid.end(), h - tol);
    if (it == h_grid.end()) return std::nullopt;
    const auto hi = static_cast<std::size_t>(it - h_grid.begin());
    if (std::abs(h_grid[hi] - h) <= tol) return d_values[hi];
    if (hi == 0) return std::nullopt;
    const auto lo = hi - 1;
    if (!d_values[lo] || !d_values[hi]) return std::nullopt;
    const double t = (h - h_grid[lo]) / (h_grid[hi] - h_grid[lo]);
    return *d_values[lo] + t * (*d_values[hi] - *d_values[lo]);
  }

  /// Builds a curve from a callable d(h) returning Extended on the given grid,
  /// taking h_min/h_max from the first/last present values.
  template <class F>
  static SpectrumCurve sample(std::vector<double> grid, F&& d) {
    SpectrumCurve curve;
    curve.h_grid = std::move(grid);
    curve.d_values.reserve(curve.h_grid.size());
    for (double h : curve.h_grid) curve.d_values.push_back(d(h));
    curve.refresh_bounds();
    return curve;
  }

  void refresh_bounds() {
    bool seen = false;
    for (std::size_t i = 0; i < h_grid.size(); ++i) {
      if (!d_values[i]) continue;
      if (!seen) h_min = h_grid[i];
      h_max = h_grid[i];
      seen = true;
    }
  }
};

struct Diagnostics {
  bool valid = true;
  std::vector<std::string> violations;

  void fail(std::string message) {
    valid = false;
    violations.push_back(std::move(message));
  }
};

/// Checks the conditions under which a curve is the spectrum of some random
/// wavelet series: d <= 1, d >= 0 exactly on [h_min, h_max], d(h)/h
/// non-decreasing there, and d(h_max) = 1. Never throws.
inline Diagnostics check_admissible(const SpectrumCurve& curve) {
  Diagnostics diag;
  const auto n = curve.h_grid.size();
  if (n == 0 || curve.d_values.size() != n) {
    diag.fail("grid and values must be non-empty and of equal length");
    return diag;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!(curve.h_grid[i] > 0.0)) {
      diag.fail("h grid must be positive");
      return diag;
    }
    if (i > 0 && !(curve.h_grid[i] > curve.h_grid[i - 1])) {
      diag.fail("h grid must be strictly increasing");
      return diag;
    }
  }
  if (!(curve.h_min > 0.0) || curve.h_min > curve.h_max) {
    diag.fail("need 0 < h_min <= h_max");
    return diag;
  }

  const double tol = 1e-12 * std::max(1.0, curve.h_max);
  std::optional<double> last_ratio;
  std::size_t nearest_max = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double h = curve.h_grid[i];
    const auto& d = curve.d_values[i];
    if (std::abs(h - curve.h_max) < std::abs(curve.h_grid[nearest_max] - curve.h_max)) {
      nearest_max = i;
    }
    const bool inside = h >= curve.h_min - tol && h <= curve.h_max + tol;
    if (!inside) {
      if (d) diag.fail("d present outside [h_min, h_max] at h=" + io::format_number(h));
      continue;
    }
    if (!d) {
      diag.fail("d absent inside [h_min, h_max] at h=" + io::format_number(h));
      continue;
    }
    if (*d > 1.0 + 1e-12) diag.fail("d > 1 at h=" + io::format_number(h));
    if (*d < 0.0) diag.fail("d < 0 inside [h_min, h_max] at h=" + io::format_number(h));
    const double ratio = *d / h;
    if (last_ratio && ratio < *last_ratio - 1e-12) {
      diag.fail("d(h)/h decreases at h=" + io::format_number(h));
    }
    last_ratio = ratio;
  }
  const auto& d_top = curve.d_values[nearest_max];
  if (!d_top || std::abs(*d_top - 1.0) > 1e-9) {
    diag.fail("d(h_max) = " + (d_top ? io::format_number(*d_top) : std::string("-inf")) +
              " != 1");
  }
  return diag;
}

// ---------------------------------------------------------------------------
// Selfsimilarity kernels

struct GaussianKernel {
  double m = 0.0;
  double sigma = 0.0;
};

struct ShiftedGammaKernel {
  double alpha0 = 0.0;
  double nu = 0.0;
  double beta = 0.0;
};

struct ShiftedPoissonKernel {
  double alpha0 = 0.0;
  double c = 0.0;
};

/// Monofractal kernel: every exponent equals H.
struct DiracKernel {
  double H = 0.0;
};

using KernelLaw = std::variant<GaussianKernel, ShiftedGammaKernel, ShiftedPoissonKernel, DiracKernel>;

inline std::string kernel_name(const KernelLaw& kernel) {
  struct {
    std::string operator()(const GaussianKernel&) const { return "gaussian"; }
    std::string operator()(const ShiftedGammaKernel&) const { return "gamma"; }
    std::string operator()(const ShiftedPoissonKernel&) const { return "poisson"; }
    std::string operator()(const DiracKernel&) const { return "dirac"; }
  } visitor;
  return std::visit(visitor, kernel);
}

namespace detail {

// Bisection on [lo, hi] where f(lo) and f(hi) have opposite signs; runs until
// the bracket stops shrinking in double precision.
template <class F>
double bisect(F&& f, double lo, double hi) {
  double f_lo = f(lo);
  for (int iter = 0; iter < 2000; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f_mid = f(mid);
    if (f_mid == 0.0) return mid;
    if ((f_mid < 0.0) == (f_lo < 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(f(lo)) < std::abs(f(hi)) ? lo : hi;
}

}  // namespace detail

/// Left-hand side of the threshold equation for the shifted Gamma kernel,
/// 1 + nu log2(-a) + beta log2(e) a + nu log2(beta e / nu), for a < 0.
inline double gamma_threshold_residual(double nu, double beta, double a) {
  return 1.0 + nu * std::log2(-a) + beta * log2e * a + nu * std::log2(beta * std::numbers::e / nu);
}

/// Left-hand side of the threshold equation for the shifted Poisson kernel,
/// 1 - c log2(e) - a log2(c e / (-a)), for a < 0.
inline double poisson_threshold_residual(double c, double a) {
  return 1.0 - c * log2e - a * std::log2(c * std::numbers::e / (-a));
}

/// Threshold alpha* of the Gamma and Poisson kernels: the largest root of the
/// kernel's threshold equation.
inline double kernel_alpha_star(const KernelLaw& kernel) {
  if (const auto* g = std::get_if<ShiftedGammaKernel>(&kernel)) {
    if (!(g->nu > 0.0) || !(g->beta > 0.0)) {
      throw Error(ErrorKind::kernel_validity, "gamma kernel needs nu > 0 and beta > 0");
    }
    // The residual peaks at -nu/beta with value 1 and tends to -inf at 0-.
    const auto f = [&](double a) { return gamma_threshold_residual(g->nu, g->beta, a); };
    const double peak = -g->nu / g->beta;
    double edge = 0.5 * peak;
    while (f(edge) > 0.0) edge *= 0.5;
    return detail::bisect(f, peak, edge);
  }
  if (const auto* p = std::get_if<ShiftedPoissonKernel>(&kernel)) {
    if (!(p->c > 0.0)) throw Error(ErrorKind::kernel_validity, "poisson kernel needs c > 0");
    const auto f = [&](double a) { return poisson_threshold_residual(p->c, a); };
    // As a function of y = -a the residual rises from 1 - c log2(e) at 0+ to 1 at
    // y = c, then decreases to -inf.
    if (1.0 - p->c * log2e < 0.0) {
      double edge = -p->c * 1e-3;
      while (f(edge) > 0.0) edge *= 1e-3;
      return detail::bisect(f, -p->c, edge);
    }
    double lo = -2.0 * p->c;
    while (f(lo) > 0.0) lo *= 2.0;
    return detail::bisect(f, lo, -p->c);
  }
  throw Error(ErrorKind::unsupported_variant,
              kernel_name(kernel) + " kernel has no alpha* threshold");
}

/// Empty when the kernel satisfies its validity condition, otherwise a
/// message naming the violated threshold.
inline std::optional<std::string> kernel_violation(const KernelLaw& kernel) {
  struct {
    std::optional<std::string> operator()(const GaussianKernel& g) const {
      if (!(g.sigma > 0.0)) return "sigma must be > 0";
      const double threshold = g.sigma * std::sqrt(2.0 * ln2);
      if (!(g.m > threshold)) {
        return "m <= sigma*sqrt(2 ln 2) (m=" + io::format_number(g.m) +
               ", threshold=" + io::format_number(threshold) + ")";
      }
      return std::nullopt;
    }
    std::optional<std::string> operator()(const ShiftedGammaKernel& g) const {
      if (!(g.nu > 0.0) || !(g.beta > 0.0)) return "nu and beta must be > 0";
      const double star = kernel_alpha_star(g);
      if (!(g.alpha0 > star)) {
        return "alpha0 <= alpha*(nu, beta) (alpha0=" + io::format_number(g.alpha0) +
               ", alpha*=" + io::format_number(star) + ")";
      }
      return std::nullopt;
    }
    std::optional<std::string> operator()(const ShiftedPoissonKernel& p) const {
      if (!(p.c > 0.0)) return "c must be > 0";
      // For c <= ln 2 the density is already non-negative just above alpha0,
      // so the shift itself has to be positive.
      const double star = (1.0 - p.c * log2e < 0.0) ? kernel_alpha_star(p) : 0.0;
      if (!(p.alpha0 > star)) {
        return "alpha0 <= alpha*(c) (alpha0=" + io::format_number(p.alpha0) +
               ", alpha*=" + io::format_number(star) + ")";
      }
      return std::nullopt;
    }
    std::optional<std::string> operator()(const DiracKernel& d) const {
      if (!(d.H > 0.0)) return "H must be > 0";
      return std::nullopt;
    }
  } visitor;
  return std::visit(visitor, kernel);
}

inline void validate_kernel(const KernelLaw& kernel) {
  if (auto violation = kernel_violation(kernel)) {
    throw Error(ErrorKind::kernel_validity, kernel_name(kernel) + ": " + *violation);
  }
}

/// Location of the maximum (value 1) of the kernel's density.
inline double kernel_peak(const KernelLaw& kernel) {
  struct {
    double operator()(const GaussianKernel& g) const { return g.m; }
    double operator()(const ShiftedGammaKernel& g) const { return g.alpha0 + g.nu / g.beta; }
    double operator()(const ShiftedPoissonKernel& p) const { return p.alpha0 + p.c; }
    double operator()(const DiracKernel& d) const { return d.H; }
  } visitor;
  return std::visit(visitor, kernel);
}

/// Closed-form upper logarithmic density of a kernel-driven series.
inline Extended rho_of_kernel(const KernelLaw& kernel, double alpha) {
  validate_kernel(kernel);
  struct {
    double alpha;
    Extended operator()(const GaussianKernel& g) const {
      const double u = alpha - g.m;
      return 1.0 - log2e * u * u / (2.0 * g.sigma * g.sigma);
    }
    Extended operator()(const ShiftedGammaKernel& g) const {
      const double u = alpha - g.alpha0;
      if (!(u > 0.0)) return std::nullopt;
      return 1.0 + g.nu * std::log2(u) - g.beta * log2e * u +
             g.nu * std::log2(g.beta * std::numbers::e / g.nu);
    }
    Extended operator()(const ShiftedPoissonKernel& p) const {
      const double u = alpha - p.alpha0;
      if (!(u > 0.0)) return std::nullopt;
      return 1.0 - p.c * log2e + u * std::log2(p.c * std::numbers::e / u);
    }
    Extended operator()(const DiracKernel& d) const {
      if (std::abs(alpha - d.H) <= 1e-12 * std::max(1.0, d.H)) return 1.0;
      return std::nullopt;
    }
  } visitor{alpha};
  return std::visit(visitor, kernel);
}

// ---------------------------------------------------------------------------
// Upper logarithmic density and the map to the spectrum

struct SampledDensity {
  std::vector<double> alpha_grid;  // strictly increasing, positive
  std::vector<Extended> rho_values;
};

struct LogDensity {
  std::variant<KernelLaw, SampledDensity> representation;

  /// Grid samples; closed-form kernels are evaluated on `grid`, with the
  /// Dirac location merged in so its single finite value is not missed.
  SampledDensity sample(const std::vector<double>& grid) const {
    if (const auto* sampled = std::get_if<SampledDensity>(&representation)) return *sampled;
    const auto& kernel = std::get<KernelLaw>(representation);
    std::vector<double> alphas = grid;
    if (const auto* dirac = std::get_if<DiracKernel>(&kernel)) {
      alphas.push_back(dirac->H);
      std::sort(alphas.begin(), alphas.end());
      alphas.erase(std::unique(alphas.begin(), alphas.end(),
                               [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
                   alphas.end());
    }
    SampledDensity out;
    out.alpha_grid = alphas;
    out.rho_values.reserve(alphas.size());
    for (double a : alphas) out.rho_values.push_back(rho_of_kernel(kernel, a));
    return out;
  }
};

/// Smallest grid alpha with rho >= 0, if any.
inline std::optional<double> gamma_check(const SampledDensity& density) {
  for (std::size_t i = 0; i < density.alpha_grid.size(); ++i) {
    if (density.rho_values[i] && *density.rho_values[i] >= 0.0) return density.alpha_grid[i];
  }
  return std::nullopt;
}

namespace detail {

inline std::vector<double> merge_points(std::vector<double> grid, std::initializer_list<double> extra) {
  for (double x : extra) grid.push_back(x);
  std::sort(grid.begin(), grid.end());
  const double tol = 1e-12 * std::max(1.0, grid.empty() ? 1.0 : std::abs(grid.back()));
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x : grid) {
    if (!out.empty() && std::abs(x - out.back()) <= tol) continue;
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

/// Spectrum of singularities d(h) = h sup_{alpha in (0,h]} rho(alpha)/alpha on
/// [h_min, h_max], absent outside. The sup is a running maximum over density
/// grid points <= h. The returned grid is `h_grid` with h_min and h_max merged in.
inline SpectrumCurve spectrum_from_rho(const LogDensity& density, const std::vector<double>& h_grid) {
  const SampledDensity sampled = density.sample(h_grid);
  const auto& alphas = sampled.alpha_grid;
  const auto& rho = sampled.rho_values;

  std::optional<double> best_ratio;
  std::optional<double> h_min;
  double rho_max = -HUGE_VAL;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > 0.0)) {
      throw Error(ErrorKind::domain, "density grid must be positive");
    }
    if (!rho[i]) continue;
    rho_max = std::max(rho_max, *rho[i]);
    if (*rho[i] >= 0.0 && !h_min) h_min = alphas[i];
    const double ratio = *rho[i] / alphas[i];
    if (!best_ratio || ratio > *best_ratio) best_ratio = ratio;
  }
  if (!h_min) {
    throw Error(ErrorKind::empty_spectrum,
                "rho < 0 everywhere: the series is almost surely globally C-infinity");
  }
  if (!(rho_max > 0.0)) {
    throw Error(ErrorKind::flat_spectrum,
                "rho <= 0 everywhere with rho = 0 at h_min=" + io::format_number(*h_min) +
                    ": almost sure flat spectrum d = 0 on [h_min, inf)");
  }

  SpectrumCurve curve;
  curve.h_min = *h_min;
  curve.h_max = 1.0 / *best_ratio;
  curve.h_grid = detail::merge_points(h_grid, {curve.h_min, curve.h_max});
  curve.d_values.reserve(curve.h_grid.size());

  const double tol = 1e-12 * std::max(1.0, curve.h_max);
  std::size_t next = 0;
  std::optional<double> running;
  for (double h : curve.h_grid) {
    while (next < alphas.size() && alphas[next] <= h + tol) {
      if (rho[next]) {
        const double ratio = *rho[next] / alphas[next];
        if (!running || ratio > *running) running = ratio;
      }
      ++next;
    }
    if (h < curve.h_min - tol || h > curve.h_max + tol || !running) {
      curve.d_values.push_back(std::nullopt);
    } else {
      curve.d_values.push_back(h * *running);
    }
  }
  return curve;
}

// ---------------------------------------------------------------------------
// CSV

/// "x,y" lines with absent y written as an empty field, under a one-line
/// comment header.
inline std::string curve_csv(const std::string& header, const std::vector<double>& xs,
                             const std::vector<Extended>& ys) {
  std::string out = "# " + header + "\n";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out += io::format_number(xs[i]);
    out += ',';
    out += io::format_optional(ys[i]);
    out += '\n';
  }
  return out;
}

inline std::string spectrum_csv(const SpectrumCurve& curve) {
  return curve_csv("h,d", curve.h_grid, curve.d_values);
}

inline std::string density_csv(const SampledDensity& density) {
  return curve_csv("alpha,rho", density.alpha_grid, density.rho_values);
}

namespace detail {

inline void parse_two_columns(const std::string& text, std::vector<double>& xs,
                              std::vector<Extended>& ys) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto fields = io::split_fields(line);
    if (fields.size() != 2) {
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected 2 fields");
    }
    Extended x;
    try {
      x = io::parse_optional(fields[0]);
    } catch (const Error&) {
      if (xs.empty()) continue;  // column header such as "h,d"
      throw;
    }
    if (!x) throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": empty abscissa");
    xs.push_back(*x);
    ys.push_back(io::parse_optional(fields[1]));
  }
}

}  // namespace detail

inline SpectrumCurve parse_spectrum_csv(const std::string& text) {
  SpectrumCurve curve;
  detail::parse_two_columns(text, curve.h_grid, curve.d_values);
  if (curve.h_grid.empty()) throw Error(ErrorKind::parse, "spectrum CSV has no rows");
  if (std::none_of(curve.d_values.begin(), curve.d_values.end(),
                   [](const Extended& d) { return d.has_value(); })) {
    throw Error(ErrorKind::parse, "spectrum CSV has no finite d values");
  }
  curve.refresh_bounds();
  return curve;
}

inline SampledDensity parse_density_csv(const std::string& text) {
  SampledDensity density;
  detail::parse_two_columns(text, density.alpha_grid, density.rho_values);
  return density;
}

}  // namespace rws
