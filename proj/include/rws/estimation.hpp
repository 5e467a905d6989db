#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rws/error.hpp"
#include "rws/io.hpp"
#include "rws/spectra.hpp"
#include "rws/synthesis.hpp"
#include "rws/wavelet.hpp"

namespace rws {

/// Sorted exponents -log2|C_{j,k}|/j per scale (zeros map to +inf). Level 0
/// is kept empty: the exponent is undefined there.
struct AlphaField {
  int J = 0;
  std::vector<std::vector<double>> levels;
};

inline AlphaField alpha_exponents(const CoefficientPyramid& pyramid) {
  pyramid.validate();
  AlphaField field;
  field.J = pyramid.J;
  field.levels.resize(static_cast<std::size_t>(pyramid.J));
  for (int j = 1; j < pyramid.J; ++j) {
    auto& out = field.levels[j];
    out.reserve(pyramid.levels[j].size());
    for (double c : pyramid.levels[j]) {
      out.push_back(c == 0.0 ? infinite_alpha : -std::log2(std::abs(c)) / j);
    }
    std::sort(out.begin(), out.end());
  }
  return field;
}

/// N_j(alpha) = #{k : |C_{j,k}| >= 2^{-alpha j}} = #{k : alpha_{jk} <= alpha}.
inline std::size_t count_N(const AlphaField& field, int j, double alpha) {
  if (j < 1 || j >= field.J) {
    throw Error(ErrorKind::range, "scale " + std::to_string(j) + " not in 1.." +
                                      std::to_string(field.J - 1));
  }
  const auto& level = field.levels[j];
  return static_cast<std::size_t>(std::upper_bound(level.begin(), level.end(), alpha) - level.begin());
}

namespace detail {

struct LineFit {
  double slope = 0.0;
  double rms_residual = 0.0;
};

inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (my + fit.slope * (x[i] - mx));
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  return fit;
}

/// The `scale_count` finest scales among j = 1..J-1, as [first, last].
inline std::pair<int, int> regression_scales(int J, int scale_count) {
  if (J - 1 < 3) {
    throw Error(ErrorKind::insufficient_scales,
                "need at least 3 scales with j >= 1, pyramid has " + std::to_string(J - 1));
  }
  if (scale_count < 3) throw Error(ErrorKind::insufficient_scales, "scale_count must be >= 3");
  return {std::max(1, J - scale_count), J - 1};
}

}  // namespace detail

struct LambdaCurve {
  std::vector<double> alpha_grid;
  std::vector<Extended> values;
  std::vector<Extended> residuals;
  int scale_lo = 0;
  int scale_hi = 0;
};

/// Growth exponent of N_j(alpha): least-squares slope of log2 N_j(alpha)
/// against j over the `scale_count` finest scales, using only scales with
/// N_j(alpha) >= 1. Fewer than 3 usable scales leaves the value absent.
inline LambdaCurve estimate_lambda(const AlphaField& field, const std::vector<double>& alpha_grid,
                                   int scale_count = 10, int min_scales = 3) {
  const auto [lo, hi] = detail::regression_scales(field.J, scale_count);
  const auto needed = static_cast<std::size_t>(std::clamp(min_scales, 3, hi - lo + 1));
  LambdaCurve curve;
  curve.alpha_grid = alpha_grid;
  curve.scale_lo = lo;
  curve.scale_hi = hi;
  curve.values.reserve(alpha_grid.size());
  curve.residuals.reserve(alpha_grid.size());
  std::vector<double> xs;
  std::vector<double> ys;
  for (double alpha : alpha_grid) {
    xs.clear();
    ys.clear();
    for (int j = lo; j <= hi; ++j) {
      const auto n = count_N(field, j, alpha);
      if (n == 0) continue;
      xs.push_back(j);
      ys.push_back(std::log2(static_cast<double>(n)));
    }
    if (xs.size() < needed) {
      curve.values.push_back(std::nullopt);
      curve.residuals.push_back(std::nullopt);
      continue;
    }
    const auto fit = detail::least_squares(xs, ys);
    curve.values.push_back(fit.slope);
    curve.residuals.push_back(fit.rms_residual);
  }
  return curve;
}

/// Running maximum in increasing alpha; leading absent values stay absent.
inline LambdaCurve upper_closure(const LambdaCurve& curve) {
  LambdaCurve closed = curve;
  Extended running;
  for (auto& value : closed.values) {
    if (value && (!running || *value > *running)) running = value;
    value = running;
  }
  return closed;
}

/// d2(h) = h max_{alpha_i <= h} closed(alpha_i)/alpha_i over present values;
/// absent when nothing qualifies or the maximum is negative.
inline std::vector<Extended> large_deviation_spectrum(const LambdaCurve& closed,
                                                      const std::vector<double>& h_grid) {
  std::vector<Extended> d2;
  d2.reserve(h_grid.size());
  for (double h : h_grid) {
    Extended best;
    for (std::size_t i = 0; i < closed.alpha_grid.size(); ++i) {
      const double alpha = closed.alpha_grid[i];
      if (alpha > h) break;
      if (!closed.values[i] || !(alpha > 0.0)) continue;
      const double ratio = *closed.values[i] / alpha;
      if (!best || ratio > *best) best = ratio;
    }
    if (!best || *best < 0.0) {
      d2.push_back(std::nullopt);
    } else {
      d2.push_back(h * *best);
    }
  }
  return d2;
}

/// (max_alpha closed(alpha)/alpha)^{-1}: the h at which d2 reaches 1.
inline Extended estimated_h_max(const LambdaCurve& closed) {
  Extended best;
  for (std::size_t i = 0; i < closed.alpha_grid.size(); ++i) {
    if (!closed.values[i] || !(closed.alpha_grid[i] > 0.0)) continue;
    const double ratio = *closed.values[i] / closed.alpha_grid[i];
    if (!best || ratio > *best) best = ratio;
  }
  if (!best || !(*best > 0.0)) return std::nullopt;
  return 1.0 / *best;
}

struct TauCurve {
  std::vector<double> q_grid;
  std::vector<double> tau;
  std::vector<double> residuals;
  int scale_lo = 0;
  int scale_hi = 0;
};

/// Grid lo, lo+step, ..., hi built from integer multiples of step, so 0 is
/// hit exactly when it lies on the grid.
inline std::vector<double> q_grid(double lo, double hi, double step) {
  const auto first = static_cast<long>(std::llround(lo / step));
  const auto last = static_cast<long>(std::llround(hi / step));
  std::vector<double> grid;
  for (long i = first; i <= last; ++i) grid.push_back(static_cast<double>(i) * step);
  return grid;
}

/// tau(q): least-squares slope of log2 S_j(q) against -j over the
/// `scale_count` finest scales, S_j(q) = sum over nonzero C_{j,k} of |C_{j,k}|^q.
/// Sums run in the log domain.
inline TauCurve structure_function(const CoefficientPyramid& pyramid, const std::vector<double>& qs,
                                   int scale_count = 10, unsigned threads = 0) {
  pyramid.validate();
  const auto [lo, hi] = detail::regression_scales(pyramid.J, scale_count);

  std::vector<std::vector<double>> log_mag(static_cast<std::size_t>(hi - lo + 1));
  for (int j = lo; j <= hi; ++j) {
    auto& out = log_mag[j - lo];
    for (double c : pyramid.levels[j]) {
      if (c != 0.0) out.push_back(std::log2(std::abs(c)));
    }
    if (out.empty()) {
      throw Error(ErrorKind::degenerate_level,
                  "all coefficients at level " + std::to_string(j) + " are zero");
    }
  }

  TauCurve curve;
  curve.q_grid = qs;
  curve.scale_lo = lo;
  curve.scale_hi = hi;
  curve.tau.assign(qs.size(), 0.0);
  curve.residuals.assign(qs.size(), 0.0);
  detail::parallel_for(qs.size(), detail::resolve_threads(threads), 2,
                       [&](std::size_t begin, std::size_t end) {
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t iq = begin; iq < end; ++iq) {
      const double q = qs[iq];
      xs.clear();
      ys.clear();
      for (int j = lo; j <= hi; ++j) {
        const auto& logs = log_mag[j - lo];
        double top = -HUGE_VAL;
        for (double l : logs) top = std::max(top, q * l);
        double sum = 0.0;
        for (double l : logs) sum += std::exp2(q * l - top);
        xs.push_back(-static_cast<double>(j));
        ys.push_back(top + std::log2(sum));
      }
      const auto fit = detail::least_squares(xs, ys);
      curve.tau[iq] = fit.slope;
      curve.residuals[iq] = fit.rms_residual;
    }
  });
  return curve;
}

/// Root of tau on its piecewise-linear interpolant at the first sign change,
/// refined by bisection to 1e-8.
inline double critical_q(const TauCurve& curve) {
  const auto& q = curve.q_grid;
  const auto& t = curve.tau;
  for (std::size_t i = 0; i + 1 < q.size(); ++i) {
    if (t[i] == 0.0) return q[i];
    if ((t[i] < 0.0) != (t[i + 1] < 0.0)) {
      if (t[i + 1] == 0.0) return q[i + 1];
      const auto interp = [&](double x) { return t[i] + (t[i + 1] - t[i]) * (x - q[i]) / (q[i + 1] - q[i]); };
      double a = q[i];
      double b = q[i + 1];
      while (b - a > 1e-10) {
        const double mid = 0.5 * (a + b);
        if ((interp(mid) < 0.0) == (t[i] < 0.0)) {
          a = mid;
        } else {
          b = mid;
        }
      }
      return 0.5 * (a + b);
    }
  }
  if (!q.empty() && t.back() == 0.0) return q.back();
  throw Error(ErrorKind::no_critical_q, "tau does not change sign on the q grid");
}

/// Value of the piecewise-linear interpolant of tau.
inline double tau_at(const TauCurve& curve, double q) {
  const auto& qs = curve.q_grid;
  if (q <= qs.front()) return curve.tau.front();
  if (q >= qs.back()) return curve.tau.back();
  const auto it = std::upper_bound(qs.begin(), qs.end(), q);
  const auto i = static_cast<std::size_t>(it - qs.begin());
  const double w = (q - qs[i - 1]) / (qs[i] - qs[i - 1]);
  return curve.tau[i - 1] + w * (curve.tau[i] - curve.tau[i - 1]);
}

/// d1(h) = min over grid q >= q_c (and q_c itself, where tau = 0) of h q - tau(q).
inline std::vector<double> legendre_spectrum(const TauCurve& curve, double q_c,
                                             const std::vector<double>& h_grid) {
  std::vector<double> d1;
  d1.reserve(h_grid.size());
  for (double h : h_grid) {
    double best = h * q_c;
    for (std::size_t i = 0; i < curve.q_grid.size(); ++i) {
      if (curve.q_grid[i] < q_c) continue;
      best = std::min(best, h * curve.q_grid[i] - curve.tau[i]);
    }
    d1.push_back(best);
  }
  return d1;
}

// ---------------------------------------------------------------------------
// Full pipeline

struct AnalysisOptions {
  int wavelet_order = 3;
  int scale_count = 10;
  int min_scales = 3;
  double grid_step = 0.005;
  double alpha_max = 3.0;
  double q_lo = -5.0;
  double q_hi = 10.0;
  double q_step = 0.1;
  unsigned threads = 0;
};

struct EstimatedSpectrum {
  std::vector<double> h_grid;
  std::vector<Extended> d2;
  std::vector<double> d1;
  LambdaCurve lambda;
  LambdaCurve closed_lambda;
  TauCurve tau;
  double q_c = 0.0;
  bool q_c_found = false;
  Extended h_max;
  std::map<std::string, std::string> metadata;
};

inline EstimatedSpectrum analyze_pyramid(const CoefficientPyramid& pyramid, const AnalysisOptions& options) {
  EstimatedSpectrum result;
  const auto grid = uniform_grid(options.grid_step, options.alpha_max);
  const auto field = alpha_exponents(pyramid);
  result.lambda = estimate_lambda(field, grid, options.scale_count, options.min_scales);
  result.closed_lambda = upper_closure(result.lambda);
  result.h_grid = grid;
  result.d2 = large_deviation_spectrum(result.closed_lambda, grid);
  result.h_max = estimated_h_max(result.closed_lambda);

  result.tau = structure_function(pyramid, q_grid(options.q_lo, options.q_hi, options.q_step),
                                  options.scale_count, options.threads);
  try {
    result.q_c = critical_q(result.tau);
    result.q_c_found = true;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::no_critical_q) throw;
    result.q_c = result.tau.q_grid.front();
    result.q_c_found = false;
  }
  result.d1 = legendre_spectrum(result.tau, result.q_c, grid);

  auto& meta = result.metadata;
  meta["J"] = std::to_string(pyramid.J);
  meta["wavelet"] = "db" + std::to_string(options.wavelet_order);
  meta["scale_range"] = std::to_string(result.lambda.scale_lo) + ".." + std::to_string(result.lambda.scale_hi);
  meta["q_c"] = io::format_number(result.q_c);
  meta["q_c_found"] = result.q_c_found ? "true" : "false";
  meta["h_max_estimate"] = io::format_optional(result.h_max);
  meta["grid_step"] = io::format_number(options.grid_step);
  meta["alpha_max"] = io::format_number(options.alpha_max);
  meta["q_grid"] = io::format_number(options.q_lo) + ":" + io::format_number(options.q_step) + ":" +
                   io::format_number(options.q_hi);
  return result;
}

/// Relative level below which transform output is round-off: coefficients
/// with |C| <= noise_floor * max|x| are set to 0.
inline constexpr double noise_floor = 1e-12;

inline CoefficientPyramid analysis_pyramid(const Signal& signal, int wavelet_order) {
  auto pyramid = forward_dwt(signal, daubechies_filter(wavelet_order));
  double peak = 0.0;
  for (double x : signal.samples) peak = std::max(peak, std::abs(x));
  const double floor = noise_floor * peak;
  for (auto& level : pyramid.levels)
    for (double& c : level)
      if (std::abs(c) <= floor) c = 0.0;
  return pyramid;
}

inline EstimatedSpectrum analyze_signal(const Signal& signal, const AnalysisOptions& options) {
  return analyze_pyramid(analysis_pyramid(signal, options.wavelet_order), options);
}

inline std::string lambda_csv(const EstimatedSpectrum& est) {
  std::string out = "# alpha,lambda,closed_lambda,residual\n";
  for (std::size_t i = 0; i < est.lambda.alpha_grid.size(); ++i) {
    out += io::format_number(est.lambda.alpha_grid[i]) + ',' + io::format_optional(est.lambda.values[i]) +
           ',' + io::format_optional(est.closed_lambda.values[i]) + ',' +
           io::format_optional(est.lambda.residuals[i]) + '\n';
  }
  return out;
}

inline std::string tau_csv(const EstimatedSpectrum& est) {
  std::string out = "# q,tau,residual\n";
  for (std::size_t i = 0; i < est.tau.q_grid.size(); ++i) {
    out += io::format_number(est.tau.q_grid[i]) + ',' + io::format_number(est.tau.tau[i]) + ',' +
           io::format_number(est.tau.residuals[i]) + '\n';
  }
  return out;
}

inline std::string estimated_spectrum_csv(const EstimatedSpectrum& est) {
  std::string out = "# h,d2,d1\n";
  for (std::size_t i = 0; i < est.h_grid.size(); ++i) {
    out += io::format_number(est.h_grid[i]) + ',' + io::format_optional(est.d2[i]) + ',' +
           io::format_number(est.d1[i]) + '\n';
  }
  return out;
}

inline std::string meta_text(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [key, value] : meta) out += key + '=' + value + '\n';
  return out;
}

}  // namespace rws
