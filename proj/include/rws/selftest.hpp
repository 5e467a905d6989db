#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "rws/io.hpp"
#include "rws/rng.hpp"
#include "rws/spectra.hpp"
#include "rws/wavelet.hpp"

namespace rws::selftest {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Tap sum sqrt(2) and shift-orthonormality, both within 1e-12.
inline CheckResult check_filter_qmf(const WaveletFilter& filter) {
  CheckResult result{"qmf " + filter.name, true, {}};
  const auto& h = filter.lowpass;
  if (h.size() != static_cast<std::size_t>(2 * filter.order)) {
    result.passed = false;
    result.detail = "tap count " + std::to_string(h.size());
    return result;
  }
  double sum = 0.0;
  for (double t : h) sum += t;
  if (std::abs(sum - std::numbers::sqrt2) > 1e-12) {
    result.passed = false;
    result.detail = "tap sum off by " + io::format_number(sum - std::numbers::sqrt2);
    return result;
  }
  for (std::size_t shift = 0; shift < h.size(); shift += 2) {
    double dot = 0.0;
    for (std::size_t n = 0; n + shift < h.size(); ++n) dot += h[n] * h[n + shift];
    const double expected = shift == 0 ? 1.0 : 0.0;
    if (std::abs(dot - expected) > 1e-12) {
      result.passed = false;
      result.detail = "shift " + std::to_string(shift / 2) + " inner product " + io::format_number(dot);
      return result;
    }
  }
  return result;
}

/// Forward then inverse transform of a pseudo-random signal of length 2^J.
inline CheckResult check_perfect_reconstruction(const WaveletFilter& filter, int J, std::uint64_t seed) {
  CheckResult result{"reconstruction " + filter.name + " J=" + std::to_string(J), true, {}};
  KeyedStream stream(seed, static_cast<std::uint64_t>(J), static_cast<std::uint64_t>(filter.order));
  Signal x;
  x.samples.resize(std::size_t{1} << J);
  for (double& v : x.samples) v = 2.0 * stream.uniform() - 1.0;
  const auto y = inverse_dwt(forward_dwt(x, filter), filter);
  double err = 0.0;
  for (std::size_t i = 0; i < x.samples.size(); ++i) err = std::max(err, std::abs(x.samples[i] - y.samples[i]));
  if (err > 1e-9) {
    result.passed = false;
    result.detail = "sup error " + io::format_number(err);
  }
  return result;
}

/// The kernel density reaches 1 at its analytic peak and nowhere exceeds it on
/// a step-1e-4 neighbourhood.
inline CheckResult check_kernel_maximum(const KernelLaw& kernel) {
  CheckResult result{"kernel maximum " + kernel_name(kernel), true, {}};
  const double peak = kernel_peak(kernel);
  const auto at_peak = rho_of_kernel(kernel, peak);
  if (!at_peak || std::abs(*at_peak - 1.0) > 1e-9) {
    result.passed = false;
    result.detail = "rho(peak) = " + io::format_optional(at_peak);
    return result;
  }
  double best = -HUGE_VAL;
  for (int i = -1000; i <= 1000; ++i) {
    const auto v = rho_of_kernel(kernel, peak + 1e-4 * i);
    if (v) best = std::max(best, *v);
  }
  if (std::abs(best - 1.0) > 1e-9) {
    result.passed = false;
    result.detail = "local maximum " + io::format_number(best);
  }
  return result;
}

/// spectrum_from_rho returns d itself when d(h)/h is non-decreasing.
inline CheckResult check_identity(const SpectrumCurve& curve) {
  CheckResult result{"spectrum identity", true, {}};
  const auto diag = check_admissible(curve);
  if (!diag.valid) {
    result.passed = false;
    result.detail = "inadmissible input: " + diag.violations.front();
    return result;
  }
  SampledDensity density{curve.h_grid, curve.d_values};
  const auto out = spectrum_from_rho(LogDensity{density}, curve.h_grid);
  for (std::size_t i = 0; i < curve.h_grid.size(); ++i) {
    const auto expected = curve.d_values[i];
    const auto got = out.at(curve.h_grid[i]);
    if (expected.has_value() != got.has_value() ||
        (expected && std::abs(*expected - *got) > 1e-9)) {
      result.passed = false;
      result.detail = "mismatch at h=" + io::format_number(curve.h_grid[i]);
      return result;
    }
  }
  return result;
}

/// d(h) = (h - 1/2)^2 on [1/2, 3/2].
inline SpectrumCurve parabola_spectrum(double step = 0.005) {
  return SpectrumCurve::sample(uniform_grid(step, 2.0), [](double h) -> Extended {
    if (h < 0.5 - 1e-12 || h > 1.5 + 1e-12) return std::nullopt;
    return (h - 0.5) * (h - 0.5);
  });
}

inline std::vector<CheckResult> run_all() {
  std::vector<CheckResult> results;
  for (int order = 1; order <= 10; ++order) results.push_back(check_filter_qmf(daubechies_filter(order)));
  for (int order = 1; order <= 10; ++order) {
    results.push_back(check_perfect_reconstruction(daubechies_filter(order), 12, 2024));
  }
  results.push_back(check_kernel_maximum(GaussianKernel{1.0, 0.3}));
  results.push_back(check_kernel_maximum(ShiftedGammaKernel{0.3, 2.0, 4.0}));
  results.push_back(check_kernel_maximum(ShiftedPoissonKernel{0.0, 1.0}));
  results.push_back(check_identity(parabola_spectrum()));
  return results;
}

}  // namespace rws::selftest
