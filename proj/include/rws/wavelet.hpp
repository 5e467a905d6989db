#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rws/daubechies_taps.hpp"
#include "rws/error.hpp"

namespace rws {

/// Orthogonal lowpass filter of a compactly supported Daubechies wavelet.
struct WaveletFilter {
  int order = 0;
  std::vector<double> lowpass;
  std::string name;

  /// Quadrature-mirror highpass g[n] = (-1)^n h[L-1-n].
  std::vector<double> highpass() const {
    const std::size_t len = lowpass.size();
    std::vector<double> g(len);
    for (std::size_t n = 0; n < len; ++n) {
      g[n] = ((n % 2) ? -1.0 : 1.0) * lowpass[len - 1 - n];
    }
    return g;
  }
};

/// Extremal-phase Daubechies filter with `order` vanishing moments (1..10).
inline WaveletFilter daubechies_filter(int order) {
  const auto taps = detail::daubechies_taps(order);
  if (taps.empty()) {
    throw Error(ErrorKind::unsupported_order,
                "Daubechies order " + std::to_string(order) + " not in 1..10");
  }
  return WaveletFilter{order, std::vector<double>(taps.begin(), taps.end()),
                      "db" + std::to_string(order)};
}

/// Parses "db<N>" (case-insensitive prefix) into a filter.
inline WaveletFilter parse_wavelet(const std::string& label) {
  if (label.size() < 3 || (label[0] != 'd' && label[0] != 'D') ||
      (label[1] != 'b' && label[1] != 'B')) {
    throw Error(ErrorKind::parse, "wavelet must be written db<order>, got '" + label + "'");
  }
  int order = 0;
  for (std::size_t i = 2; i < label.size(); ++i) {
    if (label[i] < '0' || label[i] > '9' || order > 100) {
      throw Error(ErrorKind::parse, "wavelet must be written db<order>, got '" + label + "'");
    }
    order = order * 10 + (label[i] - '0');
  }
  return daubechies_filter(order);
}

/// Uniform samples of a 1-periodic function on [0,1); length 2^J, J >= 1.
struct Signal {
  std::vector<double> samples;

  int scale_count() const { return std::countr_zero(samples.size()); }
};

inline int checked_log2_length(std::size_t n) {
  if (n < 2 || !std::has_single_bit(n)) {
    throw Error(ErrorKind::invalid_length,
                "signal length " + std::to_string(n) + " is not a power of two >= 2");
  }
  return std::countr_zero(n);
}

/// Wavelet coefficients C_{j,k} in L-infinity normalization: the signal is
/// sum_j sum_k C_{j,k} psi(2^j x - k) plus coarse_mean.
struct CoefficientPyramid {
  int J = 0;
  std::vector<std::vector<double>> levels;  // levels[j].size() == 2^j
  double coarse_mean = 0.0;

  static CoefficientPyramid zeros(int J) {
    CoefficientPyramid p;
    p.J = J;
    p.levels.resize(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) p.levels[j].assign(std::size_t{1} << j, 0.0);
    return p;
  }

  void validate() const {
    if (J < 1 || levels.size() != static_cast<std::size_t>(J)) {
      throw Error(ErrorKind::invalid_pyramid, "pyramid must hold J >= 1 levels");
    }
    for (int j = 0; j < J; ++j) {
      if (levels[j].size() != (std::size_t{1} << j)) {
        throw Error(ErrorKind::invalid_pyramid,
                    "level " + std::to_string(j) + " has " + std::to_string(levels[j].size()) +
                        " entries, expected " + std::to_string(std::size_t{1} << j));
      }
    }
  }
};

namespace detail {

// One periodized analysis step: approx.size() == detail.size() == in.size()/2.
inline void analysis_step(std::span<const double> in, std::span<const double> h,
                          std::span<const double> g, std::span<double> approx,
                          std::span<double> detail) {
  const std::size_t n = in.size();
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) {
    double s = 0.0;
    double d = 0.0;
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double x = in[(2 * k + i) % n];
      s += h[i] * x;
      d += g[i] * x;
    }
    approx[k] = s;
    detail[k] = d;
  }
}

// Adjoint of analysis_step; `out` is overwritten.
inline void synthesis_step(std::span<const double> approx, std::span<const double> detail,
                           std::span<const double> h, std::span<const double> g,
                           std::span<double> out) {
  const std::size_t n = out.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < approx.size(); ++k) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      out[(2 * k + i) % n] += h[i] * approx[k] + g[i] * detail[k];
    }
  }
}

}  // namespace detail

/// Full periodized decomposition of `signal`. Orthonormal detail coefficients at
/// level j are rescaled by 2^{(j-J)/2}, which turns the sample-domain transform
/// into the function-domain L-infinity convention.
inline CoefficientPyramid forward_dwt(const Signal& signal, const WaveletFilter& filter) {
  const int J = checked_log2_length(signal.samples.size());
  const auto g = filter.highpass();

  CoefficientPyramid pyramid = CoefficientPyramid::zeros(J);
  std::vector<double> current = signal.samples;
  std::vector<double> approx;
  for (int j = J - 1; j >= 0; --j) {
    approx.assign(current.size() / 2, 0.0);
    auto& level = pyramid.levels[j];
    detail::analysis_step(current, filter.lowpass, g, approx, level);
    const double scale = std::exp2(0.5 * (j - J));
    for (double& c : level) c *= scale;
    std::swap(current, approx);
  }
  pyramid.coarse_mean = current[0] * std::exp2(-0.5 * J);
  return pyramid;
}

inline Signal inverse_dwt(const CoefficientPyramid& pyramid, const WaveletFilter& filter) {
  pyramid.validate();
  const int J = pyramid.J;
  const auto g = filter.highpass();

  std::vector<double> current{pyramid.coarse_mean * std::exp2(0.5 * J)};
  std::vector<double> detail_buf;
  std::vector<double> next;
  for (int j = 0; j < J; ++j) {
    const auto& level = pyramid.levels[j];
    const double scale = std::exp2(0.5 * (J - j));
    detail_buf.resize(level.size());
    for (std::size_t k = 0; k < level.size(); ++k) detail_buf[k] = level[k] * scale;
    next.assign(current.size() * 2, 0.0);
    detail::synthesis_step(current, detail_buf, filter.lowpass, g, next);
    std::swap(current, next);
  }
  return Signal{std::move(current)};
}

/// Orthonormal (unscaled) view of a pyramid: coarse value followed by levels
/// 0..J-1, each scaled back by 2^{(J-j)/2}. Its Euclidean norm equals that of
/// the sample vector.
inline std::vector<double> orthonormal_coefficients(const CoefficientPyramid& pyramid) {
  pyramid.validate();
  std::vector<double> out;
  out.reserve(std::size_t{1} << pyramid.J);
  out.push_back(pyramid.coarse_mean * std::exp2(0.5 * pyramid.J));
  for (int j = 0; j < pyramid.J; ++j) {
    const double scale = std::exp2(0.5 * (pyramid.J - j));
    for (double c : pyramid.levels[j]) out.push_back(c * scale);
  }
  return out;
}

}  // namespace rws
