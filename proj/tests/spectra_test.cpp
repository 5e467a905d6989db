#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rws/selftest.hpp"
#include "rws/spectra.hpp"

using namespace rws;

namespace {

// Plain bisection on the threshold equation, written out independently of
// the library's residual helpers.
double oracle_poisson_alpha_star(double c) {
  const auto f = [c](double a) {
    return 1.0 - c / std::numbers::ln2 - a * std::log(c * std::numbers::e / -a) / std::numbers::ln2;
  };
  // largest root: f > 0 just left of the root, f < 0 close to 0-
  double lo = -c, hi = -1e-15;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double oracle_gamma_alpha_star(double nu, double beta) {
  const auto f = [&](double a) {
    return 1.0 + nu * std::log2(-a) + beta * a / std::numbers::ln2 + nu * std::log2(beta * std::numbers::e / nu);
  };
  double lo = -nu / beta, hi = -1e-300;
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

SpectrumCurve line_spectrum(double h_lo, double h_hi, double step, double top) {
  return SpectrumCurve::sample(uniform_grid(step, top), [=](double h) -> Extended {
    if (h < h_lo - 1e-12 || h > h_hi + 1e-12) return std::nullopt;
    return h / h_hi;
  });
}

}  // namespace

TEST(Kernel, GaussianValue) {
  const auto r = rho_of_kernel(GaussianKernel{1.0, 0.5}, 0.0);
  ASSERT_TRUE(r);
  EXPECT_NEAR(*r, 1.0 - 2.0 * std::numbers::log2e, 1e-12);
  EXPECT_NEAR(*r, -1.8854, 1e-4);
}

TEST(Kernel, PoissonUnitCurve) {
  const ShiftedPoissonKernel k{0.0, 1.0};
  EXPECT_NEAR(*rho_of_kernel(k, 1.0), 1.0, 1e-12);
  EXPECT_FALSE(rho_of_kernel(k, 0.0).has_value());
  EXPECT_FALSE(rho_of_kernel(k, -0.3).has_value());
  // u log2(e/u) + 1 - log2(e) at u = 2
  EXPECT_NEAR(*rho_of_kernel(k, 2.0), 1.0 - std::numbers::log2e + 2.0 * std::log2(std::numbers::e / 2.0), 1e-12);
}

TEST(Kernel, AnalyticMaxima) {
  for (const KernelLaw& k : {KernelLaw{GaussianKernel{1.0, 0.3}}, KernelLaw{GaussianKernel{0.6, 0.1}},
                             KernelLaw{ShiftedGammaKernel{0.3, 2.0, 4.0}}, KernelLaw{ShiftedGammaKernel{0.1, 5.0, 3.0}},
                             KernelLaw{ShiftedPoissonKernel{0.0, 1.0}}, KernelLaw{ShiftedPoissonKernel{0.2, 0.5}},
                             KernelLaw{DiracKernel{0.7}}}) {
    if (std::holds_alternative<DiracKernel>(k)) {
      EXPECT_EQ(*rho_of_kernel(k, 0.7), 1.0);
      continue;
    }
    const auto r = selftest::check_kernel_maximum(k);
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  }
}

TEST(Kernel, PeakLocations) {
  EXPECT_DOUBLE_EQ(kernel_peak(GaussianKernel{1.0, 0.3}), 1.0);
  EXPECT_DOUBLE_EQ(kernel_peak(ShiftedGammaKernel{0.3, 2.0, 4.0}), 0.8);
  EXPECT_DOUBLE_EQ(kernel_peak(ShiftedPoissonKernel{0.1, 1.0}), 1.1);
}

TEST(Kernel, PoissonAlphaStarMatchesOracle) {
  const double star = kernel_alpha_star(ShiftedPoissonKernel{0.0, 1.0});
  EXPECT_NEAR(star, -0.090, 0.001);
  EXPECT_NEAR(star, oracle_poisson_alpha_star(1.0), 1e-12);
}

TEST(Kernel, ThresholdResiduals) {
  for (double c : {0.5, 1.0, 2.0, 5.0}) {
    const double star = kernel_alpha_star(ShiftedPoissonKernel{0.0, c});
    EXPECT_LT(std::abs(poisson_threshold_residual(c, star)), 1e-10) << "c=" << c;
    EXPECT_LT(star, 0.0);
  }
  for (auto [nu, beta] : {std::pair{2.0, 4.0}, std::pair{1.0, 1.0}, std::pair{5.0, 3.0}, std::pair{0.5, 8.0}}) {
    const double star = kernel_alpha_star(ShiftedGammaKernel{0.3, nu, beta});
    EXPECT_LT(std::abs(gamma_threshold_residual(nu, beta, star)), 1e-10) << nu << "," << beta;
    EXPECT_GT(star, -nu / beta);
    EXPECT_LT(star, 0.0);
    EXPECT_NEAR(star, oracle_gamma_alpha_star(nu, beta), 1e-9);
  }
}

TEST(Kernel, PoissonLargestRootAboveLn2) {
  // For c > ln 2 the residual, seen as a function of -a, is negative at 0+,
  // crosses zero below c, peaks at 1 for -a = c and crosses again beyond.
  const double c = 2.0;
  const double star = kernel_alpha_star(ShiftedPoissonKernel{0.0, c});
  EXPECT_GT(star, -c);
  for (double a = star / 2; a > -1e-6; a /= 2) EXPECT_LT(poisson_threshold_residual(c, a), 0.0);
}

TEST(Kernel, ValidityThresholds) {
  const auto gauss = kernel_violation(GaussianKernel{1.0, 1.0});
  ASSERT_TRUE(gauss);
  EXPECT_NE(gauss->find("m <= sigma*sqrt(2 ln 2)"), std::string::npos);
  EXPECT_NE(gauss->find("1.17741"), std::string::npos);
  EXPECT_FALSE(kernel_violation(GaussianKernel{1.18, 1.0}));
  EXPECT_TRUE(kernel_violation(GaussianKernel{1.0, 0.0}));

  EXPECT_FALSE(kernel_violation(ShiftedPoissonKernel{-0.05, 1.0}));
  EXPECT_TRUE(kernel_violation(ShiftedPoissonKernel{-0.1, 1.0}));
  EXPECT_TRUE(kernel_violation(ShiftedPoissonKernel{0.0, 0.5}));  // c <= ln 2 needs alpha0 > 0
  EXPECT_FALSE(kernel_violation(ShiftedPoissonKernel{0.01, 0.5}));

  const double gstar = kernel_alpha_star(ShiftedGammaKernel{0.0, 2.0, 4.0});
  EXPECT_FALSE(kernel_violation(ShiftedGammaKernel{gstar + 1e-6, 2.0, 4.0}));
  EXPECT_TRUE(kernel_violation(ShiftedGammaKernel{gstar - 1e-6, 2.0, 4.0}));
  EXPECT_TRUE(kernel_violation(DiracKernel{0.0}));

  try {
    rho_of_kernel(GaussianKernel{1.0, 1.0}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kernel_validity);
  }
}

TEST(Kernel, ThresholdMeansNegativeRhoAtZero) {
  // At the validity boundary rho(0+) = 0: the kernel is valid exactly when
  // small exponents have negative log-density.
  const GaussianKernel g{1.0, 1.0 / std::sqrt(2.0 * std::numbers::ln2) * (1.0 - 1e-9)};
  EXPECT_NEAR(*rho_of_kernel(g, 0.0), 0.0, 1e-8);
  const double pstar = kernel_alpha_star(ShiftedPoissonKernel{0.0, 1.0});
  const ShiftedPoissonKernel p{pstar + 1e-9, 1.0};
  EXPECT_NEAR(*rho_of_kernel(p, 1e-12), 0.0, 1e-6);
}

TEST(Admissibility, ParabolaIsAdmissible) {
  const auto diag = check_admissible(selftest::parabola_spectrum());
  EXPECT_TRUE(diag.valid) << (diag.violations.empty() ? "" : diag.violations.front());
}

TEST(Admissibility, TamperedTopValueFails) {
  auto c = selftest::parabola_spectrum();
  for (std::size_t i = 0; i < c.h_grid.size(); ++i)
    if (std::abs(c.h_grid[i] - 1.5) < 1e-9) c.d_values[i] = 0.9;
  const auto diag = check_admissible(c);
  EXPECT_FALSE(diag.valid);
}

TEST(Admissibility, DecreasingRatioFails) {
  // concave bump: d/h decreases past the peak
  auto bump = SpectrumCurve::sample(uniform_grid(0.01, 2.0), [](double h) -> Extended {
    if (h < 0.5 || h > 1.5 + 1e-12) return std::nullopt;
    if (std::abs(h - 1.5) < 1e-9) return 1.0;
    return 1.0 - 4.0 * (h - 1.0) * (h - 1.0);
  });
  EXPECT_FALSE(check_admissible(bump).valid);
}

TEST(Admissibility, StructuralFailures) {
  SpectrumCurve empty;
  EXPECT_FALSE(check_admissible(empty).valid);
  auto c = selftest::parabola_spectrum();
  c.d_values[150] = std::nullopt;  // hole inside [h_min, h_max]
  EXPECT_FALSE(check_admissible(c).valid);
  auto over = line_spectrum(0.2, 1.0, 0.01, 1.2);
  over.d_values[50] = 1.2;
  EXPECT_FALSE(check_admissible(over).valid);
}

TEST(SpectrumMap, IdentityOnParabola) {
  const auto r = selftest::check_identity(selftest::parabola_spectrum());
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(SpectrumMap, IdentityOnLinearSpectra) {
  for (auto [lo, hi] : {std::pair{0.2, 1.0}, std::pair{0.05, 0.4}, std::pair{1.0, 2.5}}) {
    const auto r = selftest::check_identity(line_spectrum(lo, hi, 0.005, hi + 0.5));
    EXPECT_TRUE(r.passed) << lo << ".." << hi << ": " << r.detail;
  }
}

TEST(SpectrumMap, OutputIsAdmissibleAndAboveRho) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-1.5, 1.0);
  const auto grid = uniform_grid(0.01, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    SampledDensity rho{grid, {}};
    for (std::size_t i = 0; i < grid.size(); ++i) {
      rho.rho_values.push_back(grid[i] < 0.3 ? Extended{} : Extended{u(gen)});
    }
    const auto d = spectrum_from_rho(LogDensity{rho}, grid);
    const auto diag = check_admissible(d);
    ASSERT_TRUE(diag.valid) << "trial " << trial << ": " << diag.violations.front();
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto di = d.at(grid[i]);
      if (di && rho.rho_values[i]) EXPECT_GE(*di, *rho.rho_values[i] - 1e-12);
    }
  }
}

TEST(SpectrumMap, GaussianKernelSpectrum) {
  // d(h) = h max_{a <= h} rho(a)/a; above the tangency point the spectrum is
  // the line h/h_max.
  const GaussianKernel k{1.0, 0.3};
  const auto grid = uniform_grid(0.001, 3.0);
  const auto d = spectrum_from_rho(LogDensity{KernelLaw{k}}, grid);
  EXPECT_TRUE(check_admissible(d).valid);
  EXPECT_NEAR(*d.at(d.h_max), 1.0, 1e-9);
  EXPECT_LT(d.h_max, 1.0);  // the tangent from the origin touches left of the peak
  const double s = 0.3 * std::sqrt(2.0 * std::numbers::ln2);
  EXPECT_NEAR(d.h_min, 1.0 - s, 0.002);
  // below the tangency point d equals rho
  EXPECT_NEAR(*d.at(0.8), *rho_of_kernel(k, 0.8), 1e-9);
}

TEST(SpectrumMap, DiracIsSinglePoint) {
  const auto d = spectrum_from_rho(LogDensity{KernelLaw{DiracKernel{0.7}}}, uniform_grid(0.01, 2.0));
  EXPECT_DOUBLE_EQ(d.h_min, 0.7);
  EXPECT_DOUBLE_EQ(d.h_max, 0.7);
  EXPECT_EQ(*d.at(0.7), 1.0);
  EXPECT_FALSE(d.at(0.69).has_value());
  EXPECT_FALSE(d.at(0.71).has_value());
}

TEST(SpectrumMap, PoissonUnitSpectrum) {
  const auto d = spectrum_from_rho(LogDensity{KernelLaw{ShiftedPoissonKernel{0.0, 1.0}}}, uniform_grid(0.001, 3.0));
  EXPECT_TRUE(check_admissible(d).valid);
  EXPECT_GT(d.h_min, 0.0);
  EXPECT_LT(d.h_max, 1.0);
  // rho(h_min) = 0 on the grid resolution
  EXPECT_NEAR(*rho_of_kernel(ShiftedPoissonKernel{0.0, 1.0}, d.h_min), 0.0, 0.01);
}

TEST(SpectrumMap, Degenerate) {
  const auto grid = uniform_grid(0.1, 1.0);
  SampledDensity negative{grid, std::vector<Extended>(grid.size(), -0.5)};
  try {
    spectrum_from_rho(LogDensity{negative}, grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::empty_spectrum);
  }
  SampledDensity flat{grid, std::vector<Extended>(grid.size(), -0.5)};
  flat.rho_values[4] = 0.0;
  try {
    spectrum_from_rho(LogDensity{flat}, grid);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::flat_spectrum);
  }
}

TEST(SpectrumMap, GammaCheckFindsFirstNonNegative) {
  SampledDensity rho{{0.1, 0.2, 0.3, 0.4}, {Extended{}, -0.2, 0.0, 0.5}};
  EXPECT_DOUBLE_EQ(*gamma_check(rho), 0.3);
}

TEST(Curve, InterpolationAndBounds) {
  const auto c = selftest::parabola_spectrum(0.1);
  EXPECT_NEAR(*c.at(0.75), 0.0625 + 0.0025, 1e-12);  // chord between 0.7 and 0.8
  EXPECT_FALSE(c.at(0.4).has_value());
  EXPECT_FALSE(c.at(1.6).has_value());
  EXPECT_NEAR(*c.at(1.5), 1.0, 1e-12);
}
