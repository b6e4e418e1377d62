#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace quenchlab {

using cplx = std::complex<double>;

/// Straight line y = intercept + slope * x fitted by ordinary least squares.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  std::size_t points = 0;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Log-log power-law fit: |y| ~ C |x|^slope. Points with zero x or y are skipped.
LineFit fit_power_law(std::span<const double> x, std::span<const double> y);

/// Pairwise (tree) summation; the reduction order depends only on the length.
double pairwise_sum(std::span<const double> values);
cplx pairwise_sum(std::span<const cplx> values);

/// Central finite-difference derivative of order 1..4 with one Richardson step.
/// The base step is scaled by max(1, |x|).
double central_derivative(const std::function<double(double)>& f, double x, int order,
                          double base_step);

/// Log of sum_i exp(a_i), stable against overflow.
double log_sum_exp(std::span<const double> a);

std::vector<double> linspace(double start, double stop, std::size_t count);
std::vector<double> geomspace(double start, double stop, std::size_t count);

/// Linear interpolation on an ascending grid; clamps outside.
double interpolate(std::span<const double> x, std::span<const double> y, double at);

}  // namespace quenchlab
