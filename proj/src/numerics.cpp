#include "quenchlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quenchlab/error.hpp"

namespace quenchlab {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::InvalidArgument, "fit_line: size mismatch");
  }
  const std::size_t n = x.size();
  if (n < 2) {
    throw Error(ErrorKind::FitWindowTooNarrow, "fit_line needs at least two points");
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) {
    throw Error(ErrorKind::FitWindowTooNarrow, "fit_line: degenerate abscissae");
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / static_cast<double>(n));
  fit.points = n;
  return fit;
}

LineFit fit_power_law(std::span<const double> x, std::span<const double> y) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] != 0.0 && y[i] != 0.0 && std::isfinite(x[i]) && std::isfinite(y[i])) {
      lx.push_back(std::log(std::abs(x[i])));
      ly.push_back(std::log(std::abs(y[i])));
    }
  }
  return fit_line(lx, ly);
}

namespace {

template <typename T>
T pairwise_impl(std::span<const T> v) {
  if (v.size() <= 8) {
    T s{};
    for (const auto& e : v) s += e;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_impl(v.first(half)) + pairwise_impl(v.subspan(half));
}

}  // namespace

double pairwise_sum(std::span<const double> values) { return pairwise_impl(values); }
cplx pairwise_sum(std::span<const cplx> values) { return pairwise_impl(values); }

namespace {

double stencil(const std::function<double(double)>& f, double x, int order, double h) {
  switch (order) {
    case 1:
      return (f(x + h) - f(x - h)) / (2.0 * h);
    case 2:
      return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    case 3:
      return (f(x + 2 * h) - 2.0 * f(x + h) + 2.0 * f(x - h) - f(x - 2 * h)) / (2.0 * h * h * h);
    case 4:
      return (f(x + 2 * h) - 4.0 * f(x + h) + 6.0 * f(x) - 4.0 * f(x - h) + f(x - 2 * h)) /
             (h * h * h * h);
    default:
      throw Error(ErrorKind::OrderCap, "finite differences support orders 1..4");
  }
}

}  // namespace

double central_derivative(const std::function<double(double)>& f, double x, int order,
                          double base_step) {
  const double h = base_step * std::max(1.0, std::abs(x));
  const double coarse = stencil(f, x, order, h);
  const double fine = stencil(f, x, order, 0.5 * h);
  // all stencils are O(h^2)
  return (4.0 * fine - coarse) / 3.0;
}

double log_sum_exp(std::span<const double> a) {
  if (a.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(a.begin(), a.end());
  if (!std::isfinite(mx)) return mx;
  std::vector<double> shifted(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) shifted[i] = std::exp(a[i] - mx);
  return mx + std::log(pairwise_sum(shifted));
}

std::vector<double> linspace(double start, double stop, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = start;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

std::vector<double> geomspace(double start, double stop, std::size_t count) {
  if (start <= 0.0 || stop <= 0.0) {
    throw Error(ErrorKind::InvalidArgument, "geomspace needs positive endpoints");
  }
  auto logs = linspace(std::log(start), std::log(stop), count);
  for (auto& v : logs) v = std::exp(v);
  return logs;
}

double interpolate(std::span<const double> x, std::span<const double> y, double at) {
  if (x.empty()) throw Error(ErrorKind::InvalidArgument, "interpolate on empty grid");
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + t * (y[i] - y[i - 1]);
}

}  // namespace quenchlab
