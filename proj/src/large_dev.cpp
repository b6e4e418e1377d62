#include "quenchlab/large_dev.hpp"

#include <algorithm>
#include <cmath>

#include "quenchlab/error.hpp"

namespace quenchlab {

namespace {

// ln(c2 + s2 exp(x)) without overflow for large positive x.
double log_two_level(double c2, double s2, double x) {
  if (s2 == 0.0) return std::log(c2);
  if (x <= 0.0) return std::log(c2 + s2 * std::exp(x));
  return x + std::log(s2 + c2 * std::exp(-x));
}

}  // namespace

MgfSource mgf_from_distribution(const WorkDistribution& d, double n_cells) {
  if (d.atoms.empty() || !(n_cells > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "empty distribution or non-positive cell count");
  }
  const double shift = d.adiabatic_shift;
  const double tol = std::max(d.merged_tolerance, 1e-14);
  std::vector<double> w_irr, log_p;
  double scale = kInfinity;
  for (const auto& a : d.atoms) {
    const double w = a.work - shift;
    if (w < -tol) {
      throw Error(ErrorKind::InvalidArgument, "negative irreversible work: not a ground-state quench");
    }
    w_irr.push_back(std::max(w, 0.0));
    log_p.push_back(std::log(a.probability));
    if (w > tol) scale = std::min(scale, w);
  }
  MgfSource src;
  src.n_cells = n_cells;
  src.mean_w = (d.mean() - shift) / n_cells;
  const double p0 = d.probability_near(shift, tol);
  src.surface_limit = p0 > 0.0 ? -std::log(p0) / n_cells : kInfinity;
  src.spectral_scale = std::isfinite(scale) ? scale : 1.0;
  src.atomic = true;
  src.log_mgf = [w_irr, log_p](double r) {
    std::vector<double> t(w_irr.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = log_p[i] - r * w_irr[i];
    return log_sum_exp(t);
  };
  return src;
}

MgfSource mgf_from_modes(const ising::ModeSet& modes) {
  std::vector<double> c2, s2, pair;
  for (std::size_t i = 0; i < modes.angle_diffs.size(); ++i) {
    const double c = std::cos(modes.angle_diffs[i]), s = std::sin(modes.angle_diffs[i]);
    c2.push_back(c * c);
    s2.push_back(s * s);
    pair.push_back(2.0 * modes.post_energies[i]);
  }
  MgfSource src;
  src.n_cells = modes.n_cells();
  src.mean_w = modes.mean_irreversible_work() / modes.n_cells();
  src.surface_limit = -2.0 * modes.log_fidelity() / modes.n_cells();
  src.spectral_scale = 2.0 * modes.mass();
  src.atomic = true;
  src.log_mgf = [c2, s2, pair](double r) {
    std::vector<double> t(c2.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = log_two_level(c2[i], s2[i], -pair[i] * r);
    return pairwise_sum(t);
  };
  return src;
}

MgfSource mgf_from_density(const WorkDensity& density, double n_cells) {
  const auto& w = density.w_grid;
  const auto& p = density.density;
  if (w.size() < 2 || w.size() != p.size()) {
    throw Error(ErrorKind::InvalidArgument, "density samples malformed");
  }
  std::vector<double> weight(w.size());  // trapezoid weights
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const double h = 0.5 * (w[i + 1] - w[i]);
    weight[i] += h;
    weight[i + 1] += h;
  }
  double mass = 0.0, first = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    mass += weight[i] * p[i];
    first += weight[i] * p[i] * w[i];
  }
  MgfSource src;
  src.n_cells = n_cells;
  src.mean_w = first / n_cells;
  src.surface_limit = density.delta_weight > 0.0 ? -std::log(density.delta_weight) / n_cells : kInfinity;
  src.spectral_scale = std::max(density.broadening, (w.back() - w.front()) / 1000.0);
  src.atomic = false;
  const double f2 = density.delta_weight;
  src.log_mgf = [w, p, weight, f2, mass](double r) {
    std::vector<double> t(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) t[i] = weight[i] * std::max(p[i], 0.0) * std::exp(-r * w[i]);
    const double cont = pairwise_sum(t);
    if (r < 0.0) {
      const double tail = weight.back() * std::max(p.back(), 0.0) * std::exp(-r * w.back());
      if (tail > 1e-8 * (f2 + cont) && mass > 0.0) {
        throw Error(ErrorKind::DivergentMGF, "density does not decay fast enough for R < 0");
      }
    }
    return std::log(f2 + cont);
  };
  return src;
}

std::vector<double> excess_free_energy(const MgfSource& source, std::span<const double> r_grid) {
  std::vector<double> f(r_grid.size());
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    f[i] = r_grid[i] == 0.0 ? 0.0 : -source.log_mgf(r_grid[i]) / source.n_cells;
  }
  return f;
}

std::vector<double> excess_free_energy(const WorkDistribution& d, double n_cells,
                                       std::span<const double> r_grid) {
  return excess_free_energy(mgf_from_distribution(d, n_cells), r_grid);
}

LegendreTransform legendre_fenchel(std::span<const double> r_grid, std::span<const double> f_ex,
                                   std::span<const double> w_grid) {
  if (r_grid.size() != f_ex.size() || r_grid.size() < 2) {
    throw Error(ErrorKind::InvalidArgument, "R grid and f_ex samples must match (>= 2 points)");
  }
  double prev_slope = kInfinity;
  for (std::size_t i = 0; i + 1 < r_grid.size(); ++i) {
    const double dr = r_grid[i + 1] - r_grid[i];
    if (!(dr > 0.0)) throw Error(ErrorKind::InvalidArgument, "R grid must ascend strictly");
    const double slope = (f_ex[i + 1] - f_ex[i]) / dr;
    if (slope > prev_slope + 1e-9 * std::max(1.0, std::abs(prev_slope))) {
      throw Error(ErrorKind::NonConcaveInput,
                  "f_ex is not concave near R = " + std::to_string(r_grid[i]));
    }
    prev_slope = slope;
  }
  LegendreTransform out;
  out.rate.resize(w_grid.size());
  out.boundary_infimum.assign(w_grid.size(), false);
  out.lower_boundary.assign(w_grid.size(), false);
  const std::size_t last = r_grid.size() - 1;
  for (std::size_t j = 0; j < w_grid.size(); ++j) {
    const double w = w_grid[j];
    if (w < 0.0) {
      out.rate[j] = kInfinity;
      continue;
    }
    std::size_t arg = 0;
    double best = -kInfinity;
    for (std::size_t i = 0; i < r_grid.size(); ++i) {
      const double v = f_ex[i] - r_grid[i] * w;
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    out.rate[j] = best;
    out.boundary_infimum[j] = arg == last;
    out.lower_boundary[j] = arg == 0;
  }
  return out;
}

double RateFunctionCurve::rate_at(double w) const {
  if (w < 0.0) return kInfinity;
  double best = -kInfinity;
  for (std::size_t i = 0; i < r_grid.size(); ++i) best = std::max(best, f_ex[i] - r_grid[i] * w);
  return best;
}

std::vector<double> default_r_grid(double spectral_scale, std::size_t points) {
  std::vector<double> r{0.0};
  const auto g = geomspace(1e-3 / spectral_scale, 50.0 / spectral_scale, points);
  r.insert(r.end(), g.begin(), g.end());
  return r;
}

RateFunctionCurve rate_function(const MgfSource& source, const RateConfig& config) {
  if (config.w_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty w grid");
  RateFunctionCurve c;
  c.n_cells = source.n_cells;
  c.mean_w = source.mean_w;
  c.surface_limit = source.surface_limit;
  c.w_grid = config.w_grid;

  const double above_mean =
      *std::max_element(config.w_grid.begin(), config.w_grid.end()) > source.mean_w * (1.0 + 1e-12);
  std::vector<double> r = default_r_grid(source.spectral_scale, config.r_points);
  if (above_mean && source.atomic) {
    c.negative_r_used = true;
    std::vector<double> neg;
    for (auto it = r.rbegin(); it != r.rend(); ++it)
      if (*it > 0.0) neg.push_back(-*it);
    r.insert(r.begin(), neg.begin(), neg.end());
  }

  for (;;) {
    c.r_grid = r;
    c.f_ex = excess_free_energy(source, r);
    const auto lf = legendre_fenchel(c.r_grid, c.f_ex, c.w_grid);
    c.rate = lf.rate;
    c.boundary_infimum = lf.boundary_infimum;
    bool grow_up = false, grow_down = false;
    for (std::size_t j = 0; j < c.w_grid.size(); ++j) {
      if (!(c.w_grid[j] > 0.0)) continue;
      grow_up = grow_up || lf.boundary_infimum[j];
      grow_down = grow_down || (c.negative_r_used && lf.lower_boundary[j]);
    }
    if ((!grow_up && !grow_down) || c.extensions >= config.max_extensions) break;
    ++c.extensions;
    if (grow_up) {
      const double top = r.back();
      const auto more = geomspace(top, 4.0 * top, 41);
      r.insert(r.end(), more.begin() + 1, more.end());
    }
    if (grow_down) {
      const double bottom = r.front();
      auto more = geomspace(-bottom, -4.0 * bottom, 41);
      std::vector<double> neg;
      for (auto it = more.rbegin(); it + 1 != more.rend(); ++it) neg.push_back(-*it);
      r.insert(r.begin(), neg.begin(), neg.end());
    }
  }
  return c;
}

CollapseReport casimir_collapse(const std::vector<CollapseCurve>& curves,
                                const CollapseOptions& options) {
  CollapseReport rep;
  std::vector<const CollapseCurve*> kept;
  for (const auto& c : curves) {
    if (c.xi >= options.xi_min) {
      kept.push_back(&c);
      rep.labels.push_back(c.label);
    } else {
      rep.excluded_labels.push_back(c.label);
    }
  }
  if (kept.size() < 3) {
    throw Error(ErrorKind::InsufficientCurves, "collapse needs at least three near-critical curves");
  }
  const double d = options.dimension;
  double x_max = kInfinity;
  for (const auto* c : kept) x_max = std::min(x_max, c->curve.mean_w * std::pow(c->xi, d + 1.0));
  rep.x_grid = linspace(0.0, x_max, options.x_points);
  for (const auto* c : kept) {
    std::vector<double> y;
    const double sx = std::pow(c->xi, d + 1.0), sy = std::pow(c->xi, d);
    for (const double x : rep.x_grid) y.push_back((c->curve.rate_at(x / sx) - c->curve.surface_limit) * sy);
    rep.scaled.push_back(std::move(y));
  }
  const std::size_t n = kept.size();
  rep.distance.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      double sup = 0.0;
      for (std::size_t i = 0; i < rep.x_grid.size(); ++i) {
        sup = std::max(sup, std::abs(rep.scaled[a][i] - rep.scaled[b][i]));
      }
      rep.distance[a][b] = rep.distance[b][a] = sup;
      rep.max_distance = std::max(rep.max_distance, sup);
    }
  return rep;
}

std::vector<double> lattice_work_distribution(const ising::ModeSet& modes, double step) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "lattice step must be positive");
  std::vector<std::size_t> shifts;
  std::size_t total = 0;
  for (const double e : modes.post_energies) {
    shifts.push_back(static_cast<std::size_t>(std::llround(2.0 * e / step)));
    total += shifts.back();
  }
  std::vector<double> p(total + 1, 0.0);
  p[0] = 1.0;
  std::size_t top = 0;  // highest occupied index so far
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const double c = std::cos(modes.angle_diffs[i]), s = std::sin(modes.angle_diffs[i]);
    const double c2 = c * c, s2 = s * s;
    const std::size_t sh = shifts[i];
    const std::size_t new_top = top + sh;
    for (std::size_t j = new_top + 1; j-- > 0;) {
      const double stay = j <= top ? c2 * p[j] : 0.0;
      const double moved = (j >= sh && j - sh <= top) ? s2 * p[j - sh] : 0.0;
      p[j] = stay + moved;
    }
    top = new_top;
  }
  return p;
}

std::vector<EmpiricalRateRow> empirical_rate(const ising::ModeSet& modes, std::size_t bins,
                                             std::size_t lattice_points) {
  const double n = modes.n_cells();
  const double w_bar = modes.mean_irreversible_work() / n;
  const double step = modes.total_pair_energy() / static_cast<double>(lattice_points - 1);
  const auto p = lattice_work_distribution(modes, step);

  const double dz = 1.0 / static_cast<double>(bins);
  std::vector<double> mass(bins, 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double z = static_cast<double>(j) * step / (n * w_bar);
    if (z >= 1.0) break;
    mass[std::min(bins - 1, static_cast<std::size_t>(z / dz))] += p[j];
  }
  RateConfig cfg;
  for (std::size_t b = 0; b < bins; ++b) cfg.w_grid.push_back((b + 0.5) * dz * w_bar);
  const auto curve = rate_function(mgf_from_modes(modes), cfg);

  std::vector<EmpiricalRateRow> rows;
  for (std::size_t b = 0; b < bins; ++b) {
    EmpiricalRateRow row;
    row.w = cfg.w_grid[b];
    row.empirical = mass[b] > 0.0 ? -std::log(mass[b] / dz) / n : kInfinity;
    row.rate = curve.rate[b];
    rows.push_back(row);
  }
  return rows;
}

}  // namespace quenchlab
