#include "quenchlab/quench_ground.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quenchlab/error.hpp"

namespace quenchlab {

namespace {

void require_unique_ground(const HermitianOperator& h, const char* which) {
  if (h.ground_gap() < 1e-12) {
    throw Error(ErrorKind::DegenerateGround, std::string(which) + " ground state is degenerate");
  }
}

// |<eps'_m|eps_0>|^2 for every m.
std::vector<double> ground_weights(const HermitianOperator& h0, const HermitianOperator& hf) {
  const Eigen::VectorXcd amp = hf.eigenvectors().adjoint() * h0.eigenvectors().col(0);
  std::vector<double> w(static_cast<std::size_t>(amp.size()));
  for (Eigen::Index m = 0; m < amp.size(); ++m) w[m] = std::norm(amp(m));
  return w;
}

}  // namespace

double ground_fidelity(const HermitianOperator& h0, const HermitianOperator& hf) {
  require_unique_ground(h0, "initial");
  require_unique_ground(hf, "final");
  const double f = std::abs(hf.eigenvectors().col(0).dot(h0.eigenvectors().col(0)));
  const auto d = tpm_distribution(QuenchSpec::sudden(h0, hf, InverseTemperature::ground_state()));
  const double atom = d.probability_near(d.adiabatic_shift, d.merged_tolerance);
  if (std::abs(atom - f * f) > 1e-10) {
    throw Error(ErrorKind::IdentityMismatch, "adiabatic atom differs from the squared fidelity");
  }
  return f;
}

PersistenceAmplitude vacuum_persistence(const HermitianOperator& h0, const HermitianOperator& hf,
                                        std::span<const double> u_grid) {
  require_unique_ground(h0, "initial");
  const auto w = ground_weights(h0, hf);
  const double e0 = h0.ground_energy();
  PersistenceAmplitude out;
  out.amplitude.resize(u_grid.size());
  out.survival.resize(u_grid.size());
  std::vector<cplx> terms(w.size());
  for (std::size_t k = 0; k < u_grid.size(); ++k) {
    for (std::size_t m = 0; m < w.size(); ++m) {
      terms[m] = w[m] * std::polar(1.0, (hf.eigenvalues()(m) - e0) * u_grid[k]);
    }
    out.amplitude[k] = pairwise_sum(terms);
    out.survival[k] = std::norm(out.amplitude[k]);
  }
  return out;
}

FilmFreeEnergy decompose_film(std::vector<double> r_grid, std::vector<double> ln_z,
                              double bulk_shift, double transverse_cells, double z_limit) {
  if (r_grid.empty() || r_grid.size() != ln_z.size()) {
    throw Error(ErrorKind::InvalidArgument, "film grid and samples must be non-empty and match");
  }
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (!(r_grid[i] > 0.0) || (i > 0 && !(r_grid[i] > r_grid[i - 1]))) {
      throw Error(ErrorKind::InvalidArgument, "film grid must be positive and ascending");
    }
  }
  if (!(transverse_cells > 0.0) || !(z_limit > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "film needs positive cell count and limit");
  }
  const std::size_t n = r_grid.size();
  const std::size_t tail = n - std::max<std::size_t>(1, n / 5);
  if (std::abs(std::expm1(ln_z[tail] - std::log(z_limit))) > 1e-6) {
    throw Error(ErrorKind::GridTooShort,
                "Z(R) has not converged at R = " + std::to_string(r_grid[tail]));
  }

  FilmFreeEnergy f;
  f.transverse_cells = transverse_cells;
  f.bulk = bulk_shift / transverse_cells;
  f.z_samples.resize(n);
  f.f_total.resize(n);
  f.casimir.resize(n);
  double s = 0.0;
  for (std::size_t i = tail; i < n; ++i) s += -ln_z[i] / (2.0 * transverse_cells);
  f.surface = s / static_cast<double>(n - tail);
  for (std::size_t i = 0; i < n; ++i) {
    f.z_samples[i] = std::exp(ln_z[i]);
    f.f_total[i] = r_grid[i] * f.bulk - ln_z[i] / transverse_cells;
    f.casimir[i] = -ln_z[i] / transverse_cells - 2.0 * f.surface;
  }
  f.r_grid = std::move(r_grid);
  return f;
}

FilmFreeEnergy film_partition_function(const HermitianOperator& h0, const HermitianOperator& hf,
                                       std::span<const double> r_grid, double transverse_cells) {
  require_unique_ground(h0, "initial");
  const auto w = ground_weights(h0, hf);
  const RealVector& ef = hf.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, hf.spectral_span());
  double z_limit = 0.0;
  for (std::size_t m = 0; m < w.size(); ++m)
    if (ef(m) - ef(0) < tol) z_limit += w[m];

  std::vector<double> ln_z(r_grid.size());
  std::vector<double> logs;
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    logs.clear();
    for (std::size_t m = 0; m < w.size(); ++m) {
      if (w[m] > 0.0) logs.push_back(std::log(w[m]) - (ef(m) - ef(0)) * r_grid[i]);
    }
    ln_z[i] = log_sum_exp(logs);
  }
  return decompose_film({r_grid.begin(), r_grid.end()}, std::move(ln_z),
                        hf.ground_energy() - h0.ground_energy(), transverse_cells, z_limit);
}

double susceptibility_step(int order) {
  switch (order) {
    case 1: return 1e-4;
    case 2: return 1e-3;
    case 3: return 2e-3;
    case 4: return 5e-3;
    default: throw Error(ErrorKind::OrderCap, "susceptibility orders are 1..4");
  }
}

SusceptibilityReport fidelity_susceptibility(const SusceptibilitySource& source, double lambda0,
                                             std::span<const double> lambda_f_grid,
                                             std::span<const int> orders,
                                             const SusceptibilityOptions& options) {
  if (lambda_f_grid.size() < 5) {
    throw Error(ErrorKind::FitWindowTooNarrow, "susceptibility fit needs at least 5 points");
  }
  for (const double lf : lambda_f_grid) {
    if (lf == options.lambda_c) {
      throw Error(ErrorKind::InvalidArgument, "lambda_f grid must avoid the critical point");
    }
  }
  SusceptibilityReport rep;
  rep.orders.assign(orders.begin(), orders.end());
  rep.lambda_f.assign(lambda_f_grid.begin(), lambda_f_grid.end());
  rep.expected_exponent = options.nu * options.dimension - 2.0;
  rep.alpha_s = options.alpha_specific_heat + options.nu;

  const double n = source.n_cells;
  const auto ln_f = [&](double lf) { return source.log_fidelity(lambda0, lf); };
  const auto f_s = [&](double lf) { return source.surface(lambda0, lf); };
  int second = -1;
  for (std::size_t oi = 0; oi < rep.orders.size(); ++oi) {
    const int order = rep.orders[oi];
    const double h = susceptibility_step(order);
    if (order == 2) second = static_cast<int>(oi);
    std::vector<double> chi, chi_s;
    for (const double lf : lambda_f_grid) {
      chi.push_back(-central_derivative(ln_f, lf, order, h) / n);
      if (source.surface) chi_s.push_back(central_derivative(f_s, lf, order, h));
    }
    if (source.surface) {
      for (std::size_t i = 0; i < chi.size(); ++i) {
        const double denom = std::max({std::abs(chi[i]), std::abs(chi_s[i]), 1e-10});
        rep.max_route_discrepancy =
            std::max(rep.max_route_discrepancy, std::abs(chi[i] - chi_s[i]) / denom);
      }
      rep.chi_surface.push_back(std::move(chi_s));
    }
    rep.chi.push_back(std::move(chi));
  }
  if (second < 0) {
    rep.fitted_exponent = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < rep.lambda_f.size(); ++i) {
    x.push_back(std::abs(rep.lambda_f[i] - options.lambda_c));
    y.push_back(rep.chi[second][i]);
  }
  const LineFit fit = fit_power_law(x, y);
  if (fit.points < 5) {
    throw Error(ErrorKind::FitWindowTooNarrow, "fewer than 5 usable susceptibility points");
  }
  rep.fitted_exponent = fit.slope;
  rep.fit_residual = fit.rms_residual;
  return rep;
}

namespace {

struct EdgeSamples {
  std::vector<double> w;
  std::vector<double> log_p;
};

// Log-space fit at a given threshold; slope = 1 - a.
LineFit edge_line(const EdgeSamples& s, double threshold) {
  std::vector<double> x(s.w.size());
  for (std::size_t i = 0; i < s.w.size(); ++i) x[i] = std::log(s.w[i] - threshold);
  return fit_line(x, s.log_p);
}

}  // namespace

EdgeFit fit_edge(const WorkDensity& density, double mass, const EdgeFitOptions& options) {
  if (density.w_grid.size() != density.density.size() || density.w_grid.empty()) {
    throw Error(ErrorKind::InvalidArgument, "density samples malformed");
  }
  if (!(mass > 0.0)) throw Error(ErrorKind::InvalidArgument, "edge fit needs a positive mass");
  const double peak = *std::max_element(density.density.begin(), density.density.end());
  if (1.0 - density.delta_weight <= 1e-12 || !(peak > 0.0)) {
    throw Error(ErrorKind::NoContinuum, "all probability sits in the adiabatic atom");
  }
  const double span = options.spectral_span > 0.0
                          ? options.spectral_span
                          : density.w_grid.back() - density.w_grid.front();
  EdgeFit fit;
  fit.weight = density.delta_weight;
  fit.mass = mass;
  fit.window_lo = options.window_lo.value_or(options.q * mass + 3.0 * density.broadening);
  fit.window_hi = options.window_hi.value_or(options.q * mass + 0.2 * span);

  EdgeSamples s;
  for (std::size_t i = 0; i < density.w_grid.size(); ++i) {
    const double w = density.w_grid[i];
    if (w > fit.window_lo && w < fit.window_hi && density.density[i] > 0.0) {
      s.w.push_back(w);
      s.log_p.push_back(std::log(density.density[i]));
    }
  }
  if (s.w.size() < 3) throw Error(ErrorKind::FitWindowTooNarrow, "edge window holds < 3 samples");

  double q = options.q;
  if (options.free_parameters) {
    const double hi = std::min(options.q_max, s.w.front() / mass * (1.0 - 1e-9));
    const double lo = options.q_min;
    if (!(hi > lo)) throw Error(ErrorKind::FitWindowTooNarrow, "no admissible threshold range");
    const auto cost = [&](double qq) { return edge_line(s, qq * mass).rms_residual; };
    constexpr int kScan = 400;
    double best = lo, best_cost = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kScan; ++i) {
      const double qq = lo + (hi - lo) * i / kScan;
      const double c = cost(qq);
      if (c < best_cost) {
        best_cost = c;
        best = qq;
      }
    }
    // golden-section refinement inside the bracketing cells
    const double cell = (hi - lo) / kScan;
    double a = std::max(lo, best - cell), b = std::min(hi, best + cell);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - g * (b - a), c2 = a + g * (b - a);
    double f1 = cost(c1), f2 = cost(c2);
    for (int it = 0; it < 80; ++it) {
      if (f1 < f2) {
        b = c2;
        c2 = c1;
        f2 = f1;
        c1 = b - g * (b - a);
        f1 = cost(c1);
      } else {
        a = c1;
        c1 = c2;
        f1 = f2;
        c2 = a + g * (b - a);
        f2 = cost(c2);
      }
    }
    q = f1 < f2 ? c1 : c2;
    if (best_cost < std::min(f1, f2)) q = best;
    const LineFit line = edge_line(s, q * mass);
    fit.exponent = 1.0 - line.slope;
    fit.amplitude = std::exp(line.intercept);
    fit.residual = line.rms_residual;
  } else {
    if (!(q * mass < s.w.front())) {
      throw Error(ErrorKind::FitWindowTooNarrow, "fixed threshold lies inside the window");
    }
    const double slope = 1.0 - options.a;
    double sum = 0.0;
    for (std::size_t i = 0; i < s.w.size(); ++i) sum += s.log_p[i] - slope * std::log(s.w[i] - q * mass);
    const double ln_c = sum / static_cast<double>(s.w.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < s.w.size(); ++i) {
      const double r = s.log_p[i] - ln_c - slope * std::log(s.w[i] - q * mass);
      ss += r * r;
    }
    fit.exponent = options.a;
    fit.amplitude = std::exp(ln_c);
    fit.residual = std::sqrt(ss / static_cast<double>(s.w.size()));
  }
  fit.threshold_multiplier = q;
  fit.points = s.w.size();
  return fit;
}

}  // namespace quenchlab
