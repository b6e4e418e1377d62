#pragma once

// Ground-state sudden quenches: fidelity, vacuum persistence, the imaginary-time
// film partition function and its free-energy split, fidelity
// susceptibilities, and fits of the lower edge of P(W_irr).

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "quenchlab/spectral_core.hpp"

namespace quenchlab {

/// |<eps_0|eps'_0>|. Cross-checks F^2 against the adiabatic atom of the TPM
/// distribution. Throws DegenerateGround if either ground state is not unique.
double ground_fidelity(const HermitianOperator& h0, const HermitianOperator& hf);

struct PersistenceAmplitude {
  std::vector<cplx> amplitude;  // g(u)
  std::vector<double> survival; // |g(u)|^2
};

/// g(u) = sum_m exp(i (eps'_m - eps_0) u) |<eps'_m|eps_0>|^2.
PersistenceAmplitude vacuum_persistence(const HermitianOperator& h0, const HermitianOperator& hf,
                                        std::span<const double> u_grid);

/// Z(R) sampled on a thickness grid and split as f(R) = R f_b + 2 f_s + f_C(R).
struct FilmFreeEnergy {
  std::vector<double> r_grid;
  std::vector<double> z_samples;  // <eps_0| exp(-(H_f - eps'_0) R) |eps_0>
  double transverse_cells = 1.0;  // N
  std::vector<double> f_total;    // -ln <eps_0|exp(-(H_f - eps_0) R)|eps_0> / N
  double bulk = 0.0;              // f_b = (eps'_0 - eps_0) / N
  double surface = 0.0;           // f_s
  std::vector<double> casimir;    // f_C(R)
};

/// Splits sampled Z(R) (already stripped of the bulk phase) into the three
/// terms. f_s is the mean of -ln Z / (2N) over the last 20% of the grid.
/// `z_limit` is lim Z(R); GridTooShort is raised unless Z agrees with it to
/// 1e-6 (relative) from the start of that tail onward.
FilmFreeEnergy decompose_film(std::vector<double> r_grid, std::vector<double> ln_z,
                              double bulk_shift, double transverse_cells, double z_limit);

FilmFreeEnergy film_partition_function(const HermitianOperator& h0, const HermitianOperator& hf,
                                       std::span<const double> r_grid, double transverse_cells);

/// Model-agnostic access for susceptibility scans: the log fidelity and the
/// surface free energy as functions of (lambda0, lambda_f).
struct SusceptibilitySource {
  double n_cells = 1.0;
  std::function<double(double, double)> log_fidelity;
  std::function<double(double, double)> surface;  // optional second route
};

struct SusceptibilityOptions {
  double lambda_c = 1.0;
  double nu = 1.0;
  double dimension = 1.0;
  double alpha_specific_heat = 0.0;
};

struct SusceptibilityReport {
  std::vector<int> orders;
  std::vector<double> lambda_f;
  std::vector<std::vector<double>> chi;          // chi[order index][lambda_f index], from ln F
  std::vector<std::vector<double>> chi_surface;  // same from d^n f_s; empty if no surface route
  double max_route_discrepancy = 0.0;            // relative, over all entries
  double fitted_exponent = 0.0;                  // slope of ln|chi_2| vs ln|lf - lc|
  double fit_residual = 0.0;
  double expected_exponent = 0.0;                // nu d - 2
  double alpha_s = 0.0;                          // alpha + nu
};

/// Finite-difference step for derivative order n (scaled by max(1, |x|)).
double susceptibility_step(int order);

/// chi_n = -N^{-1} d^n ln F / d lf^n on each grid point. Requires order 2 among
/// `orders` for the exponent fit; FitWindowTooNarrow below five grid points.
SusceptibilityReport fidelity_susceptibility(const SusceptibilitySource& source, double lambda0,
                                             std::span<const double> lambda_f_grid,
                                             std::span<const int> orders,
                                             const SusceptibilityOptions& options = {});

/// Broadened continuum of P(W_irr) with the adiabatic atom held separately.
struct WorkDensity {
  std::vector<double> w_grid;
  std::vector<double> density;
  double delta_weight = 0.0;  // F^2
  double broadening = 0.0;    // eta
};

struct EdgeFitOptions {
  bool free_parameters = true;  // measurement mode; false fixes (q, a)
  double q = 1.0;               // fixed-mode value and window anchor
  double a = 1.0;               // fixed-mode value
  double q_min = 0.0;           // measurement-mode search bounds for q
  double q_max = 3.0;
  std::optional<double> window_lo;
  std::optional<double> window_hi;
  double spectral_span = 0.0;   // 0: use the w_grid extent
};

struct EdgeFit {
  double weight = 0.0;     // F^2
  double amplitude = 0.0;  // C
  double threshold_multiplier = 0.0;  // q
  double exponent = 0.0;   // a
  double mass = 0.0;
  double window_lo = 0.0;
  double window_hi = 0.0;
  double residual = 0.0;   // rms of the log-space fit
  std::size_t points = 0;
};

/// Least-squares fit of C (W_irr - q m)^{1-a} in log space. In measurement
/// mode the rms residual is profiled over q, with a and C from the linear fit.
EdgeFit fit_edge(const WorkDensity& density, double mass, const EdgeFitOptions& options = {});

}  // namespace quenchlab
