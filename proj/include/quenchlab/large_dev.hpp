#pragma once

// Large deviations of the intensive irreversible work w = W_irr / N.

#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "quenchlab/ising_chain.hpp"
#include "quenchlab/spectral_core.hpp"

namespace quenchlab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Moment generating function ln <exp(-R W_irr)> of a ground-state quench,
/// together with the few summary numbers the rate-function code needs.
struct MgfSource {
  std::function<double(double)> log_mgf;
  double n_cells = 1.0;
  double mean_w = 0.0;         // <W_irr> / N
  double surface_limit = 0.0;  // 2 f_s = -ln P(W_irr = 0) / N
  double spectral_scale = 1.0; // smallest excitation energy, sets the R scale
  bool atomic = true;          // negative R always converges for atomic measures
};

/// W_irr = W - (eps'_0 - eps_0) for each atom of a ground-state distribution.
MgfSource mgf_from_distribution(const WorkDistribution& d, double n_cells);
/// Product formula over Bogoliubov modes.
MgfSource mgf_from_modes(const ising::ModeSet& modes);
/// Broadened continuum plus adiabatic atom. DivergentMGF is raised at negative
/// R once the top of the sampled window carries non-negligible weight.
MgfSource mgf_from_density(const WorkDensity& density, double n_cells);

/// f_ex(R) = -(1/N) ln <exp(-R W_irr)>.
std::vector<double> excess_free_energy(const MgfSource& source, std::span<const double> r_grid);
std::vector<double> excess_free_energy(const WorkDistribution& d, double n_cells,
                                       std::span<const double> r_grid);

struct LegendreTransform {
  std::vector<double> rate;             // I(w), +inf for w < 0
  std::vector<bool> boundary_infimum;   // maximizer at the largest R: a lower bound only
  std::vector<bool> lower_boundary;     // maximizer at the smallest R
};

/// I(w) = max over the grid of [f_ex(R) - R w]. Rejects f_ex that is not
/// concave on the grid (NonConcaveInput).
LegendreTransform legendre_fenchel(std::span<const double> r_grid, std::span<const double> f_ex,
                                   std::span<const double> w_grid);

struct RateFunctionCurve {
  std::vector<double> r_grid;
  std::vector<double> f_ex;
  std::vector<double> w_grid;
  std::vector<double> rate;
  std::vector<bool> boundary_infimum;
  double n_cells = 1.0;
  double mean_w = 0.0;
  double surface_limit = 0.0;
  bool negative_r_used = false;   // w > mean_w needs R < 0
  int extensions = 0;

  /// Exact grid-scan evaluation at any w, reusing the stored f_ex samples.
  double rate_at(double w) const;
};

struct RateConfig {
  std::vector<double> w_grid;
  std::size_t r_points = 200;
  int max_extensions = 12;
};

/// Geometric R grid: 0 plus `points` values over [1e-3, 50] / scale.
std::vector<double> default_r_grid(double spectral_scale, std::size_t points = 200);

/// Legendre transform with the R range widened (x4 per step) until no w > 0
/// in the window has its maximizer on a grid edge.
RateFunctionCurve rate_function(const MgfSource& source, const RateConfig& config);

struct CollapseCurve {
  RateFunctionCurve curve;
  double xi = 1.0;        // correlation length, 1 / mass
  double label = 0.0;     // e.g. lambda_f
};

struct CollapseOptions {
  double dimension = 1.0;
  double xi_min = 1.0;      // curves with smaller xi are too far from criticality
  std::size_t x_points = 200;
};

struct CollapseReport {
  std::vector<double> x_grid;                 // w xi^{d+1}
  std::vector<double> labels;                 // kept curves, input order
  std::vector<std::vector<double>> scaled;    // (I - 2 f_s) xi^d per kept curve
  std::vector<std::vector<double>> distance;  // pairwise sup distances
  std::vector<double> excluded_labels;
  double max_distance = 0.0;
};

/// Rescales rate curves onto x = w xi^{d+1}, y = (I - 2 f_s) xi^d over the
/// common window [0, min_i mean_w_i xi_i^{d+1}]. Needs three curves after the
/// xi guard (InsufficientCurves).
CollapseReport casimir_collapse(const std::vector<CollapseCurve>& curves,
                                const CollapseOptions& options = {});

/// Exact distribution of W_irr for the mode product with every pair energy
/// rounded to a lattice of spacing `step`; entry j is P(W_irr = j step).
std::vector<double> lattice_work_distribution(const ising::ModeSet& modes, double step);

struct EmpiricalRateRow {
  double w = 0.0;          // bin centre
  double empirical = 0.0;  // -ln(P_bin / bin width in units of mean_w) / N
  double rate = 0.0;       // I(w)
};

/// Bins the lattice distribution in w / mean_w over [0, 1) and compares
/// -ln P / N with the rate function bin by bin.
std::vector<EmpiricalRateRow> empirical_rate(const ising::ModeSet& modes, std::size_t bins,
                                             std::size_t lattice_points = 400001);

}  // namespace quenchlab
