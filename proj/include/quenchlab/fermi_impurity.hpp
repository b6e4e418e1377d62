#pragma once

// A localized rank-one scatterer v |w><w| in a free Fermi gas: Anderson
// overlaps, the vacuum persistence amplitude from single-particle
// determinants, its second-order cumulant, and absorption spectra.
//
// `channels` counts degenerate, independent copies of the gas (spin). The
// overlap and amplitude are raised to that power; cumulants scale with it.

#include <span>
#include <vector>

#include "quenchlab/spectral_core.hpp"

namespace quenchlab::impurity {

enum class Dispersion {
  Linear,  // eps_n = (n - (M - 1) / 2) D / M
  Box,     // eps_n = D ((n + 1) / M)^2
};

struct ImpurityModel {
  RealVector levels;            // ascending unperturbed energies
  int n_particles = 0;          // per channel
  int channels = 1;
  double potential = 0.0;       // v
  RealVector coupling_vector;   // unit vector w
  RealVector perturbed_levels;
  Eigen::MatrixXd perturbed_orbitals;  // columns, in the unperturbed basis
  double phase_shift = 0.0;        // from the on-shell T-matrix at the Fermi energy
  double phase_shift_eigen = 0.0;  // from the shift of the level nearest the Fermi energy
  double fermi_energy = 0.0;       // midway between the last occupied and first empty level

  int n_levels() const { return static_cast<int>(levels.size()); }
  /// Single-particle Hamiltonians before and after the scatterer is switched on.
  Eigen::MatrixXd h0() const;
  Eigen::MatrixXd h() const;
  /// Many-body ground-state energy shift, summed over channels.
  double threshold() const;
};

/// Builds the model with uniform w = 1/sqrt(M) and bandwidth-scaled levels.
ImpurityModel build_impurity_model(int n_levels, int n_particles, Dispersion dispersion,
                                   double potential, double bandwidth = 1.0, int channels = 1);

/// General form: explicit levels and coupling vector (normalized on entry).
ImpurityModel build_impurity_model(RealVector levels, RealVector coupling, int n_particles,
                                   double potential, int channels = 1);

/// Eigenpairs of diag(levels) + v w w^T from the secular equation, each root
/// stored as an offset from its nearest pole. Exposed for validation.
void solve_rank_one(const RealVector& levels, const RealVector& w, double v, RealVector& values,
                    Eigen::MatrixXd& vectors);

/// F = |det <phi_i|psi_j>| over the occupied orbitals, to the power `channels`.
double anderson_overlap(const ImpurityModel& model);

struct PersistenceSeries {
  std::vector<double> t_grid;
  std::vector<cplx> nu;
  std::vector<cplx> lambda2;
  double threshold = 0.0;     // many-body ground-energy shift
  double coupling_g = 0.0;    // slope of -Re Lambda_2 against ln t
  double tau0 = 0.0;
  double fitted_alpha = 0.0;  // slope of -ln|nu| against ln t
};

/// Zero temperature: det[P_occ e^{i h0 t} e^{-i h t} P_occ].
/// Finite beta: det[1 - n + n e^{i h0 t} e^{-i h t}] with Fermi occupations n
/// of h0 at the chemical potential `fermi_energy` (grand canonical).
/// Also fills Lambda_2 and, when the grid reaches it, the log fits over
/// t in [5 / bandwidth, 0.25 / spacing_F].
PersistenceSeries persistence_determinant(const ImpurityModel& model,
                                          std::span<const double> t_grid,
                                          InverseTemperature beta);

/// Many-body Hamiltonian sum_ab h_ab c^dag_a c_b on the Fock space of M <= 8
/// orbitals, restricted to `particles` fermions (or all of it for -1).
Matrix fock_hamiltonian(const Eigen::MatrixXd& single_particle, int particles);

/// Fock-space oracle for the amplitude (single channel). DimensionCap above M = 8.
std::vector<cplx> persistence_ed(const ImpurityModel& model, std::span<const double> t_grid,
                                 InverseTemperature beta);

/// TPM work distribution of the corresponding many-body sudden quench (single
/// channel, M <= 8); grand canonical at finite beta.
WorkDistribution impurity_work_distribution(const ImpurityModel& model, InverseTemperature beta);

/// Lambda_2(t) = -sum_ab |V_ab|^2 f_a (1 - f_b) [1 - e^{-i w t} - i w t] / w^2,
/// w = eps_b - eps_a, evaluated in closed form per distinct w.
std::vector<cplx> linked_cluster_lambda2(const ImpurityModel& model,
                                         std::span<const double> t_grid, InverseTemperature beta);

struct LogFit {
  double g = 0.0;
  double tau0 = 0.0;
  double residual = 0.0;
};

/// -Re Lambda_2 = g ln(t / tau0) fitted on t in [t_lo, t_hi].
LogFit fit_log_coupling(std::span<const double> t_grid, std::span<const cplx> lambda2,
                        double t_lo, double t_hi);

/// Uniform grid from 0 with t_max such that exp(-eta^2 t^2 / 2) < 1e-7 and a
/// step resolving energies up to `max_energy`.
std::vector<double> default_time_grid(double eta, double max_energy);

struct AbsorptionOptions {
  double eta = 0.0;       // Gaussian time window exp(-eta^2 t^2 / 2)
  double fit_lo = 0.0;    // edge-fit window in detuning; empty window skips the fit
  double fit_hi = 0.0;
};

struct AbsorptionSpectrum {
  std::vector<double> detuning_grid;  // omega - threshold
  std::vector<double> a_values;
  double time_cutoff = 0.0;
  double eta = 0.0;
  double sum_rule = 0.0;        // integral of A over the grid / (2 pi)
  double edge_exponent = 0.0;   // A ~ detuning^{edge_exponent}
  double edge_residual = 0.0;
};

/// A(omega) = 2 Re int_0^inf dt e^{i omega t} nu(t) window(t), trapezoid in t.
/// WindowTooShort if |nu(t_max)| window(t_max) >= 1e-6.
AbsorptionSpectrum absorption_spectrum(const PersistenceSeries& series,
                                       std::span<const double> detuning_grid,
                                       const AbsorptionOptions& options);

struct AdiabaticRow {
  int n_particles = 0;
  double probability = 0.0;  // F^2
};

struct AdiabaticScan {
  std::vector<AdiabaticRow> rows;
  double fitted_exponent = 0.0;  // slope of ln P against ln N
};

AdiabaticScan adiabatic_probability_scan(const std::vector<ImpurityModel>& models);

/// Third cumulant of the work for the zero-temperature sudden quench:
/// Tr rho h^3 - 3 Tr rho h rho h^2 + 2 Tr (rho h)^3 with rho the occupied projector.
double third_cumulant(const ImpurityModel& model);

}  // namespace quenchlab::impurity
