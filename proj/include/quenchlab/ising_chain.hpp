#pragma once

// Transverse-field Ising chain H(l) = -sum_j (sx_j sx_{j+1} + l sz_j), periodic,
// solved by free fermions in the even-parity (antiperiodic-momentum) sector.
// A brute-force spin-basis oracle at L <= 12 pins every sign and branch.

#include <span>
#include <vector>

#include "quenchlab/quench_ground.hpp"
#include "quenchlab/spectral_core.hpp"

namespace quenchlab::ising {

inline constexpr double kLambdaCritical = 1.0;

/// Quasiparticle energy 2 sqrt(l^2 - 2 l cos k + 1).
double mode_energy(double lambda, double k);
/// Bogoliubov angle: atan2(sin k, l - cos k), so that the energy stays positive.
double bogoliubov_angle(double lambda, double k);
/// Even-sector ground energy, -sum_{k>0} eps_k.
double ground_energy(int length, double lambda);

/// Mode data for a sudden quench l0 -> lf; only k > 0 is stored.
struct ModeSet {
  int length = 0;
  double lambda0 = 0.0;
  double lambda_f = 0.0;
  std::vector<double> momenta;        // (2j - 1) pi / L, j = 1..L/2
  std::vector<double> pre_energies;   // eps_k(l0)
  std::vector<double> post_energies;  // eps_k(lf)
  std::vector<double> angle_diffs;    // Delta_k = (theta_k(lf) - theta_k(l0)) / 2
  double ground_shift = 0.0;          // E0(lf) - E0(l0)

  double n_cells() const { return static_cast<double>(length); }
  /// Smallest quasiparticle energy after the quench; one pair costs 2 eps_k.
  double mass() const;
  /// ln F = sum_k ln |cos Delta_k|.
  double log_fidelity() const;
  double fidelity_squared() const;
  /// Mean irreversible work, sum_k 2 eps_k sin^2 Delta_k.
  double mean_irreversible_work() const;
  double max_pair_energy() const;
  double total_pair_energy() const;
};

/// Requires even L with 4 <= L <= 1e6.
ModeSet build_modes(int length, double lambda0, double lambda_f);

/// g(u) = exp(i dE0 u) prod_{k>0} [cos^2 D_k + sin^2 D_k exp(2 i eps_k(lf) u)],
/// accumulated as a sum of logarithms.
std::vector<cplx> g_exact(const ModeSet& modes, std::span<const double> u_grid);

/// Same product without the exp(i dE0 u) phase: the characteristic function of W_irr.
std::vector<cplx> g_irreversible(const ModeSet& modes, std::span<const double> u_grid);

enum class EdBasis {
  Full,              // dense 2^L spin basis
  SymmetricSector,   // even parity, zero momentum (holds both ground states)
};

/// Dense spin Hamiltonian on 2^L states, basis bit j set = spin j down.
Matrix spin_hamiltonian(int length, double lambda);

/// Real symmetric Hamiltonian restricted to translation-invariant states of
/// even sz-parity.
Eigen::MatrixXd symmetric_sector_hamiltonian(int length, double lambda);

/// Vacuum persistence amplitude by exact diagonalization in the spin basis.
/// DimensionCap for L > 12.
std::vector<cplx> ed_oracle_g(int length, double lambda0, double lambda_f,
                              std::span<const double> u_grid,
                              EdBasis basis = EdBasis::SymmetricSector);

struct EdGround {
  double energy0 = 0.0;
  double energy_f = 0.0;
  double fidelity_squared = 0.0;
};

EdGround ed_ground_data(int length, double lambda0, double lambda_f,
                        EdBasis basis = EdBasis::SymmetricSector);

struct DensityOptions {
  double u_max = 0.0;  // 0: chosen from eta so the window has decayed to 1e-10
  double du = 0.0;     // 0: chosen so periodic images miss the w window
};

/// Continuum part of P(W_irr) by Fourier inversion of g_irreversible with a
/// Gaussian window exp(-eta^2 u^2 / 2). The adiabatic atom is reported
/// separately. AliasingDetected if the windowed signal has not decayed to 1e-8
/// by u_max or the sampling step folds the support onto the w window.
WorkDensity work_density(const ModeSet& modes, double eta, std::span<const double> w_grid,
                         const DensityOptions& options = {});

/// Broadening wide enough to smooth the discrete pair spectrum: twice the
/// largest spacing between neighbouring pair energies 2 eps_k.
double default_broadening(const ModeSet& modes);

/// Fidelity route (product of cos Delta_k) and film route (imaginary-time
/// product) to ln F and f_s for a chain of the given length.
SusceptibilitySource susceptibility_source(int length);

SusceptibilityReport susceptibility_scan(int length, double lambda0,
                                         std::span<const double> lambda_f_grid,
                                         std::span<const int> orders = std::vector<int>{2},
                                         bool surface_route = false);

/// ln Z(R) = sum_k ln[cos^2 D_k + sin^2 D_k exp(-2 eps_k R)].
std::vector<double> film_log_z(const ModeSet& modes, std::span<const double> r_grid);

/// Default thickness grid: up to 40 / (2 mass), where the tail has converged.
std::vector<double> film_grid(const ModeSet& modes, std::size_t points = 200);

FilmFreeEnergy film_partition_function(const ModeSet& modes, std::span<const double> r_grid);

}  // namespace quenchlab::ising
