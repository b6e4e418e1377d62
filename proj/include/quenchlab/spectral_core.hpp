#pragma once

// Exact-diagonalization engine for the two-point-measurement (TPM) scheme.

#include <Eigen/Dense>
#include <memory>
#include <span>
#include <vector>

#include "quenchlab/numerics.hpp"

namespace quenchlab {

using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Dense Hermitian matrix together with its eigendecomposition.
///
/// Eigenvalues ascend. Each eigenvector has its largest-magnitude component
/// real and positive (first such index on ties) so decompositions are
/// reproducible bit for bit.
class HermitianOperator {
 public:
  /// Throws NonHermitian when the matrix differs from its adjoint by more than
  /// 1e-12 of its largest entry, DecompositionFailure if the solver fails.
  static HermitianOperator decompose(const Matrix& entries);

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  const RealVector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }

  double ground_energy() const { return eigenvalues_(0); }
  /// eps_1 - eps_0, +inf for a one-dimensional space.
  double ground_gap() const;
  double spectral_span() const { return eigenvalues_(dim() - 1) - eigenvalues_(0); }
  /// Number of eigenvalues within `tol` of the ground energy.
  Eigen::Index ground_multiplicity(double tol = 1e-12) const;

  Matrix reconstruct() const;

 private:
  Matrix entries_;
  RealVector eigenvalues_;
  Matrix eigenvectors_;
};

HermitianOperator eigendecompose(const Matrix& entries);

/// Inverse temperature, or the zero-temperature (ground-state) sentinel.
class InverseTemperature {
 public:
  static InverseTemperature finite(double beta);
  static InverseTemperature ground_state() { return InverseTemperature(); }

  bool is_ground_state() const { return ground_; }
  /// Throws InvalidArgument for the ground-state sentinel.
  double value() const;

 private:
  InverseTemperature() = default;
  double beta_ = 0.0;
  bool ground_ = true;
};

/// Populations of the eigenstates of one Hamiltonian at fixed temperature.
struct GibbsEnsemble {
  InverseTemperature beta = InverseTemperature::ground_state();
  RealVector weights;        // p_n in the eigenvalue order of the operator
  double log_partition = 0;  // ln Z; NaN for the ground-state ensemble
  double free_energy = 0;    // -ln Z / beta, or the ground energy at zero temperature
  bool degenerate_ground = false;

  double partition() const;
};

GibbsEnsemble gibbs_state(const HermitianOperator& h, InverseTemperature beta);

/// -ln Z / beta computed with a ground-energy shift.
double log_partition(const RealVector& eigenvalues, double beta);
double free_energy(const RealVector& eigenvalues, double beta);

/// H(lambda) = base + lambda * coupling.
class HamiltonianFamily {
 public:
  HamiltonianFamily(Matrix base, Matrix coupling);

  /// Builds a family from two endpoint Hamiltonians and the claimed coupling;
  /// throws NonlinearFamily when h_final - h_initial != (lf - l0) * coupling.
  static HamiltonianFamily from_endpoints(const Matrix& h_initial, const Matrix& h_final,
                                          const Matrix& coupling, double lambda_initial,
                                          double lambda_final);

  const Matrix& base() const { return base_; }
  const Matrix& coupling() const { return coupling_; }
  Eigen::Index dim() const { return base_.rows(); }

  Matrix matrix_at(double lambda) const { return base_ + lambda * coupling_; }
  HermitianOperator at(double lambda) const { return eigendecompose(matrix_at(lambda)); }
  /// Equilibrium free energy F_beta(lambda); eigenvalues only.
  double free_energy_at(double lambda, double beta) const;

 private:
  Matrix base_;
  Matrix coupling_;
};

/// Initial/final Hamiltonians, the propagator between the two measurements
/// and the initial temperature.
struct QuenchSpec {
  std::shared_ptr<const HermitianOperator> initial;
  std::shared_ptr<const HermitianOperator> final;
  Matrix propagator;  // identity for a sudden quench
  InverseTemperature beta = InverseTemperature::ground_state();

  static QuenchSpec sudden(HermitianOperator initial, HermitianOperator final,
                           InverseTemperature beta);
  static QuenchSpec driven(HermitianOperator initial, HermitianOperator final, Matrix propagator,
                           InverseTemperature beta);

  /// Dimension agreement and unitarity of the propagator (1e-10).
  void validate() const;
};

struct WorkAtom {
  double work = 0.0;
  double probability = 0.0;
};

/// Finite atomic measure P(W) over work values, atoms strictly ascending.
struct WorkDistribution {
  std::vector<WorkAtom> atoms;
  double adiabatic_shift = 0.0;  // eps'_0 - eps_0
  double merged_tolerance = 0.0;
  bool ground_state = false;

  double total_probability() const;
  double mean() const;
  double min_work() const { return atoms.front().work; }
  double max_work() const { return atoms.back().work; }
  /// Summed probability of atoms within `tol` of `work`.
  double probability_near(double work, double tol) const;
};

struct TpmOptions {
  Eigen::Index dimension_cap = 4096;
};

WorkDistribution tpm_distribution(const QuenchSpec& q, const TpmOptions& options = {});

/// g(u) = sum over atoms of p exp(i u W).
std::vector<cplx> characteristic_function(const WorkDistribution& d,
                                          std::span<const double> u_grid);

/// g(u) = Tr[U^dag e^{iuH_f} U e^{-iuH_0} rho_G], evaluated with dense matrix
/// products. Independent of the atom table; used to cross-check it.
std::vector<cplx> characteristic_function_trace(const QuenchSpec& q,
                                                std::span<const double> u_grid);

/// Cumulants C_1..C_max_order (max_order <= 12).
std::vector<double> cumulants(const WorkDistribution& d, int max_order);

/// Delta F = F_f - F_0 at finite beta; Delta eps_0 for the ground-state sentinel.
double free_energy_difference(const HermitianOperator& h0, const HermitianOperator& hf,
                              InverseTemperature beta);

struct EntropyReport {
  double mean_work = 0.0;        // first moment of P(W)
  double mean_work_trace = 0.0;  // Tr[H_f rho_tau] - Tr[H_0 rho_G]
  double delta_F = 0.0;
  double s_irr = 0.0;            // beta (<W> - Delta F)
  double relative_entropy = 0.0; // D(rho_tau || rho_G(lambda_f))
  double trace_distance = 0.0;   // (1/2) || rho_tau - rho_G(lambda_f) ||_1
  double jarzynski_residual = 0.0;
  std::vector<double> cumulants; // C_1..C_10
};

/// Finite, positive beta only. Throws IdentityMismatch when the two routes to
/// <W>, or s_irr and D, disagree beyond 1e-8.
EntropyReport entropy_production(const QuenchSpec& q);

struct ThermalWork {
  double lhs = 0.0;  // <W> from the TPM distribution
  double rhs = 0.0;  // (lf - l0) F'_beta(l0)
};

/// Throws IdentityMismatch if |lhs - rhs| >= 1e-6 max(1, |lhs|).
ThermalWork thermal_sudden_work(const HamiltonianFamily& family, double lambda0,
                                double lambda_f, double beta);

struct EntropyExpansionRow {
  double delta_lambda = 0.0;
  double exact = 0.0;     // beta (<W> - Delta F)
  double estimate = 0.0;  // -(dl)^2 beta F''(l0) / 2
};

struct EntropyExpansion {
  std::vector<EntropyExpansionRow> rows;
  double second_derivative = 0.0;  // F''_beta(l0)
  double fitted_order = 0.0;       // slope of log|exact - estimate| vs log|dl|, NaN if < 2 points
};

EntropyExpansion small_quench_entropy_expansion(const HamiltonianFamily& family, double lambda0,
                                                std::span<const double> delta_lambdas,
                                                double beta);

}  // namespace quenchlab
