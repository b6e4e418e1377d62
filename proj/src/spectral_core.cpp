#include "quenchlab/spectral_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "quenchlab/error.hpp"

namespace quenchlab {

namespace {

// Contributions this small are roundoff from orthogonal eigenvectors; keeping
// them would plant spurious atoms far below any physical weight.
constexpr double kNegligibleProbability = 1e-30;

double max_abs_entry(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

void fix_phases(Matrix& vecs) {
  for (Eigen::Index j = 0; j < vecs.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
      // strict comparison with a small margin keeps the first index on ties
      const double a = std::abs(vecs(i, j));
      if (a > best_abs * (1.0 + 1e-12)) {
        best_abs = a;
        best = i;
      }
    }
    const cplx z = vecs(best, j);
    if (std::abs(z) > 0.0) vecs.col(j) *= std::conj(z) / std::abs(z);
    vecs(best, j) = cplx(vecs(best, j).real(), 0.0);
  }
}

// exp(-beta (eps - eps_0)) for each level, and ln Z.
RealVector boltzmann(const RealVector& eps, double beta, double& log_z) {
  const double e0 = eps.minCoeff();
  RealVector w(eps.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) w(i) = std::exp(-beta * (eps(i) - e0));
  std::vector<double> terms(w.data(), w.data() + w.size());
  const double s = pairwise_sum(terms);
  log_z = -beta * e0 + std::log(s);
  return w / s;
}

}  // namespace

HermitianOperator HermitianOperator::decompose(const Matrix& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0) {
    throw Error(ErrorKind::InvalidArgument, "matrix must be square and non-empty");
  }
  const double scale = max_abs_entry(entries);
  const double asym = max_abs_entry(entries - entries.adjoint());
  if (asym > 1e-12 * scale) {
    throw Error(ErrorKind::NonHermitian,
                "asymmetry " + std::to_string(asym) + " exceeds tolerance");
  }
  HermitianOperator op;
  op.entries_ = entries;
  const Matrix sym = 0.5 * (entries + entries.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::DecompositionFailure, "eigen solver did not converge");
  }
  op.eigenvalues_ = solver.eigenvalues();
  op.eigenvectors_ = solver.eigenvectors();
  fix_phases(op.eigenvectors_);
  return op;
}

HermitianOperator eigendecompose(const Matrix& entries) {
  return HermitianOperator::decompose(entries);
}

double HermitianOperator::ground_gap() const {
  if (dim() < 2) return std::numeric_limits<double>::infinity();
  return eigenvalues_(1) - eigenvalues_(0);
}

Eigen::Index HermitianOperator::ground_multiplicity(double tol) const {
  Eigen::Index k = 1;
  while (k < dim() && eigenvalues_(k) - eigenvalues_(0) < tol) ++k;
  return k;
}

Matrix HermitianOperator::reconstruct() const {
  return eigenvectors_ * eigenvalues_.cast<cplx>().asDiagonal() * eigenvectors_.adjoint();
}

InverseTemperature InverseTemperature::finite(double beta) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorKind::InvalidArgument, "beta must be finite and nonnegative");
  }
  InverseTemperature t;
  t.beta_ = beta;
  t.ground_ = false;
  return t;
}

double InverseTemperature::value() const {
  if (ground_) throw Error(ErrorKind::InvalidArgument, "ground-state sentinel has no finite beta");
  return beta_;
}

double GibbsEnsemble::partition() const { return std::exp(log_partition); }

GibbsEnsemble gibbs_state(const HermitianOperator& h, InverseTemperature beta) {
  GibbsEnsemble g;
  g.beta = beta;
  const Eigen::Index mult = h.ground_multiplicity();
  g.degenerate_ground = mult > 1;
  if (beta.is_ground_state()) {
    g.weights = RealVector::Zero(h.dim());
    g.weights.head(mult).setConstant(1.0 / static_cast<double>(mult));
    g.log_partition = std::numeric_limits<double>::quiet_NaN();
    g.free_energy = h.ground_energy();
    return g;
  }
  const double b = beta.value();
  g.weights = boltzmann(h.eigenvalues(), b, g.log_partition);
  g.free_energy = b > 0.0 ? -g.log_partition / b : -std::numeric_limits<double>::infinity();
  return g;
}

double log_partition(const RealVector& eigenvalues, double beta) {
  double lz = 0.0;
  boltzmann(eigenvalues, beta, lz);
  return lz;
}

double free_energy(const RealVector& eigenvalues, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "free energy needs beta > 0");
  return -log_partition(eigenvalues, beta) / beta;
}

HamiltonianFamily::HamiltonianFamily(Matrix base, Matrix coupling)
    : base_(std::move(base)), coupling_(std::move(coupling)) {
  if (base_.rows() != coupling_.rows() || base_.cols() != coupling_.cols() ||
      base_.rows() != base_.cols()) {
    throw Error(ErrorKind::InvalidArgument, "base and coupling dimensions differ");
  }
  const double scale = std::max(max_abs_entry(base_), max_abs_entry(coupling_));
  if (max_abs_entry(base_ - base_.adjoint()) > 1e-12 * scale ||
      max_abs_entry(coupling_ - coupling_.adjoint()) > 1e-12 * scale) {
    throw Error(ErrorKind::NonHermitian, "family members must be Hermitian");
  }
}

HamiltonianFamily HamiltonianFamily::from_endpoints(const Matrix& h_initial,
                                                    const Matrix& h_final,
                                                    const Matrix& coupling,
                                                    double lambda_initial,
                                                    double lambda_final) {
  if (h_initial.rows() != h_final.rows() || h_initial.rows() != coupling.rows()) {
    throw Error(ErrorKind::InvalidArgument, "endpoint dimensions differ");
  }
  const Matrix diff = h_final - h_initial - (lambda_final - lambda_initial) * coupling;
  const double scale = std::max({max_abs_entry(h_initial), max_abs_entry(h_final), 1.0});
  if (max_abs_entry(diff) > 1e-12 * scale) {
    throw Error(ErrorKind::NonlinearFamily,
                "H(lf) - H(l0) is not (lf - l0) times the coupling");
  }
  return HamiltonianFamily(h_initial - lambda_initial * coupling, coupling);
}

double HamiltonianFamily::free_energy_at(double lambda, double beta) const {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix_at(lambda), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::DecompositionFailure, "eigen solver did not converge");
  }
  return free_energy(solver.eigenvalues(), beta);
}

QuenchSpec QuenchSpec::sudden(HermitianOperator initial, HermitianOperator final,
                              InverseTemperature beta) {
  const auto d = initial.dim();
  return driven(std::move(initial), std::move(final), Matrix::Identity(d, d), beta);
}

QuenchSpec QuenchSpec::driven(HermitianOperator initial, HermitianOperator final,
                              Matrix propagator, InverseTemperature beta) {
  QuenchSpec q;
  q.initial = std::make_shared<const HermitianOperator>(std::move(initial));
  q.final = std::make_shared<const HermitianOperator>(std::move(final));
  q.propagator = std::move(propagator);
  q.beta = beta;
  q.validate();
  return q;
}

void QuenchSpec::validate() const {
  if (!initial || !final) throw Error(ErrorKind::InvalidArgument, "quench is missing a Hamiltonian");
  const auto d = initial->dim();
  if (final->dim() != d || propagator.rows() != d || propagator.cols() != d) {
    throw Error(ErrorKind::InvalidArgument, "quench dimensions disagree");
  }
  const double err = max_abs_entry(propagator.adjoint() * propagator - Matrix::Identity(d, d));
  if (err > 1e-10) throw Error(ErrorKind::InvalidArgument, "propagator is not unitary");
}

double WorkDistribution::total_probability() const {
  std::vector<double> p;
  p.reserve(atoms.size());
  for (const auto& a : atoms) p.push_back(a.probability);
  return pairwise_sum(p);
}

double WorkDistribution::mean() const {
  std::vector<double> p;
  p.reserve(atoms.size());
  for (const auto& a : atoms) p.push_back(a.probability * a.work);
  return pairwise_sum(p);
}

double WorkDistribution::probability_near(double work, double tol) const {
  double s = 0.0;
  for (const auto& a : atoms)
    if (std::abs(a.work - work) <= tol) s += a.probability;
  return s;
}

WorkDistribution tpm_distribution(const QuenchSpec& q, const TpmOptions& options) {
  q.validate();
  const auto& h0 = *q.initial;
  const auto& hf = *q.final;
  if (h0.dim() > options.dimension_cap) {
    throw Error(ErrorKind::DimensionCap, "dimension " + std::to_string(h0.dim()) +
                                             " exceeds cap " +
                                             std::to_string(options.dimension_cap));
  }
  const GibbsEnsemble rho = gibbs_state(h0, q.beta);

  std::vector<WorkAtom> raw;
  for (Eigen::Index n = 0; n < h0.dim(); ++n) {
    const double pn = rho.weights(n);
    if (pn <= 0.0) continue;
    // <eps'_m | U | eps_n> for all m
    const Eigen::VectorXcd overlap =
        hf.eigenvectors().adjoint() * (q.propagator * h0.eigenvectors().col(n));
    for (Eigen::Index m = 0; m < hf.dim(); ++m) {
      const double p = pn * std::norm(overlap(m));
      if (p > kNegligibleProbability) {
        raw.push_back({hf.eigenvalues()(m) - h0.eigenvalues()(n), p});
      }
    }
  }
  std::sort(raw.begin(), raw.end(),
            [](const WorkAtom& a, const WorkAtom& b) { return a.work < b.work; });

  WorkDistribution d;
  d.adiabatic_shift = hf.ground_energy() - h0.ground_energy();
  d.ground_state = q.beta.is_ground_state();
  const double span = std::max(h0.spectral_span(), hf.spectral_span());
  d.merged_tolerance = 1e-11 * (span > 0.0 ? span : 1.0);

  std::size_t i = 0;
  while (i < raw.size()) {
    const double anchor = raw[i].work;
    double p = 0.0, pw = 0.0;
    std::size_t j = i;
    while (j < raw.size() && raw[j].work - anchor <= d.merged_tolerance) {
      p += raw[j].probability;
      pw += raw[j].probability * raw[j].work;
      ++j;
    }
    d.atoms.push_back({pw / p, p});
    i = j;
  }
  return d;
}

std::vector<cplx> characteristic_function(const WorkDistribution& d,
                                          std::span<const double> u_grid) {
  std::vector<cplx> out(u_grid.size());
  std::vector<cplx> terms(d.atoms.size());
  for (std::size_t k = 0; k < u_grid.size(); ++k) {
    for (std::size_t a = 0; a < d.atoms.size(); ++a) {
      terms[a] = d.atoms[a].probability * std::polar(1.0, u_grid[k] * d.atoms[a].work);
    }
    out[k] = pairwise_sum(terms);
  }
  return out;
}

std::vector<cplx> characteristic_function_trace(const QuenchSpec& q,
                                                std::span<const double> u_grid) {
  q.validate();
  const auto& h0 = *q.initial;
  const auto& hf = *q.final;
  const GibbsEnsemble rho = gibbs_state(h0, q.beta);
  const Matrix& v0 = h0.eigenvectors();
  const Matrix& vf = hf.eigenvectors();
  const Matrix& u = q.propagator;
  std::vector<cplx> out(u_grid.size());
  for (std::size_t k = 0; k < u_grid.size(); ++k) {
    const double t = u_grid[k];
    Eigen::VectorXcd pf(hf.dim()), p0(h0.dim());
    for (Eigen::Index m = 0; m < hf.dim(); ++m) pf(m) = std::polar(1.0, t * hf.eigenvalues()(m));
    for (Eigen::Index n = 0; n < h0.dim(); ++n) {
      p0(n) = rho.weights(n) * std::polar(1.0, -t * h0.eigenvalues()(n));
    }
    const Matrix ef = vf * pf.asDiagonal() * vf.adjoint();        // e^{iuH_f}
    const Matrix e0rho = v0 * p0.asDiagonal() * v0.adjoint();     // e^{-iuH_0} rho_G
    out[k] = (u.adjoint() * ef * u * e0rho).trace();
  }
  return out;
}

std::vector<double> cumulants(const WorkDistribution& d, int max_order) {
  if (max_order < 1 || max_order > 12) {
    throw Error(ErrorKind::OrderCap, "cumulant order must lie in 1..12");
  }
  const double mu = d.mean();
  // central moments m[0..max_order]
  std::vector<double> m(max_order + 1, 0.0);
  m[0] = 1.0;
  for (int k = 2; k <= max_order; ++k) {
    std::vector<double> t;
    t.reserve(d.atoms.size());
    for (const auto& a : d.atoms) t.push_back(a.probability * std::pow(a.work - mu, k));
    m[k] = pairwise_sum(t);
  }
  // kappa_n = m_n - sum_{j=1}^{n-1} C(n-1, j-1) kappa_j m_{n-j}, on the centred variable
  std::vector<double> kappa(max_order + 1, 0.0);
  for (int n = 2; n <= max_order; ++n) {
    double s = m[n];
    double binom = 1.0;  // C(n-1, j-1)
    for (int j = 1; j < n; ++j) {
      s -= binom * kappa[j] * m[n - j];
      binom = binom * static_cast<double>(n - j) / static_cast<double>(j);
    }
    kappa[n] = s;
  }
  kappa[1] = mu;
  return {kappa.begin() + 1, kappa.end()};
}

double free_energy_difference(const HermitianOperator& h0, const HermitianOperator& hf,
                              InverseTemperature beta) {
  if (beta.is_ground_state()) return hf.ground_energy() - h0.ground_energy();
  const double b = beta.value();
  if (!(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "free energy needs beta > 0");
  return -(log_partition(hf.eigenvalues(), b) - log_partition(h0.eigenvalues(), b)) / b;
}

EntropyReport entropy_production(const QuenchSpec& q) {
  if (q.beta.is_ground_state() || !(q.beta.value() > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "entropy production needs a finite positive beta");
  }
  const double beta = q.beta.value();
  const auto& h0 = *q.initial;
  const auto& hf = *q.final;
  const WorkDistribution dist = tpm_distribution(q);

  EntropyReport r;
  r.mean_work = dist.mean();
  r.delta_F = free_energy_difference(h0, hf, q.beta);
  r.s_irr = beta * (r.mean_work - r.delta_F);
  r.cumulants = cumulants(dist, 10);

  // Density-matrix route, everything in the final eigenbasis.
  const GibbsEnsemble rho0 = gibbs_state(h0, q.beta);
  const GibbsEnsemble rhof = gibbs_state(hf, q.beta);
  const Matrix m = hf.eigenvectors().adjoint() * q.propagator * h0.eigenvectors();
  const Matrix rho_tau = m * rho0.weights.cast<cplx>().asDiagonal() * m.adjoint();

  double ef = 0.0, e0 = 0.0, p_ln_p = 0.0;
  for (Eigen::Index k = 0; k < hf.dim(); ++k) ef += hf.eigenvalues()(k) * rho_tau(k, k).real();
  for (Eigen::Index n = 0; n < h0.dim(); ++n) {
    const double p = rho0.weights(n);
    e0 += h0.eigenvalues()(n) * p;
    // ln p_n = -beta eps_n - ln Z_0, exact even where p_n underflows
    if (p > 0.0) p_ln_p += p * (-beta * h0.eigenvalues()(n) - rho0.log_partition);
  }
  r.mean_work_trace = ef - e0;
  // D = Tr rho ln rho - Tr rho ln sigma, with ln sigma = -beta H_f - ln Z_f
  r.relative_entropy = p_ln_p + beta * ef + rhof.log_partition;

  const Matrix diff = rho_tau - Matrix(rhof.weights.cast<cplx>().asDiagonal());
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  r.trace_distance = 0.5 * es.eigenvalues().cwiseAbs().sum();

  std::vector<double> logs;
  logs.reserve(dist.atoms.size());
  for (const auto& a : dist.atoms) {
    logs.push_back(std::log(a.probability) - beta * (a.work - r.delta_F));
  }
  r.jarzynski_residual = std::expm1(log_sum_exp(logs));

  const double scale = std::max(1.0, std::abs(r.mean_work));
  if (std::abs(r.mean_work - r.mean_work_trace) > 1e-8 * scale) {
    throw Error(ErrorKind::IdentityMismatch, "distribution and trace routes to <W> disagree");
  }
  if (std::abs(r.s_irr - r.relative_entropy) > 1e-8 * std::max(1.0, std::abs(r.s_irr))) {
    throw Error(ErrorKind::IdentityMismatch, "beta(<W> - dF) differs from the relative entropy");
  }
  return r;
}

ThermalWork thermal_sudden_work(const HamiltonianFamily& family, double lambda0,
                                double lambda_f, double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorKind::InvalidArgument, "thermal work needs a finite positive beta");
  }
  const auto q = QuenchSpec::sudden(family.at(lambda0), family.at(lambda_f),
                                    InverseTemperature::finite(beta));
  ThermalWork w;
  w.lhs = tpm_distribution(q).mean();
  const auto f = [&](double l) { return family.free_energy_at(l, beta); };
  w.rhs = (lambda_f - lambda0) * central_derivative(f, lambda0, 1, 1e-5);
  if (std::abs(w.lhs - w.rhs) >= 1e-6 * std::max(1.0, std::abs(w.lhs))) {
    throw Error(ErrorKind::IdentityMismatch, "thermal work routes disagree");
  }
  return w;
}

EntropyExpansion small_quench_entropy_expansion(const HamiltonianFamily& family, double lambda0,
                                                std::span<const double> delta_lambdas,
                                                double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw Error(ErrorKind::InvalidArgument, "entropy expansion needs a finite positive beta");
  }
  EntropyExpansion out;
  const auto f = [&](double l) { return family.free_energy_at(l, beta); };
  // A 1e-5 step leaves ~1e-6 roundoff in a second difference, comparable to the
  // cubic remainder being measured; 1e-3 with Richardson keeps both far smaller.
  out.second_derivative = central_derivative(f, lambda0, 2, 1e-3);

  const auto h0 = std::make_shared<const HermitianOperator>(family.at(lambda0));
  const auto t = InverseTemperature::finite(beta);
  std::vector<double> xs, ys;
  for (const double dl : delta_lambdas) {
    EntropyExpansionRow row;
    row.delta_lambda = dl;
    QuenchSpec q;
    q.initial = h0;
    q.final = std::make_shared<const HermitianOperator>(family.at(lambda0 + dl));
    q.propagator = Matrix::Identity(h0->dim(), h0->dim());
    q.beta = t;
    row.exact = beta * (tpm_distribution(q).mean() - free_energy_difference(*h0, *q.final, t));
    row.estimate = -dl * dl * beta * out.second_derivative / 2.0;
    out.rows.push_back(row);
    const double res = std::abs(row.exact - row.estimate);
    if (dl != 0.0 && res > 0.0) {
      xs.push_back(std::log(std::abs(dl)));
      ys.push_back(std::log(res));
    }
  }
  out.fitted_order = xs.size() >= 2 ? fit_line(xs, ys).slope
                                    : std::numeric_limits<double>::quiet_NaN();
  return out;
}

}  // namespace quenchlab
