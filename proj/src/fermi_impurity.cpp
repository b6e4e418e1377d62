#include "quenchlab/fermi_impurity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "quenchlab/error.hpp"
#include "quenchlab/numerics.hpp"
#include "quenchlab/quench_ground.hpp"

namespace quenchlab::impurity {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kFockCap = 8;

// Secular function 1 - v sum_n w_n^2 / (d_n + t), d_n = eps_p - eps_n.
double secular(const RealVector& d, const RealVector& w2, double v, double t) {
  double s = 0.0;
  for (Eigen::Index n = 0; n < d.size(); ++n) s += w2(n) / (d(n) + t);
  return 1.0 - v * s;
}

// Root between the pole (t = 0, where the secular function tends to -inf for
// either sign of v) and `far`. Monotone there, so plain bisection is safe.
double secular_root(const RealVector& d, const RealVector& w2, double v, double far) {
  double lo = 0.0, hi = far, flo = -1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double fm = secular(d, w2, v, mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double fermi(double e, double mu, double beta) {
  const double x = beta * (e - mu);
  if (x > 700) return 0.0;
  if (x < -700) return 1.0;
  return 1.0 / (1.0 + std::exp(x));
}

void require_single_channel(const ImpurityModel& model) {
  if (model.channels != 1) throw Error(ErrorKind::InvalidArgument, "Fock-space routes are single-channel");
  if (model.n_levels() > kFockCap) {
    throw Error(ErrorKind::DimensionCap, "Fock-space oracle limited to 8 levels");
  }
}

// Occupations of h0 at the model's chemical potential.
std::vector<double> occupations(const ImpurityModel& model, InverseTemperature beta) {
  std::vector<double> f(static_cast<std::size_t>(model.n_levels()));
  for (int a = 0; a < model.n_levels(); ++a) {
    f[a] = beta.is_ground_state() ? (a < model.n_particles ? 1.0 : 0.0)
                                  : fermi(model.levels(a), model.fermi_energy, beta.value());
  }
  return f;
}

// e^{i h0 t} e^{-i h t} restricted to rows/cols [0, rows) x all columns of V.
Matrix evolution_block(const ImpurityModel& model, double t, int rows) {
  const auto& V = model.perturbed_orbitals;
  const Eigen::Index M = V.rows();
  Eigen::VectorXcd ph(M);
  for (Eigen::Index j = 0; j < M; ++j) ph(j) = std::polar(1.0, -model.perturbed_levels(j) * t);
  const Matrix top = V.topRows(rows).cast<cplx>();
  Matrix b = (top * ph.asDiagonal()) * top.transpose();
  for (int a = 0; a < rows; ++a) b.row(a) *= std::polar(1.0, model.levels(a) * t);
  return b;
}

void finish_model(ImpurityModel& m) {
  const int M = m.n_levels();
  const int N = m.n_particles;
  const auto& e = m.levels;
  if (N < M) {
    m.fermi_energy = 0.5 * (e(N - 1) + e(N));
  } else {
    m.fermi_energy = M > 1 ? e(M - 1) + 0.5 * (e(M - 1) - e(M - 2)) : e(0) + 0.5;
  }
  if (m.potential == 0.0) {
    m.perturbed_levels = e;
    m.perturbed_orbitals = Eigen::MatrixXd::Identity(M, M);
    return;
  }
  solve_rank_one(e, m.coupling_vector, m.potential, m.perturbed_levels, m.perturbed_orbitals);
  if (M < 2) return;

  // On-shell T-matrix: tan delta = -pi rho_F w_F^2 v / (1 - v Re G(E_F)).
  const int hi = std::min(N, M - 1), lo = hi - 1;
  const double spacing = e(hi) - e(lo);
  const double w2 = 0.5 * (m.coupling_vector(lo) * m.coupling_vector(lo) +
                           m.coupling_vector(hi) * m.coupling_vector(hi));
  double re_g = 0.0;
  for (int n = 0; n < M; ++n) {
    re_g += m.coupling_vector(n) * m.coupling_vector(n) / (m.fermi_energy - e(n));
  }
  const double v_eff = m.potential / (1.0 - m.potential * re_g);
  m.phase_shift = std::atan(-kPi * w2 / spacing * v_eff);

  // Eigenphase: the last occupied level moves by -delta/pi of the local spacing.
  const int j = N - 1;
  double gap;
  if (m.potential > 0) {
    gap = j + 1 < M ? e(j + 1) - e(j) : e(j) - e(j - 1);
  } else {
    gap = j > 0 ? e(j) - e(j - 1) : e(1) - e(0);
  }
  m.phase_shift_eigen = -kPi * (m.perturbed_levels(j) - e(j)) / gap;
}

}  // namespace

Eigen::MatrixXd ImpurityModel::h0() const {
  return levels.asDiagonal();
}

Eigen::MatrixXd ImpurityModel::h() const {
  Eigen::MatrixXd out = h0();
  out += potential * coupling_vector * coupling_vector.transpose();
  return out;
}

double ImpurityModel::threshold() const {
  double s = 0.0;
  for (int a = 0; a < n_particles; ++a) s += perturbed_levels(a) - levels(a);
  return channels * s;
}

void solve_rank_one(const RealVector& levels, const RealVector& w, double v, RealVector& values,
                    Eigen::MatrixXd& vectors) {
  const Eigen::Index M = levels.size();
  values.resize(M);
  vectors.resize(M, M);
  bool simple = true;
  for (Eigen::Index n = 0; n < M; ++n) {
    if (std::abs(w(n)) < 1e-14) simple = false;
    if (n > 0 && !(levels(n) > levels(n - 1))) simple = false;
  }
  if (!simple || v == 0.0) {
    Eigen::MatrixXd h = levels.asDiagonal();
    h += v * w * w.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::DecompositionFailure, "rank-one dense solve failed");
    values = es.eigenvalues();
    vectors = es.eigenvectors();
  } else {
    const RealVector w2 = w.cwiseProduct(w);
    RealVector d(M);
    for (Eigen::Index j = 0; j < M; ++j) {
      // Pole p = j. For v > 0 the root lies above it, for v < 0 below.
      for (Eigen::Index n = 0; n < M; ++n) d(n) = levels(j) - levels(n);
      double lo, hi;
      if (v > 0) {
        lo = 0.0;
        hi = j + 1 < M ? levels(j + 1) - levels(j) : v * w2.sum();
      } else {
        hi = 0.0;
        lo = j > 0 ? levels(j - 1) - levels(j) : v * w2.sum();
      }
      const double t = secular_root(d, w2, v, v > 0 ? hi : lo);
      values(j) = levels(j) + t;
      double norm = 0.0;
      for (Eigen::Index n = 0; n < M; ++n) {
        const double c = w(n) / (d(n) + t);
        vectors(n, j) = c;
        norm += c * c;
      }
      vectors.col(j) /= std::sqrt(norm);
    }
  }
  // Sign: largest component positive, first index on ties.
  for (Eigen::Index j = 0; j < M; ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index n = 0; n < M; ++n) {
      if (std::abs(vectors(n, j)) > best + 1e-12) {
        best = std::abs(vectors(n, j));
        arg = n;
      }
    }
    if (vectors(arg, j) < 0) vectors.col(j) *= -1.0;
  }
}

ImpurityModel build_impurity_model(RealVector levels, RealVector coupling, int n_particles,
                                   double potential, int channels) {
  const int M = static_cast<int>(levels.size());
  if (M < 1 || n_particles < 1 || n_particles > M) {
    throw Error(ErrorKind::InvalidArgument, "need M >= N >= 1");
  }
  if (coupling.size() != levels.size() || coupling.norm() == 0.0) {
    throw Error(ErrorKind::InvalidArgument, "coupling vector must match the levels and be nonzero");
  }
  if (channels < 1) throw Error(ErrorKind::InvalidArgument, "channels must be positive");
  for (int n = 1; n < M; ++n) {
    if (levels(n) < levels(n - 1)) throw Error(ErrorKind::InvalidArgument, "levels must ascend");
  }
  ImpurityModel m;
  m.levels = std::move(levels);
  m.coupling_vector = coupling / coupling.norm();
  m.n_particles = n_particles;
  m.potential = potential;
  m.channels = channels;
  finish_model(m);
  return m;
}

ImpurityModel build_impurity_model(int n_levels, int n_particles, Dispersion dispersion,
                                   double potential, double bandwidth, int channels) {
  if (n_levels < 1 || !(bandwidth > 0)) throw Error(ErrorKind::InvalidArgument, "bad level count or bandwidth");
  RealVector e(n_levels);
  for (int n = 0; n < n_levels; ++n) {
    if (dispersion == Dispersion::Linear) {
      e(n) = (n - 0.5 * (n_levels - 1)) * bandwidth / n_levels;
    } else {
      const double k = static_cast<double>(n + 1) / n_levels;
      e(n) = bandwidth * k * k;
    }
  }
  return build_impurity_model(std::move(e), RealVector::Ones(n_levels), n_particles, potential, channels);
}

double anderson_overlap(const ImpurityModel& model) {
  const int N = model.n_particles;
  const Eigen::MatrixXd a = model.perturbed_orbitals.topLeftCorner(N, N);
  const double f = std::abs(Eigen::PartialPivLU<Eigen::MatrixXd>(a).determinant());
  return std::pow(f, model.channels);
}

PersistenceSeries persistence_determinant(const ImpurityModel& model,
                                          std::span<const double> t_grid,
                                          InverseTemperature beta) {
  PersistenceSeries s;
  s.t_grid.assign(t_grid.begin(), t_grid.end());
  s.threshold = model.threshold();
  s.nu.resize(t_grid.size());
  const int M = model.n_levels();
  const auto f = occupations(model, beta);
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double t = t_grid[k];
    cplx det;
    if (model.potential == 0.0 || t == 0.0) {
      det = 1.0;
    } else if (beta.is_ground_state()) {
      det = Eigen::PartialPivLU<Matrix>(evolution_block(model, t, model.n_particles)).determinant();
    } else {
      Matrix a = evolution_block(model, t, M);
      for (int r = 0; r < M; ++r) {
        a.row(r) *= f[r];
        a(r, r) += 1.0 - f[r];
      }
      det = Eigen::PartialPivLU<Matrix>(a).determinant();
    }
    s.nu[k] = std::pow(det, model.channels);
  }
  s.lambda2 = linked_cluster_lambda2(model, t_grid, beta);

  // Logarithmic regime: past the bandwidth time, well before the recurrence.
  const int M1 = model.n_levels() - 1;
  const int hi = std::min(model.n_particles, M1);
  if (model.potential != 0.0 && M1 > 0) {
    const double t_lo = 5.0 / (model.levels(M1) - model.levels(0));
    const double t_hi = 0.25 / (model.levels(hi) - model.levels(hi - 1));
    std::vector<double> x, y;
    for (std::size_t k = 0; k < t_grid.size(); ++k) {
      if (t_grid[k] < t_lo || t_grid[k] > t_hi || t_grid[k] <= 0) continue;
      x.push_back(std::log(t_grid[k]));
      y.push_back(-std::log(std::abs(s.nu[k])));
    }
    if (x.size() >= 3) {
      const auto fit = fit_log_coupling(t_grid, s.lambda2, t_lo, t_hi);
      s.coupling_g = fit.g;
      s.tau0 = fit.tau0;
      s.fitted_alpha = fit_line(x, y).slope;
    }
  }
  return s;
}

Matrix fock_hamiltonian(const Eigen::MatrixXd& h, int particles) {
  const int M = static_cast<int>(h.rows());
  if (M > kFockCap) throw Error(ErrorKind::DimensionCap, "Fock space limited to 8 orbitals");
  std::vector<unsigned> states;
  for (unsigned s = 0; s < (1u << M); ++s) {
    if (particles < 0 || std::popcount(s) == particles) states.push_back(s);
  }
  std::vector<int> index(1u << M, -1);
  for (std::size_t i = 0; i < states.size(); ++i) index[states[i]] = static_cast<int>(i);
  const auto dim = static_cast<Eigen::Index>(states.size());
  Matrix out = Matrix::Zero(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const unsigned s = states[i];
    for (int b = 0; b < M; ++b) {
      if (!(s >> b & 1u)) continue;
      const unsigned s1 = s ^ (1u << b);
      const int sign_b = std::popcount(s & ((1u << b) - 1)) % 2 ? -1 : 1;
      for (int a = 0; a < M; ++a) {
        if (s1 >> a & 1u) continue;
        const unsigned s2 = s1 | (1u << a);
        const int sign_a = std::popcount(s1 & ((1u << a) - 1)) % 2 ? -1 : 1;
        out(index[s2], i) += static_cast<double>(sign_a * sign_b) * h(a, b);
      }
    }
  }
  return out;
}

namespace {

// Many-body pair for the quench; at finite beta the chemical potential is
// folded in so the grand-canonical Gibbs state is the initial state.
std::pair<HermitianOperator, HermitianOperator> fock_pair(const ImpurityModel& model,
                                                          InverseTemperature beta) {
  require_single_channel(model);
  const int M = model.n_levels();
  if (beta.is_ground_state()) {
    return {eigendecompose(fock_hamiltonian(model.h0(), model.n_particles)),
            eigendecompose(fock_hamiltonian(model.h(), model.n_particles))};
  }
  const Eigen::MatrixXd shift = model.fermi_energy * Eigen::MatrixXd::Identity(M, M);
  return {eigendecompose(fock_hamiltonian(model.h0() - shift, -1)),
          eigendecompose(fock_hamiltonian(model.h() - shift, -1))};
}

}  // namespace

std::vector<cplx> persistence_ed(const ImpurityModel& model, std::span<const double> t_grid,
                                 InverseTemperature beta) {
  const auto [h0, h] = fock_pair(model, beta);
  std::vector<cplx> g;
  if (beta.is_ground_state()) {
    g = vacuum_persistence(h0, h, t_grid).amplitude;
  } else {
    g = characteristic_function_trace(QuenchSpec::sudden(h0, h, beta), t_grid);
  }
  for (auto& z : g) z = std::conj(z);
  return g;
}

WorkDistribution impurity_work_distribution(const ImpurityModel& model, InverseTemperature beta) {
  const auto [h0, h] = fock_pair(model, beta);
  return tpm_distribution(QuenchSpec::sudden(h0, h, beta));
}

std::vector<cplx> linked_cluster_lambda2(const ImpurityModel& model,
                                         std::span<const double> t_grid, InverseTemperature beta) {
  std::vector<cplx> out(t_grid.size(), cplx{0.0, 0.0});
  if (model.potential == 0.0) return out;
  const int M = model.n_levels();
  const auto f = occupations(model, beta);
  const double v2 = model.potential * model.potential;

  // Weight per transition energy, coalesced.
  std::vector<std::pair<double, double>> terms;
  for (int a = 0; a < M; ++a) {
    if (f[a] == 0.0) continue;
    for (int b = 0; b < M; ++b) {
      const double occ = f[a] * (1.0 - f[b]);
      if (occ == 0.0) continue;
      const double wa = model.coupling_vector(a), wb = model.coupling_vector(b);
      terms.emplace_back(model.levels(b) - model.levels(a), v2 * wa * wa * wb * wb * occ);
    }
  }
  std::sort(terms.begin(), terms.end());
  double scale = 0.0;
  for (const auto& [w, _] : terms) scale = std::max(scale, std::abs(w));
  std::vector<std::pair<double, double>> merged;
  for (const auto& term : terms) {
    if (!merged.empty() && term.first - merged.back().first <= 1e-12 * scale) {
      merged.back().second += term.second;
    } else {
      merged.push_back(term);
    }
  }

  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    const double t = t_grid[k];
    cplx sum = 0.0;
    for (const auto& [w, weight] : merged) {
      const double x = w * t;
      cplx kernel;
      if (std::abs(x) < 1e-2) {
        const cplx ix{0.0, x};
        kernel = t * t * (0.5 + ix / 6.0 + ix * ix / 24.0 + ix * ix * ix / 120.0);
      } else {
        kernel = (1.0 - std::polar(1.0, -x) - cplx{0.0, x}) / (w * w);
      }
      sum += weight * kernel;
    }
    out[k] = -static_cast<double>(model.channels) * sum;
  }
  return out;
}

LogFit fit_log_coupling(std::span<const double> t_grid, std::span<const cplx> lambda2, double t_lo,
                        double t_hi) {
  std::vector<double> x, y;
  for (std::size_t k = 0; k < t_grid.size(); ++k) {
    if (t_grid[k] < t_lo || t_grid[k] > t_hi || t_grid[k] <= 0) continue;
    x.push_back(std::log(t_grid[k]));
    y.push_back(-lambda2[k].real());
  }
  if (x.size() < 3) throw Error(ErrorKind::FitWindowTooNarrow, "fewer than 3 points in the log window");
  const auto fit = fit_line(x, y);
  LogFit out;
  out.g = fit.slope;
  out.tau0 = fit.slope != 0.0 ? std::exp(-fit.intercept / fit.slope) : 0.0;
  out.residual = fit.rms_residual;
  return out;
}

std::vector<double> default_time_grid(double eta, double max_energy) {
  if (!(eta > 0) || !(max_energy > 0)) throw Error(ErrorKind::InvalidArgument, "eta and energy must be positive");
  const double t_max = std::sqrt(2.0 * std::log(1e7)) / eta;
  const double dt = kPi / (2.0 * max_energy);
  const auto n = static_cast<std::size_t>(std::ceil(t_max / dt)) + 1;
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

AbsorptionSpectrum absorption_spectrum(const PersistenceSeries& series,
                                       std::span<const double> detuning_grid,
                                       const AbsorptionOptions& options) {
  const auto& t = series.t_grid;
  const std::size_t n = t.size();
  if (n < 2 || t[0] != 0.0 || series.nu.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "time grid must be uniform, start at zero, and match nu");
  }
  const double dt = t[1] - t[0];
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(t[k] - k * dt) > 1e-9 * t.back()) throw Error(ErrorKind::InvalidArgument, "time grid must be uniform");
  }
  auto window = [&](double x) { return std::exp(-0.5 * options.eta * options.eta * x * x); };
  if (std::abs(series.nu.back()) * window(t.back()) >= 1e-6) {
    throw Error(ErrorKind::WindowTooShort, "amplitude not decayed at the end of the time grid");
  }
  std::vector<cplx> weighted(n);
  for (std::size_t k = 0; k < n; ++k) weighted[k] = series.nu[k] * window(t[k]) * (k == 0 ? 0.5 : 1.0);

  AbsorptionSpectrum out;
  out.detuning_grid.assign(detuning_grid.begin(), detuning_grid.end());
  out.time_cutoff = t.back();
  out.eta = options.eta;
  out.a_values.reserve(detuning_grid.size());
  for (double d : detuning_grid) {
    const double omega = d + series.threshold;
    std::vector<cplx> terms(n);
    for (std::size_t k = 0; k < n; ++k) terms[k] = weighted[k] * std::polar(1.0, omega * t[k]);
    out.a_values.push_back(2.0 * dt * pairwise_sum(terms).real());
  }
  double integral = 0.0;
  for (std::size_t j = 1; j < detuning_grid.size(); ++j) {
    integral += 0.5 * (out.a_values[j] + out.a_values[j - 1]) * (detuning_grid[j] - detuning_grid[j - 1]);
  }
  out.sum_rule = integral / (2.0 * kPi);

  if (options.fit_hi > options.fit_lo) {
    std::vector<double> x, y;
    for (std::size_t j = 0; j < detuning_grid.size(); ++j) {
      const double d = detuning_grid[j];
      if (d < options.fit_lo || d > options.fit_hi || d <= 0 || out.a_values[j] <= 0) continue;
      x.push_back(d);
      y.push_back(out.a_values[j]);
    }
    if (x.size() < 3) throw Error(ErrorKind::FitWindowTooNarrow, "fewer than 3 points in the edge window");
    const auto fit = fit_power_law(x, y);
    out.edge_exponent = fit.slope;
    out.edge_residual = fit.rms_residual;
  }
  return out;
}

AdiabaticScan adiabatic_probability_scan(const std::vector<ImpurityModel>& models) {
  AdiabaticScan scan;
  std::vector<double> n, p;
  for (const auto& m : models) {
    const double f = anderson_overlap(m);
    scan.rows.push_back({m.n_particles, f * f});
    n.push_back(m.n_particles);
    p.push_back(f * f);
  }
  if (models.size() >= 2) {
    bool trivial = std::all_of(p.begin(), p.end(), [](double x) { return x == 1.0; });
    scan.fitted_exponent = trivial ? 0.0 : fit_power_law(n, p).slope;
  }
  return scan;
}

double third_cumulant(const ImpurityModel& model) {
  const int N = model.n_particles;
  const Eigen::MatrixXd h = model.h();
  // rho h keeps the occupied rows of h.
  Eigen::MatrixXd rh = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  rh.topRows(N) = h.topRows(N);
  const Eigen::MatrixXd h2 = h * h;
  const double t1 = (rh * h2).trace();
  Eigen::MatrixXd rh2 = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  rh2.topRows(N) = h2.topRows(N);
  const double t2 = (rh * rh2).trace();
  const double t3 = (rh * rh * rh).trace();
  return model.channels * (t1 - 3.0 * t2 + 2.0 * t3);
}

}  // namespace quenchlab::impurity
