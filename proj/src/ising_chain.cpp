#include "quenchlab/ising_chain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "quenchlab/error.hpp"

namespace quenchlab::ising {

double mode_energy(double lambda, double k) {
  return 2.0 * std::sqrt(lambda * lambda - 2.0 * lambda * std::cos(k) + 1.0);
}

double bogoliubov_angle(double lambda, double k) {
  return std::atan2(std::sin(k), lambda - std::cos(k));
}

namespace {

std::vector<double> momenta_for(int length) {
  std::vector<double> k(static_cast<std::size_t>(length / 2));
  for (int j = 1; j <= length / 2; ++j) k[j - 1] = (2.0 * j - 1.0) * std::numbers::pi / length;
  return k;
}

void check_length(int length) {
  if (length % 2 != 0 || length < 4 || length > 1000000) {
    throw Error(ErrorKind::InvalidArgument, "chain length must be even and in [4, 1e6]");
  }
}

}  // namespace

double ground_energy(int length, double lambda) {
  check_length(length);
  std::vector<double> e;
  for (const double k : momenta_for(length)) e.push_back(-mode_energy(lambda, k));
  return pairwise_sum(e);
}

ModeSet build_modes(int length, double lambda0, double lambda_f) {
  check_length(length);
  ModeSet m;
  m.length = length;
  m.lambda0 = lambda0;
  m.lambda_f = lambda_f;
  m.momenta = momenta_for(length);
  const std::size_t n = m.momenta.size();
  m.pre_energies.resize(n);
  m.post_energies.resize(n);
  m.angle_diffs.resize(n);
  std::vector<double> shift(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = m.momenta[i];
    m.pre_energies[i] = mode_energy(lambda0, k);
    m.post_energies[i] = mode_energy(lambda_f, k);
    m.angle_diffs[i] = 0.5 * (bogoliubov_angle(lambda_f, k) - bogoliubov_angle(lambda0, k));
    shift[i] = m.pre_energies[i] - m.post_energies[i];
  }
  m.ground_shift = pairwise_sum(shift);
  return m;
}

double ModeSet::mass() const {
  return *std::min_element(post_energies.begin(), post_energies.end());
}

double ModeSet::log_fidelity() const {
  std::vector<double> t(angle_diffs.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::log(std::abs(std::cos(angle_diffs[i])));
  return pairwise_sum(t);
}

double ModeSet::fidelity_squared() const { return std::exp(2.0 * log_fidelity()); }

double ModeSet::mean_irreversible_work() const {
  std::vector<double> t(angle_diffs.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double s = std::sin(angle_diffs[i]);
    t[i] = 2.0 * post_energies[i] * s * s;
  }
  return pairwise_sum(t);
}

double ModeSet::max_pair_energy() const {
  return 2.0 * *std::max_element(post_energies.begin(), post_energies.end());
}

double ModeSet::total_pair_energy() const {
  std::vector<double> t(post_energies.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = 2.0 * post_energies[i];
  return pairwise_sum(t);
}

std::vector<cplx> g_irreversible(const ModeSet& modes, std::span<const double> u_grid) {
  const std::size_t n = modes.angle_diffs.size();
  std::vector<double> c2(n), s2(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(modes.angle_diffs[i]), s = std::sin(modes.angle_diffs[i]);
    c2[i] = c * c;
    s2[i] = s * s;
  }
  std::vector<cplx> out(u_grid.size()), logs(n);
  for (std::size_t j = 0; j < u_grid.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      logs[i] = std::log(c2[i] + s2[i] * std::polar(1.0, 2.0 * modes.post_energies[i] * u_grid[j]));
    }
    out[j] = std::exp(pairwise_sum(logs));
  }
  return out;
}

std::vector<cplx> g_exact(const ModeSet& modes, std::span<const double> u_grid) {
  auto g = g_irreversible(modes, u_grid);
  for (std::size_t j = 0; j < g.size(); ++j) g[j] *= std::polar(1.0, modes.ground_shift * u_grid[j]);
  return g;
}

Matrix spin_hamiltonian(int length, double lambda) {
  if (length < 2 || length > 12) {
    throw Error(ErrorKind::DimensionCap, "spin-basis Hamiltonian supports 2 <= L <= 12");
  }
  const std::size_t dim = std::size_t{1} << length;
  Matrix h = Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t s = 0; s < dim; ++s) {
    const int down = std::popcount(s);
    h(s, s) = -lambda * (length - 2.0 * down);
    for (int j = 0; j < length; ++j) {
      const std::size_t flipped = s ^ (std::size_t{1} << j) ^ (std::size_t{1} << ((j + 1) % length));
      h(flipped, s) += -1.0;
    }
  }
  return h;
}

namespace {

struct Sector {
  std::vector<std::uint32_t> reps;
  std::vector<int> orbit;           // orbit size per representative
  std::vector<int> index_of_state;  // representative index for every state of even parity, -1 otherwise
};

std::uint32_t rotate(std::uint32_t s, int length) {
  const std::uint32_t mask = (1u << length) - 1u;
  return ((s << 1) | (s >> (length - 1))) & mask;
}

Sector build_sector(int length) {
  const std::uint32_t dim = 1u << length;
  Sector sec;
  sec.index_of_state.assign(dim, -1);
  for (std::uint32_t s = 0; s < dim; ++s) {
    if (std::popcount(s) % 2 != 0 || sec.index_of_state[s] >= 0) continue;
    // s is the smallest member of its orbit, since orbits are visited in order
    const int idx = static_cast<int>(sec.reps.size());
    std::uint32_t t = s;
    int size = 0;
    do {
      sec.index_of_state[t] = idx;
      t = rotate(t, length);
      ++size;
    } while (t != s);
    sec.reps.push_back(s);
    sec.orbit.push_back(size);
  }
  return sec;
}

}  // namespace

Eigen::MatrixXd symmetric_sector_hamiltonian(int length, double lambda) {
  if (length < 2 || length > 12) {
    throw Error(ErrorKind::DimensionCap, "sector Hamiltonian supports 2 <= L <= 12");
  }
  const Sector sec = build_sector(length);
  const auto n = static_cast<Eigen::Index>(sec.reps.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::uint32_t s = sec.reps[r];
    h(r, r) = -lambda * (length - 2.0 * std::popcount(s));
    for (int j = 0; j < length; ++j) {
      const std::uint32_t f = s ^ (1u << j) ^ (1u << ((j + 1) % length));
      const int rp = sec.index_of_state[f];
      h(rp, r) += -std::sqrt(static_cast<double>(sec.orbit[r]) / sec.orbit[rp]);
    }
  }
  return h;
}

namespace {

struct EdSpectrum {
  Eigen::VectorXd energies_f;
  Eigen::VectorXd weights;  // |<eps'_m|eps_0>|^2
  double energy0 = 0.0;
};

EdSpectrum ed_spectrum(int length, double lambda0, double lambda_f, EdBasis basis) {
  if (length < 2 || length > 12) {
    throw Error(ErrorKind::DimensionCap, "ED oracle supports 2 <= L <= 12");
  }
  EdSpectrum out;
  if (basis == EdBasis::Full) {
    const auto h0 = eigendecompose(spin_hamiltonian(length, lambda0));
    const auto hf = eigendecompose(spin_hamiltonian(length, lambda_f));
    if (h0.ground_gap() < 1e-12) {
      throw Error(ErrorKind::DegenerateGround, "initial spin ground state is degenerate");
    }
    out.energy0 = h0.ground_energy();
    out.energies_f = hf.eigenvalues();
    out.weights = (hf.eigenvectors().adjoint() * h0.eigenvectors().col(0)).cwiseAbs2();
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> s0(symmetric_sector_hamiltonian(length, lambda0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sf(symmetric_sector_hamiltonian(length, lambda_f));
  if (s0.info() != Eigen::Success || sf.info() != Eigen::Success) {
    throw Error(ErrorKind::DecompositionFailure, "sector diagonalization failed");
  }
  out.energy0 = s0.eigenvalues()(0);
  out.energies_f = sf.eigenvalues();
  out.weights = (sf.eigenvectors().transpose() * s0.eigenvectors().col(0)).cwiseAbs2();
  return out;
}

}  // namespace

std::vector<cplx> ed_oracle_g(int length, double lambda0, double lambda_f,
                              std::span<const double> u_grid, EdBasis basis) {
  const EdSpectrum sp = ed_spectrum(length, lambda0, lambda_f, basis);
  std::vector<cplx> out(u_grid.size()), terms(static_cast<std::size_t>(sp.weights.size()));
  for (std::size_t j = 0; j < u_grid.size(); ++j) {
    for (Eigen::Index m = 0; m < sp.weights.size(); ++m) {
      terms[m] = sp.weights(m) * std::polar(1.0, (sp.energies_f(m) - sp.energy0) * u_grid[j]);
    }
    out[j] = pairwise_sum(terms);
  }
  return out;
}

EdGround ed_ground_data(int length, double lambda0, double lambda_f, EdBasis basis) {
  const EdSpectrum sp = ed_spectrum(length, lambda0, lambda_f, basis);
  return {sp.energy0, sp.energies_f(0), sp.weights(0)};
}

double default_broadening(const ModeSet& modes) {
  std::vector<double> e = modes.post_energies;
  std::sort(e.begin(), e.end());
  double gap = 0.0;
  for (std::size_t i = 1; i < e.size(); ++i) gap = std::max(gap, 2.0 * (e[i] - e[i - 1]));
  return 2.0 * gap;
}

WorkDensity work_density(const ModeSet& modes, double eta, std::span<const double> w_grid,
                         const DensityOptions& options) {
  if (!(eta > 0.0)) throw Error(ErrorKind::InvalidArgument, "broadening must be positive");
  if (w_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty w grid");
  const auto [lo_it, hi_it] = std::minmax_element(w_grid.begin(), w_grid.end());
  const double w_lo = std::min(*lo_it, 0.0), w_hi = *hi_it;
  const double support = modes.total_pair_energy();
  // shortest period whose images of [0, support] stay clear of [w_lo, w_hi]
  const double period = std::max(support - w_lo, w_hi) + 10.0 * eta;
  const double du = options.du > 0.0 ? options.du : 2.0 * std::numbers::pi / period;
  if (2.0 * std::numbers::pi / du < period - 5.0 * eta) {
    throw Error(ErrorKind::AliasingDetected, "u step folds the work support onto the grid");
  }
  const double u_max =
      options.u_max > 0.0 ? options.u_max : std::sqrt(2.0 * std::log(1e10)) / eta;
  const auto n_u = static_cast<std::size_t>(std::ceil(u_max / du)) + 1;

  std::vector<double> u(n_u);
  for (std::size_t j = 0; j < n_u; ++j) u[j] = du * static_cast<double>(j);
  auto g = g_irreversible(modes, u);
  const double f2 = modes.fidelity_squared();
  for (std::size_t j = 0; j < n_u; ++j) {
    g[j] -= f2;
    g[j] *= std::exp(-0.5 * eta * eta * u[j] * u[j]);
  }
  if (std::abs(g.back()) > 1e-8) {
    throw Error(ErrorKind::AliasingDetected, "windowed signal has not decayed by u_max");
  }
  g.front() *= 0.5;  // trapezoid on the half line

  WorkDensity out;
  out.w_grid.assign(w_grid.begin(), w_grid.end());
  out.delta_weight = f2;
  out.broadening = eta;
  out.density.resize(w_grid.size());
  std::vector<double> terms(n_u);
  for (std::size_t i = 0; i < w_grid.size(); ++i) {
    for (std::size_t j = 0; j < n_u; ++j) {
      terms[j] = (g[j] * std::polar(1.0, -u[j] * w_grid[i])).real();
    }
    out.density[i] = pairwise_sum(terms) * du / std::numbers::pi;
  }
  return out;
}

std::vector<double> film_log_z(const ModeSet& modes, std::span<const double> r_grid) {
  const std::size_t n = modes.angle_diffs.size();
  std::vector<double> out(r_grid.size()), t(n);
  for (std::size_t j = 0; j < r_grid.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double c = std::cos(modes.angle_diffs[i]), s = std::sin(modes.angle_diffs[i]);
      t[i] = std::log(c * c + s * s * std::exp(-2.0 * modes.post_energies[i] * r_grid[j]));
    }
    out[j] = pairwise_sum(t);
  }
  return out;
}

std::vector<double> film_grid(const ModeSet& modes, std::size_t points) {
  const double r_max = 40.0 / (2.0 * modes.mass());
  return linspace(r_max / static_cast<double>(points), r_max, points);
}

FilmFreeEnergy film_partition_function(const ModeSet& modes, std::span<const double> r_grid) {
  return decompose_film({r_grid.begin(), r_grid.end()}, film_log_z(modes, r_grid),
                        modes.ground_shift, modes.n_cells(), modes.fidelity_squared());
}

SusceptibilitySource susceptibility_source(int length) {
  SusceptibilitySource src;
  src.n_cells = length;
  src.log_fidelity = [length](double l0, double lf) {
    return build_modes(length, l0, lf).log_fidelity();
  };
  src.surface = [length](double l0, double lf) {
    const auto m = build_modes(length, l0, lf);
    return film_partition_function(m, film_grid(m, 50)).surface;
  };
  return src;
}

SusceptibilityReport susceptibility_scan(int length, double lambda0,
                                         std::span<const double> lambda_f_grid,
                                         std::span<const int> orders, bool surface_route) {
  auto src = susceptibility_source(length);
  if (!surface_route) src.surface = nullptr;
  for (const double lf : lambda_f_grid) {
    if (lf == kLambdaCritical) {
      throw Error(ErrorKind::InvalidArgument, "lambda_f grid must avoid the critical point");
    }
  }
  const bool above = lambda_f_grid.front() > kLambdaCritical;
  for (const double lf : lambda_f_grid) {
    if ((lf > kLambdaCritical) != above) {
      throw Error(ErrorKind::InvalidArgument, "lambda_f grid must lie on one side of lambda_c");
    }
  }
  return fidelity_susceptibility(src, lambda0, lambda_f_grid, orders);
}

}  // namespace quenchlab::ising
