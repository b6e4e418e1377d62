#include <cmath>
#include <numbers>

#include "doctest.h"
#include "quenchlab/error.hpp"
#include "quenchlab/ising_chain.hpp"
#include "quenchlab/random.hpp"

using namespace quenchlab;
namespace is = quenchlab::ising;

TEST_CASE("modes: null quench and large-field limit") {
  const auto m = is::build_modes(10, 0.7, 0.7);
  for (double d : m.angle_diffs) CHECK(d == 0.0);
  CHECK(m.ground_shift == 0.0);
  const auto big = is::build_modes(8, 1e7, 1e7);
  for (double e : big.post_energies) CHECK(e / 2e7 == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(is::build_modes(7, 1, 2), Error);
  CHECK_THROWS_AS(is::build_modes(2, 1, 2), Error);
}

TEST_CASE("modes: angle differences are odd in k") {
  // Delta_{-k} = -Delta_k follows from sin(-k) = -sin k in the angle
  const double k = 0.7;
  const double d = 0.5 * (is::bogoliubov_angle(1.3, k) - is::bogoliubov_angle(0.4, k));
  const double dm = 0.5 * (is::bogoliubov_angle(1.3, -k) - is::bogoliubov_angle(0.4, -k));
  CHECK(dm == doctest::Approx(-d));
}

TEST_CASE("sector Hamiltonian is symmetric and matches full-space spectrum") {
  for (int L : {2, 4, 6, 8}) {
    const Eigen::MatrixXd hs = is::symmetric_sector_hamiltonian(L, 0.8);
    CHECK((hs - hs.transpose()).norm() < 1e-13);
    const auto full = eigendecompose(is::spin_hamiltonian(L, 0.8));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hs);
    // every sector level appears in the full spectrum
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const double e = es.eigenvalues()(i);
      double best = 1e9;
      for (Eigen::Index j = 0; j < full.dim(); ++j) best = std::min(best, std::abs(full.eigenvalues()(j) - e));
      CHECK(best < 1e-10);
    }
    CHECK(es.eigenvalues()(0) == doctest::Approx(full.ground_energy()).epsilon(1e-12));
  }
}

TEST_CASE("ED oracle: L=2 closed form") {
  // even sector {|00>, |11>}: [[-2l, -2], [-2, 2l]], eigenvalues -/+ 2 sqrt(l^2 + 1)
  const double l0 = 0.6, lf = 1.7;
  const auto vec = [](double l) {
    const double e = 2.0 * std::sqrt(l * l + 1.0);
    const Eigen::Vector2d v(2.0, e - 2.0 * l);  // ground state, energy -e
    return Eigen::Vector2d(v / v.norm());
  };
  const auto v0 = vec(l0), vf = vec(lf);
  const double e0 = -2.0 * std::sqrt(l0 * l0 + 1), ef = -2.0 * std::sqrt(lf * lf + 1);
  const double w = std::pow(v0.dot(vf), 2);
  const auto u = linspace(0, 5, 31);
  const auto full = is::ed_oracle_g(2, l0, lf, u, is::EdBasis::Full);
  const auto sec = is::ed_oracle_g(2, l0, lf, u, is::EdBasis::SymmetricSector);
  for (std::size_t j = 0; j < u.size(); ++j) {
    const cplx expect = w * std::polar(1.0, (ef - e0) * u[j]) +
                        (1 - w) * std::polar(1.0, (-ef - e0) * u[j]);
    CHECK(std::abs(full[j] - expect) < 1e-12);
    CHECK(std::abs(sec[j] - expect) < 1e-12);
  }
}

TEST_CASE("ED oracle: null quench and normalization") {
  const auto u = linspace(0, 20, 41);
  const auto g = is::ed_oracle_g(8, 0.9, 0.9, u);
  for (const auto& z : g) CHECK(std::abs(z - 1.0) < 1e-12);
  const std::vector<double> zero{0.0};
  CHECK(std::abs(is::ed_oracle_g(10, 1.2, 0.9, zero)[0] - 1.0) < 1e-12);
  CHECK_THROWS_AS(is::ed_oracle_g(14, 1.2, 0.9, zero), Error);
}

TEST_CASE("free fermion vs ED: L=8, 0.5 -> 2.0, 512 points") {
  const auto u = linspace(0, 20, 512);
  const auto m = is::build_modes(8, 0.5, 2.0);
  const auto gf = is::g_exact(m, u);
  const auto ge = is::ed_oracle_g(8, 0.5, 2.0, u, is::EdBasis::Full);
  double err = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) err = std::max(err, std::abs(gf[j] - ge[j]));
  CHECK(err < 1e-8);
  CHECK(std::abs(gf[0] - 1.0) < 1e-14);
}

TEST_CASE("free fermion vs ED: random pairs, both ED bases") {
  RandomSource rng(404);
  const auto u = linspace(0, 15, 128);
  for (int L : {4, 6, 8}) {
    for (int t = 0; t < 3; ++t) {
      const double l0 = rng.uniform(0.4, 2.5), lf = rng.uniform(0.4, 2.5);
      const auto gf = is::g_exact(is::build_modes(L, l0, lf), u);
      const auto gs = is::ed_oracle_g(L, l0, lf, u, is::EdBasis::SymmetricSector);
      const auto gd = is::ed_oracle_g(L, l0, lf, u, is::EdBasis::Full);
      double e1 = 0, e2 = 0;
      for (std::size_t j = 0; j < u.size(); ++j) {
        e1 = std::max(e1, std::abs(gf[j] - gs[j]));
        e2 = std::max(e2, std::abs(gs[j] - gd[j]));
        CHECK(std::abs(gf[j]) <= 1.0 + 1e-12);
      }
      CHECK(e1 < 1e-8);
      CHECK(e2 < 1e-8);
    }
  }
}

TEST_CASE("ground energies and fidelity against ED") {
  for (int L : {4, 8, 12}) {
    const auto m = is::build_modes(L, 0.5, 1.5);
    const auto ed = is::ed_ground_data(L, 0.5, 1.5);
    CHECK(std::abs(is::ground_energy(L, 0.5) - ed.energy0) < 1e-9);
    CHECK(std::abs(is::ground_energy(L, 1.5) - ed.energy_f) < 1e-9);
    CHECK(std::abs(m.fidelity_squared() - ed.fidelity_squared) < 1e-10);
  }
}

TEST_CASE("adiabatic atom of the spin-space TPM distribution is the mode product") {
  const auto h0 = eigendecompose(is::spin_hamiltonian(8, 0.5));
  const auto hf = eigendecompose(is::spin_hamiltonian(8, 1.5));
  const double f = ground_fidelity(h0, hf);
  CHECK(std::abs(f * f - is::build_modes(8, 0.5, 1.5).fidelity_squared()) < 1e-10);
}

TEST_CASE("work density: null quench and normalization") {
  const auto null = is::build_modes(20, 1.4, 1.4);
  const auto w = linspace(0, 20, 201);
  const auto d0 = is::work_density(null, 0.2, w);
  CHECK(d0.delta_weight == doctest::Approx(1.0));
  for (double v : d0.density) CHECK(std::abs(v) < 1e-12);

  const auto m = is::build_modes(40, 1.5, 0.8);
  const double eta = is::default_broadening(m);
  const auto grid = linspace(-8.0 * eta, m.total_pair_energy() + 8.0 * eta, 8001);
  const auto d = is::work_density(m, eta, grid);
  std::vector<double> integrand(d.density);
  double mass = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) mass += 0.5 * (integrand[i] + integrand[i - 1]) * (grid[i] - grid[i - 1]);
  CHECK(std::abs(mass + d.delta_weight - 1.0) < 1e-6);
  for (double v : d.density) CHECK(v > -1e-9);
  CHECK(d.delta_weight == doctest::Approx(m.fidelity_squared()).epsilon(1e-14));
}

TEST_CASE("work density: aliasing guard") {
  const auto m = is::build_modes(20, 1.5, 1.2);
  const auto w = linspace(0, 10, 11);
  is::DensityOptions o;
  o.u_max = 1.0;
  CHECK_THROWS_AS(is::work_density(m, 0.05, w, o), Error);
  is::DensityOptions o2;
  o2.du = 1.0;
  CHECK_THROWS_AS(is::work_density(m, 0.05, w, o2), Error);
}

TEST_CASE("film partition: surface term equals -ln F / N") {
  const auto m = is::build_modes(8, 0.5, 0.8);
  const auto film = is::film_partition_function(m, is::film_grid(m));
  CHECK(std::abs(std::exp(-2.0 * m.n_cells() * film.surface) - m.fidelity_squared()) < 1e-8);
  // against ED fidelity
  const auto ed = is::ed_ground_data(8, 0.5, 0.8);
  CHECK(std::abs(std::exp(-2.0 * 8 * film.surface) - ed.fidelity_squared) < 1e-8);
  CHECK(std::abs(film.casimir.back()) < 1e-10);
  // Z(R) in (0, 1] and nonincreasing
  for (std::size_t i = 0; i < film.z_samples.size(); ++i) {
    CHECK(film.z_samples[i] <= 1.0);
    if (i) CHECK(film.z_samples[i] <= film.z_samples[i - 1]);
  }
}

TEST_CASE("susceptibility: positive away from criticality, routes agree") {
  const std::vector<double> lf{1.3, 1.35, 1.4, 1.45, 1.5};
  const std::vector<int> orders{1, 2, 3, 4};
  const auto rep = is::susceptibility_scan(200, 1.3, lf, orders, true);
  CHECK(rep.chi[1][0] > 0.0);
  CHECK(std::abs(rep.chi[0][0]) < 1e-8);  // stationarity at coincidence
  CHECK(rep.max_route_discrepancy < 1e-4);
  CHECK(rep.expected_exponent == -1.0);
  CHECK(rep.alpha_s == 1.0);
  const std::vector<double> few{1.1, 1.2};
  CHECK_THROWS_AS(is::susceptibility_scan(200, 0.5, few), Error);
}
