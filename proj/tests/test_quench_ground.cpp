#include <cmath>

#include "doctest.h"
#include "quenchlab/error.hpp"
#include "quenchlab/ising_chain.hpp"
#include "quenchlab/quench_ground.hpp"

using namespace quenchlab;

namespace {

HermitianOperator diag_pm() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = -1;
  m(1, 1) = 1;
  return eigendecompose(m);
}

HermitianOperator sx() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1;
  return eigendecompose(m);
}

}  // namespace

TEST_CASE("ground fidelity: 2x2 pair and identity") {
  CHECK(ground_fidelity(diag_pm(), sx()) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(ground_fidelity(sx(), sx()) == doctest::Approx(1.0).epsilon(1e-15));
  Matrix deg = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(ground_fidelity(eigendecompose(deg), sx()), Error);
}

TEST_CASE("vacuum persistence: 2x2 pair matches the atom sum") {
  const auto u = linspace(-3, 7, 23);
  const auto v = vacuum_persistence(diag_pm(), sx(), u);
  const auto g = characteristic_function(
      tpm_distribution(QuenchSpec::sudden(diag_pm(), sx(), InverseTemperature::ground_state())), u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const cplx expect = std::polar(1.0, 2.0 * u[i]) * (1.0 + std::polar(1.0, -2.0 * u[i])) / 2.0;
    CHECK(std::abs(v.amplitude[i] - expect) < 1e-14);
    CHECK(std::abs(v.amplitude[i] - g[i]) < 1e-14);
    CHECK(v.survival[i] <= 1.0 + 1e-15);
  }
  const auto same = vacuum_persistence(sx(), sx(), u);
  for (const auto& z : same.amplitude) CHECK(std::abs(z - 1.0) < 1e-14);
}

TEST_CASE("film partition: 2x2 closed form") {
  const auto r = linspace(0.5, 20.0, 40);
  const auto f = film_partition_function(diag_pm(), sx(), r, 1.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    CHECK(f.z_samples[i] == doctest::Approx((1.0 + std::exp(-2.0 * r[i])) / 2.0).epsilon(1e-14));
    // f_total = R f_b + 2 f_s + f_C reconstructs -ln Z / N with bulk phase
    CHECK(std::abs(f.f_total[i] - (r[i] * f.bulk + 2 * f.surface + f.casimir[i])) < 1e-12);
  }
  CHECK(f.surface == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-12));
  CHECK(std::abs(std::exp(-2.0 * f.surface) - 0.5) < 1e-8);
  CHECK(std::abs(f.casimir.back()) < 1e-12);

  const auto same = film_partition_function(sx(), sx(), r, 1.0);
  CHECK(std::abs(same.surface) < 1e-15);
  for (double z : same.z_samples) CHECK(z == doctest::Approx(1.0));
  for (double c : same.casimir) CHECK(std::abs(c) < 1e-15);
}

TEST_CASE("film partition: short grid is rejected") {
  const auto r = linspace(0.1, 2.0, 20);
  CHECK_THROWS_AS(film_partition_function(diag_pm(), sx(), r, 1.0), Error);
}

TEST_CASE("film partition: spin-space ED at L=8") {
  const auto h0 = eigendecompose(ising::spin_hamiltonian(8, 0.5));
  const auto hf = eigendecompose(ising::spin_hamiltonian(8, 0.8));
  const auto modes = ising::build_modes(8, 0.5, 0.8);
  const auto f = film_partition_function(h0, hf, ising::film_grid(modes), 8.0);
  const double fid = ground_fidelity(h0, hf);
  CHECK(std::abs(std::exp(-16.0 * f.surface) - fid * fid) < 1e-8);
  // casimir remainder decays on the tail
  const std::size_t n = f.casimir.size();
  for (std::size_t i = n / 2 + 1; i < n; ++i) CHECK(std::abs(f.casimir[i]) <= std::abs(f.casimir[i - 1]) + 1e-15);
}

TEST_CASE("fit_edge: synthetic power law, both modes") {
  WorkDensity d;
  d.delta_weight = 0.3;
  d.broadening = 0.01;
  const double m = 0.5, q = 2.0, a = 0.5, c = 0.7;
  d.w_grid = linspace(0.0, 10.0, 2001);
  for (double w : d.w_grid) d.density.push_back(w > q * m ? c * std::pow(w - q * m, 1 - a) : 0.0);

  EdgeFitOptions fixed;
  fixed.free_parameters = false;
  fixed.q = q;
  fixed.a = a;
  const auto ff = fit_edge(d, m, fixed);
  CHECK(ff.amplitude == doctest::Approx(c).epsilon(1e-10));
  CHECK(ff.residual < 1e-10);
  CHECK(ff.weight == 0.3);

  EdgeFitOptions free;
  free.q = q;
  const auto fr = fit_edge(d, m, free);
  CHECK(fr.threshold_multiplier == doctest::Approx(q).epsilon(1e-4));
  CHECK(fr.exponent == doctest::Approx(a).epsilon(1e-4));
}

TEST_CASE("fit_edge: null quench has no continuum") {
  WorkDensity d;
  d.delta_weight = 1.0;
  d.broadening = 0.1;
  d.w_grid = linspace(0, 1, 11);
  d.density.assign(11, 0.0);
  CHECK_THROWS_AS(fit_edge(d, 0.5), Error);
  try {
    fit_edge(d, 0.5);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NoContinuum);
  }
}
