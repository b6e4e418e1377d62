#include <cmath>
#include <numbers>

#include "doctest.h"
#include "quenchlab/error.hpp"
#include "quenchlab/random.hpp"
#include "quenchlab/spectral_core.hpp"

using namespace quenchlab;

namespace {

Matrix diag2(double a, double b) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Matrix sigma_x() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 1) = m(1, 0) = 1.0;
  return m;
}

Matrix sigma_z() { return diag2(1.0, -1.0); }

QuenchSpec two_by_two(InverseTemperature beta) {
  return QuenchSpec::sudden(eigendecompose(diag2(-1, 1)), eigendecompose(sigma_x()), beta);
}

// Exhaustive double sum with no sorting or merging.
double brute_total(const QuenchSpec& q) {
  const auto rho = gibbs_state(*q.initial, q.beta);
  double s = 0.0;
  for (Eigen::Index n = 0; n < q.initial->dim(); ++n)
    for (Eigen::Index m = 0; m < q.final->dim(); ++m) {
      const cplx amp = q.final->eigenvectors().col(m).dot(q.propagator *
                                                          q.initial->eigenvectors().col(n));
      s += rho.weights(n) * std::norm(amp);
    }
  return s;
}

}  // namespace

TEST_CASE("eigendecompose: diagonal and sigma_x") {
  auto d = eigendecompose(diag2(-1, 1));
  CHECK(d.eigenvalues()(0) == doctest::Approx(-1.0));
  CHECK(d.eigenvalues()(1) == doctest::Approx(1.0));
  CHECK((d.eigenvectors() - Matrix::Identity(2, 2)).norm() < 1e-14);

  auto x = eigendecompose(sigma_x());
  CHECK(x.eigenvalues()(0) == doctest::Approx(-1.0));
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(x.eigenvectors()(0, 0) - r) < 1e-14);
  CHECK(std::abs(x.eigenvectors()(1, 0) + r) < 1e-14);
  CHECK(std::abs(x.eigenvectors()(0, 1) - r) < 1e-14);
  CHECK(std::abs(x.eigenvectors()(1, 1) - r) < 1e-14);
}

TEST_CASE("eigendecompose: random 6x6 reconstructs and is unitary") {
  RandomSource rng(11);
  const Matrix h = rng.hermitian(6);
  const auto op = eigendecompose(h);
  CHECK((op.reconstruct() - h).norm() / h.norm() < 1e-10);
  CHECK((op.eigenvectors().adjoint() * op.eigenvectors() - Matrix::Identity(6, 6)).norm() < 1e-10);
  for (Eigen::Index i = 1; i < 6; ++i) CHECK(op.eigenvalues()(i) >= op.eigenvalues()(i - 1));
  // bit-stable phase convention
  const auto again = eigendecompose(h);
  CHECK(again.eigenvectors() == op.eigenvectors());
}

TEST_CASE("eigendecompose rejects non-Hermitian input") {
  Matrix m = sigma_x();
  m(0, 1) = 2.0;
  CHECK_THROWS_AS(eigendecompose(m), Error);
  try {
    eigendecompose(m);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonHermitian);
  }
}

TEST_CASE("gibbs_state two-level") {
  const auto h = eigendecompose(diag2(-1, 1));
  auto g0 = gibbs_state(h, InverseTemperature::finite(0.0));
  CHECK(g0.weights(0) == doctest::Approx(0.5));
  CHECK(g0.partition() == doctest::Approx(2.0));

  auto g1 = gibbs_state(h, InverseTemperature::finite(1.0));
  const double e = std::exp(1.0), ei = std::exp(-1.0);
  CHECK(g1.weights(0) == doctest::Approx(e / (e + ei)).epsilon(1e-14));
  CHECK(g1.weights(1) == doctest::Approx(ei / (e + ei)).epsilon(1e-14));
  CHECK(g1.free_energy == doctest::Approx(-std::log(e + ei)));

  auto gs = gibbs_state(h, InverseTemperature::ground_state());
  CHECK(gs.weights(0) == 1.0);
  CHECK(gs.weights(1) == 0.0);
  CHECK_FALSE(gs.degenerate_ground);
}

TEST_CASE("gibbs_state degenerate ground is a flagged uniform mixture") {
  Matrix m = Matrix::Zero(3, 3);
  m(2, 2) = 1.0;
  auto gs = gibbs_state(eigendecompose(m), InverseTemperature::ground_state());
  CHECK(gs.degenerate_ground);
  CHECK(gs.weights(0) == doctest::Approx(0.5));
  CHECK(gs.weights(1) == doctest::Approx(0.5));
}

TEST_CASE("gibbs_state survives large beta without overflow") {
  RandomSource rng(3);
  auto g = gibbs_state(eigendecompose(100.0 * rng.hermitian(5)), InverseTemperature::finite(50.0));
  CHECK(g.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isfinite(g.log_partition));
  for (int i = 1; i < 5; ++i) CHECK(g.weights(i) <= g.weights(i - 1));
}

TEST_CASE("tpm_distribution: 2x2 pair at zero temperature") {
  const auto d = tpm_distribution(two_by_two(InverseTemperature::ground_state()));
  REQUIRE(d.atoms.size() == 2);
  CHECK(d.atoms[0].work == doctest::Approx(0.0));
  CHECK(d.atoms[0].probability == doctest::Approx(0.5));
  CHECK(d.atoms[1].work == doctest::Approx(2.0));
  CHECK(d.atoms[1].probability == doctest::Approx(0.5));
  CHECK(d.adiabatic_shift == doctest::Approx(0.0));
}

TEST_CASE("tpm_distribution: null quench is a point mass") {
  for (double b : {0.0, 0.5, 3.0}) {
    const auto h = eigendecompose(diag2(-1, 1));
    const auto d = tpm_distribution(QuenchSpec::sudden(h, h, InverseTemperature::finite(b)));
    REQUIRE(d.atoms.size() == 1);
    CHECK(d.atoms[0].work == 0.0);
    CHECK(d.atoms[0].probability == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("tpm_distribution: random 5-dim normalization against the double sum") {
  RandomSource rng(5);
  auto q = QuenchSpec::sudden(eigendecompose(rng.hermitian(5)), eigendecompose(rng.hermitian(5)),
                              InverseTemperature::finite(1.0));
  const auto d = tpm_distribution(q);
  CHECK(std::abs(d.total_probability() - 1.0) < 1e-12);
  CHECK(std::abs(brute_total(q) - 1.0) < 1e-12);
  for (std::size_t i = 1; i < d.atoms.size(); ++i) CHECK(d.atoms[i].work > d.atoms[i - 1].work);
}

TEST_CASE("tpm_distribution: dimension cap") {
  RandomSource rng(1);
  auto q = QuenchSpec::sudden(eigendecompose(rng.hermitian(5)), eigendecompose(rng.hermitian(5)),
                              InverseTemperature::finite(1.0));
  TpmOptions opt;
  opt.dimension_cap = 4;
  CHECK_THROWS_AS(tpm_distribution(q, opt), Error);
}

TEST_CASE("characteristic function: closed forms and two routes") {
  const auto q = two_by_two(InverseTemperature::ground_state());
  const auto d = tpm_distribution(q);
  const std::vector<double> u{0.0, 0.3, 1.7, -2.2, 9.0};
  const auto g = characteristic_function(d, u);
  const auto gt = characteristic_function_trace(q, u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const cplx expect = (1.0 + std::polar(1.0, 2.0 * u[i])) / 2.0;
    CHECK(std::abs(g[i] - expect) < 1e-14);
    CHECK(std::abs(gt[i] - expect) < 1e-14);
  }
  const auto h = eigendecompose(diag2(-1, 1));
  const auto null = characteristic_function(
      tpm_distribution(QuenchSpec::sudden(h, h, InverseTemperature::finite(1.0))), u);
  for (const auto& z : null) CHECK(std::abs(z - 1.0) < 1e-15);
}

TEST_CASE("characteristic function: random driven quench, routes agree") {
  RandomSource rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const int dim = 2 + trial;
    auto q = QuenchSpec::driven(eigendecompose(rng.hermitian(dim)),
                                eigendecompose(rng.hermitian(dim)), rng.unitary(dim),
                                InverseTemperature::finite(0.8));
    const auto u = linspace(-5, 5, 41);
    const auto g = characteristic_function(tpm_distribution(q), u);
    const auto gt = characteristic_function_trace(q, u);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(g[i] - gt[i]) < 1e-10);
    CHECK(std::abs(g[20] - 1.0) < 1e-12);
  }
}

TEST_CASE("cumulants: Bernoulli on {0,2} and point mass") {
  const auto c = cumulants(tpm_distribution(two_by_two(InverseTemperature::ground_state())), 4);
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(1.0));
  CHECK(std::abs(c[2]) < 1e-14);
  CHECK(c[3] == doctest::Approx(-2.0));  // fourth cumulant of 2*Bernoulli(1/2)
  const auto h = eigendecompose(diag2(-1, 1));
  const auto z = cumulants(tpm_distribution(QuenchSpec::sudden(h, h, InverseTemperature::finite(1))), 6);
  for (double v : z) CHECK(v == 0.0);
  CHECK_THROWS_AS(cumulants(tpm_distribution(two_by_two(InverseTemperature::ground_state())), 13),
                  Error);
}

TEST_CASE("cumulant series reproduces the irreversible entropy") {
  RandomSource rng(8);
  const Matrix a = 0.1 * rng.hermitian(4), b = 0.1 * rng.hermitian(4);
  auto q = QuenchSpec::sudden(eigendecompose(a), eigendecompose(b), InverseTemperature::finite(1.0));
  const auto d = tpm_distribution(q);
  REQUIRE(1.0 * (d.max_work() - d.min_work()) < 1.0);
  const auto rep = entropy_production(q);
  const auto c = cumulants(d, 10);
  double s = 0.0, fact = 1.0;
  for (int n = 2; n <= 10; ++n) {
    fact *= n;
    s += ((n % 2 == 0) ? 1.0 : -1.0) * c[n - 1] / fact;
  }
  CHECK(std::abs(s - rep.s_irr) < 1e-8);
}

TEST_CASE("free_energy_difference two-level closed form") {
  const auto h1 = eigendecompose(sigma_z());
  const auto h12 = eigendecompose(1.2 * sigma_z());
  const double df = free_energy_difference(h1, h12, InverseTemperature::finite(1.0));
  CHECK(df == doctest::Approx(std::log(std::cosh(1.0) / std::cosh(1.2))).epsilon(1e-13));
  CHECK(df == doctest::Approx(-0.1599).epsilon(1e-3));
  CHECK(free_energy_difference(h1, h1, InverseTemperature::finite(2.0)) == 0.0);
  CHECK(free_energy_difference(h1, h12, InverseTemperature::ground_state()) ==
        doctest::Approx(-0.2));
}

TEST_CASE("entropy_production: two-level closed form and null quench") {
  auto q = QuenchSpec::sudden(eigendecompose(sigma_z()), eigendecompose(1.2 * sigma_z()),
                              InverseTemperature::finite(1.0));
  const auto r = entropy_production(q);
  const double oracle = 0.2 * -std::tanh(1.0) - std::log(std::cosh(1.0) / std::cosh(1.2));
  CHECK(r.s_irr == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(r.s_irr == doctest::Approx(0.00759).epsilon(1e-3));
  CHECK(std::abs(r.relative_entropy - r.s_irr) < 1e-12);
  CHECK(std::abs(r.jarzynski_residual) < 1e-12);

  const auto h = eigendecompose(sigma_z());
  const auto z = entropy_production(QuenchSpec::sudden(h, h, InverseTemperature::finite(1.0)));
  CHECK(std::abs(z.s_irr) < 1e-15);
  CHECK(std::abs(z.relative_entropy) < 1e-15);
  CHECK(std::abs(z.jarzynski_residual) < 1e-15);
  CHECK_THROWS_AS(entropy_production(QuenchSpec::sudden(h, h, InverseTemperature::ground_state())),
                  Error);
}

TEST_CASE("fluctuation identities on random instances") {
  RandomSource rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int dim = rng.integer(2, 6);
    const double beta = std::array{0.2, 1.0, 5.0}[trial % 3];
    const Matrix u = trial % 2 ? rng.unitary(dim) : Matrix::Identity(dim, dim);
    auto q = QuenchSpec::driven(eigendecompose(rng.hermitian(dim)),
                                eigendecompose(rng.hermitian(dim)), u,
                                InverseTemperature::finite(beta));
    const auto d = tpm_distribution(q);
    CHECK(std::abs(d.total_probability() - 1.0) < 1e-10);
    const auto r = entropy_production(q);
    CHECK(std::abs(r.jarzynski_residual) < 1e-9);
    CHECK(std::abs(r.s_irr - r.relative_entropy) < 1e-8);
    CHECK(std::abs(r.mean_work - r.mean_work_trace) < 1e-10);
    CHECK(r.s_irr >= 2.0 * r.trace_distance * r.trace_distance - 1e-9);
    CHECK(r.trace_distance <= 1.0);
  }
}

TEST_CASE("thermal sudden work: two routes") {
  const HamiltonianFamily fam(Matrix::Zero(2, 2), sigma_z());
  const auto w = thermal_sudden_work(fam, 1.0, 1.2, 1.0);
  CHECK(w.lhs == doctest::Approx(-0.2 * std::tanh(1.0)).epsilon(1e-12));
  CHECK(w.rhs == doctest::Approx(-0.2 * std::tanh(1.0)).epsilon(1e-8));
  const auto z = thermal_sudden_work(fam, 1.0, 1.0, 1.0);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);

  RandomSource rng(77);
  const HamiltonianFamily rf(rng.hermitian(4), rng.hermitian(4));
  const auto r = thermal_sudden_work(rf, 0.3, 0.31, 2.0);
  CHECK(std::abs(r.lhs - r.rhs) < 1e-6);
}

TEST_CASE("HamiltonianFamily::from_endpoints enforces linearity") {
  const Matrix b = sigma_z();
  const auto fam = HamiltonianFamily::from_endpoints(b, 1.2 * b, b, 1.0, 1.2);
  CHECK((fam.matrix_at(1.1) - 1.1 * b).norm() < 1e-14);
  CHECK_THROWS_AS(HamiltonianFamily::from_endpoints(b, 1.2 * b + sigma_x(), b, 1.0, 1.2), Error);
}

TEST_CASE("small quench entropy expansion: two-level") {
  const HamiltonianFamily fam(Matrix::Zero(2, 2), sigma_z());
  const std::vector<double> dl{0.2, 0.1, 0.05, 0.0};
  const auto e = small_quench_entropy_expansion(fam, 1.0, dl, 1.0);
  // F = -ln(2 cosh l), F'' = -sech^2 l
  const double sech2 = 1.0 / (std::cosh(1.0) * std::cosh(1.0));
  CHECK(e.second_derivative == doctest::Approx(-sech2).epsilon(1e-8));
  CHECK(e.rows[0].estimate == doctest::Approx(0.02 * sech2).epsilon(1e-8));
  CHECK(e.rows[0].estimate == doctest::Approx(0.00840).epsilon(2e-3));
  CHECK(e.rows[0].exact == doctest::Approx(0.00759).epsilon(1e-3));
  CHECK(e.rows[3].exact == 0.0);
  CHECK(e.rows[3].estimate == 0.0);
  const double r0 = std::abs(e.rows[0].exact - e.rows[0].estimate);
  const double r1 = std::abs(e.rows[1].exact - e.rows[1].estimate);
  CHECK(r0 / r1 == doctest::Approx(8.0).epsilon(0.1));
  CHECK(e.fitted_order > 2.7);
  CHECK(e.fitted_order < 3.3);
}
