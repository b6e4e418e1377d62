#include "quenchlab/cli_runner.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "quenchlab/error.hpp"
#include "quenchlab/fermi_impurity.hpp"
#include "quenchlab/ising_chain.hpp"
#include "quenchlab/large_dev.hpp"
#include "quenchlab/numerics.hpp"
#include "quenchlab/quench_ground.hpp"
#include "quenchlab/random.hpp"
#include "quenchlab/spectral_core.hpp"

namespace quenchlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- schema

enum class Kind { Number, Integer, String, Bool, Matrix, Beta };

struct Param {
  const char* name;
  Kind kind;
  bool required;
  json fallback;  // null when there is no default
  const char* note;
};

const std::map<Scenario, std::vector<Param>>& schema_table() {
  static const std::map<Scenario, std::vector<Param>> table = {
      {Scenario::Tpm,
       {{"h0", Kind::Matrix, true, nullptr, "initial Hamiltonian; rows of reals or [re, im] pairs"},
        {"hf", Kind::Matrix, true, nullptr, "final Hamiltonian"},
        {"beta", Kind::Beta, false, "inf", "inverse temperature or \"inf\""},
        {"protocol", Kind::String, false, "sudden", "sudden | random_unitary (seeded)"},
        {"u_max", Kind::Number, false, 10.0, "characteristic-function range"},
        {"u_points", Kind::Integer, false, 101, "characteristic-function samples"}}},
      {Scenario::Ising,
       {{"length", Kind::Integer, true, nullptr, "even chain length"},
        {"lambda0", Kind::Number, true, nullptr, "initial transverse field"},
        {"lambda_f", Kind::Number, true, nullptr, "final transverse field"},
        {"u_max", Kind::Number, false, 20.0, ""},
        {"u_points", Kind::Integer, false, 201, ""},
        {"density_points", Kind::Integer, false, 401, "work-density grid size"},
        {"eta", Kind::Number, false, nullptr, "broadening; default from the pair spectrum"}}},
      {Scenario::RateFn,
       {{"length", Kind::Integer, true, nullptr, ""},
        {"lambda0", Kind::Number, true, nullptr, ""},
        {"lambda_f", Kind::Number, true, nullptr, ""},
        {"w_points", Kind::Integer, false, 101, ""},
        {"w_max_factor", Kind::Number, false, 2.0, "grid runs to this multiple of the mean"}}},
      {Scenario::Impurity,
       {{"n_particles", Kind::Integer, true, nullptr, "fermions per channel"},
        {"potential", Kind::Number, true, nullptr, "scatterer strength v"},
        {"n_levels", Kind::Integer, false, nullptr, "default n_particles / filling"},
        {"filling", Kind::Number, false, 0.5, ""},
        {"dispersion", Kind::String, false, "linear", "linear | box"},
        {"bandwidth", Kind::Number, false, 1.0, ""},
        {"channels", Kind::Integer, false, 1, ""},
        {"beta", Kind::Beta, false, "inf", ""},
        {"eta", Kind::Number, false, nullptr, "if set, emit persistence and absorption series"},
        {"detuning_points", Kind::Integer, false, 751, ""}}},
      {Scenario::Thermal,
       {{"length", Kind::Integer, true, nullptr, "spin chain length, at most 10"},
        {"lambda0", Kind::Number, true, nullptr, ""},
        {"delta_lambda", Kind::Number, true, nullptr, ""},
        {"beta", Kind::Number, true, nullptr, "finite inverse temperature"}}},
  };
  return table;
}

const std::map<std::string, Scenario> kScenarioNames = {{"tpm", Scenario::Tpm},
                                                        {"ising", Scenario::Ising},
                                                        {"ratefn", Scenario::RateFn},
                                                        {"impurity", Scenario::Impurity},
                                                        {"thermal", Scenario::Thermal}};

std::string scenario_name(Scenario s) {
  for (const auto& [name, v] : kScenarioNames) {
    if (v == s) return name;
  }
  return "?";
}

[[noreturn]] void invalid(const std::string& path, const std::string& why) {
  throw Error(ErrorKind::ConfigInvalid, path + ": " + why);
}

bool is_matrix(const json& v) {
  if (!v.is_array() || v.empty()) return false;
  for (const auto& row : v) {
    if (!row.is_array() || row.size() != v.size()) return false;
    for (const auto& x : row) {
      const bool pair = x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number();
      if (!x.is_number() && !pair) return false;
    }
  }
  return true;
}

void check_kind(const std::string& path, const json& v, Kind kind) {
  switch (kind) {
    case Kind::Number:
      if (!v.is_number()) invalid(path, "expected a number");
      break;
    case Kind::Integer:
      if (!v.is_number_integer()) invalid(path, "expected an integer");
      break;
    case Kind::String:
      if (!v.is_string()) invalid(path, "expected a string");
      break;
    case Kind::Bool:
      if (!v.is_boolean()) invalid(path, "expected a boolean");
      break;
    case Kind::Matrix:
      if (!is_matrix(v)) invalid(path, "expected a square matrix");
      break;
    case Kind::Beta:
      if (!(v.is_number() || (v.is_string() && v.get<std::string>() == "inf"))) {
        invalid(path, "expected a number or \"inf\"");
      }
      break;
  }
}

// Validates and fills defaults.
json resolve_parameters(Scenario scenario, const json& given) {
  const auto& params = schema_table().at(scenario);
  for (const auto& [key, _] : given.items()) {
    const bool known = std::any_of(params.begin(), params.end(), [&](const Param& p) { return key == p.name; });
    if (!known) invalid("parameters." + key, "unknown key");
  }
  json out = json::object();
  for (const auto& p : params) {
    const std::string path = std::string("parameters.") + p.name;
    if (given.contains(p.name)) {
      check_kind(path, given.at(p.name), p.kind);
      out[p.name] = given.at(p.name);
    } else if (p.required) {
      invalid(path, "missing required key");
    } else if (!p.fallback.is_null()) {
      out[p.name] = p.fallback;
    }
  }
  return out;
}

Matrix to_matrix(const json& v) {
  const auto n = static_cast<Eigen::Index>(v.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& x = v[i][j];
      m(i, j) = x.is_number() ? cplx{x.get<double>(), 0.0} : cplx{x[0].get<double>(), x[1].get<double>()};
    }
  }
  return m;
}

InverseTemperature to_beta(const json& v) {
  if (v.is_string()) return InverseTemperature::ground_state();
  return InverseTemperature::finite(v.get<double>());
}

// ---------------------------------------------------------------- output helpers

std::string format_double(double x, int precision) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[512];
  auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, precision);
  std::string s(buf, res.ptr);
  if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

struct Writer {
  fs::path dir;
  int precision;
  std::vector<Artifact> artifacts;

  void csv(const std::string& name, const Table& t) {
    emit_csv(t, dir / name, precision);
    artifacts.push_back({name, sha256_file(dir / name)});
  }
  void json_file(const std::string& name, const json& v) {
    emit_json(v, dir / name);
    artifacts.push_back({name, sha256_file(dir / name)});
  }
};

struct Checks {
  std::vector<InvariantCheck> list;
  void add(const std::string& name, bool ok, const std::string& detail = {}) {
    list.push_back({name, ok, detail});
  }
  void bound(const std::string& name, double value, double tol) {
    std::ostringstream os;
    os << "value " << value << " tolerance " << tol;
    add(name, std::abs(value) < tol, os.str());
  }
};

// Each scenario writes its files and returns the summary numbers the sweep
// aggregate needs.
using Summary = std::map<std::string, double>;

Summary run_tpm(const json& p, std::uint64_t seed, Writer& out, Checks& checks) {
  auto h0 = eigendecompose(to_matrix(p["h0"]));
  auto hf = eigendecompose(to_matrix(p["hf"]));
  if (h0.dim() != hf.dim()) invalid("parameters.hf", "dimension differs from h0");
  const auto beta = to_beta(p["beta"]);
  const std::string protocol = p["protocol"].get<std::string>();
  QuenchSpec q;
  if (protocol == "sudden") {
    q = QuenchSpec::sudden(h0, hf, beta);
  } else if (protocol == "random_unitary") {
    RandomSource rng(seed);
    q = QuenchSpec::driven(h0, hf, rng.unitary(h0.dim()), beta);
  } else {
    invalid("parameters.protocol", "expected sudden or random_unitary");
  }
  const auto d = tpm_distribution(q);
  Table wd{{"work", "probability"}, {}};
  for (const auto& a : d.atoms) wd.rows.push_back({a.work, a.probability});
  out.csv("work_distribution.csv", wd);

  const auto u = linspace(-p["u_max"].get<double>(), p["u_max"].get<double>(), p["u_points"].get<int>());
  const auto g = characteristic_function(d, u);
  const auto gt = characteristic_function_trace(q, u);
  Table cf{{"u", "re", "im"}, {}};
  double route = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cf.rows.push_back({u[i], g[i].real(), g[i].imag()});
    route = std::max(route, std::abs(g[i] - gt[i]));
  }
  out.csv("characteristic.csv", cf);

  checks.bound("normalization", d.total_probability() - 1.0, 1e-10);
  checks.bound("characteristic_routes", route, 1e-10);
  json summary = {{"mean_work", json_number(d.mean())},
                  {"adiabatic_shift", json_number(d.adiabatic_shift)},
                  {"atoms", d.atoms.size()}};
  Summary s{{"mean_work", d.mean()}};
  if (!beta.is_ground_state()) {
    try {
      const auto r = entropy_production(q);
      summary["delta_F"] = json_number(r.delta_F);
      summary["s_irr"] = json_number(r.s_irr);
      summary["relative_entropy"] = json_number(r.relative_entropy);
      summary["trace_distance"] = json_number(r.trace_distance);
      summary["jarzynski_residual"] = json_number(r.jarzynski_residual);
      checks.add("relative_entropy_identity", true);
      checks.bound("jarzynski", r.jarzynski_residual, 1e-9);
      checks.add("pinsker", r.relative_entropy >= 2.0 * r.trace_distance * r.trace_distance - 1e-12);
      s["s_irr"] = r.s_irr;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::IdentityMismatch) throw;
      checks.add("relative_entropy_identity", false, e.what());
    }
  }
  out.json_file("summary.json", summary);
  return s;
}

Summary run_ising(const json& p, Writer& out, Checks& checks) {
  const int L = p["length"].get<int>();
  const double l0 = p["lambda0"].get<double>(), lf = p["lambda_f"].get<double>();
  const auto modes = ising::build_modes(L, l0, lf);
  const auto u = linspace(-p["u_max"].get<double>(), p["u_max"].get<double>(), p["u_points"].get<int>());
  const auto g = ising::g_exact(modes, u);
  Table cf{{"u", "re", "im"}, {}};
  double excess = 0.0, at_zero = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cf.rows.push_back({u[i], g[i].real(), g[i].imag()});
    excess = std::max(excess, std::abs(g[i]) - 1.0);
    if (u[i] == 0.0) at_zero = std::abs(g[i] - 1.0);
  }
  out.csv("characteristic.csv", cf);
  checks.add("g_bounded", excess <= 1e-12);
  checks.bound("g_at_zero", at_zero, 1e-14);
  if (L <= 8) {
    const auto ed = ising::ed_oracle_g(L, l0, lf, u, ising::EdBasis::Full);
    double err = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(g[i] - ed[i]));
    checks.bound("ed_oracle", err, 1e-8);
  }

  const double eta = p.contains("eta") ? p["eta"].get<double>() : ising::default_broadening(modes);
  const double top = modes.total_pair_energy();
  const auto w = linspace(-8.0 * eta, std::min(top, 4.0 * modes.max_pair_energy() + 8.0 * eta),
                          p["density_points"].get<int>());
  const auto dens = ising::work_density(modes, eta, w);
  Table wd{{"w_irr", "density"}, {}};
  for (std::size_t i = 0; i < w.size(); ++i) wd.rows.push_back({w[i], dens.density[i]});
  out.csv("work_density.csv", wd);

  const auto film = ising::film_partition_function(modes, ising::film_grid(modes));
  const double f2 = modes.fidelity_squared();
  checks.bound("surface_identity", std::exp(-2.0 * L * film.surface) - f2, 1e-8);

  const auto src = ising::susceptibility_source(L);
  const double chi2 = -central_derivative([&](double x) { return src.log_fidelity(l0, x); }, lf, 2,
                                          susceptibility_step(2)) /
                      src.n_cells;
  out.json_file("summary.json", {{"fidelity", json_number(std::sqrt(f2))},
                                 {"log_fidelity", json_number(modes.log_fidelity())},
                                 {"mass", json_number(modes.mass())},
                                 {"ground_shift", json_number(modes.ground_shift)},
                                 {"mean_irreversible_work", json_number(modes.mean_irreversible_work())},
                                 {"surface_free_energy", json_number(film.surface)},
                                 {"eta", json_number(eta)},
                                 {"chi2", json_number(chi2)}});
  return {{"chi2", chi2}, {"fidelity", std::sqrt(f2)}};
}

Summary run_ratefn(const json& p, Writer& out, Checks& checks) {
  const auto modes = ising::build_modes(p["length"].get<int>(), p["lambda0"].get<double>(),
                                        p["lambda_f"].get<double>());
  const auto src = mgf_from_modes(modes);
  RateConfig cfg;
  cfg.w_grid = linspace(-0.1 * src.mean_w, p["w_max_factor"].get<double>() * src.mean_w,
                        p["w_points"].get<int>());
  const auto c = rate_function(src, cfg);
  Table t{{"w", "rate"}, {}};
  bool nonneg = true, neg_inf = true;
  for (std::size_t i = 0; i < c.w_grid.size(); ++i) {
    t.rows.push_back({c.w_grid[i], c.rate[i]});
    if (c.rate[i] < -1e-12) nonneg = false;
    if (c.w_grid[i] < 0 && !std::isinf(c.rate[i])) neg_inf = false;
  }
  out.csv("rate_function.csv", t);
  const double i0 = c.rate_at(0.0);
  checks.add("rate_nonnegative", nonneg);
  checks.add("rate_infinite_below_zero", neg_inf);
  checks.bound("rate_zero_at_mean", c.rate_at(src.mean_w), 1e-9);
  checks.bound("rate_at_zero_vs_surface", i0 / src.surface_limit - 1.0, 0.02);
  out.json_file("summary.json", {{"mean_w", json_number(src.mean_w)},
                                 {"surface_limit", json_number(src.surface_limit)},
                                 {"rate_at_zero", json_number(i0)},
                                 {"extensions", c.extensions},
                                 {"negative_r_used", c.negative_r_used}});
  return {{"surface_limit", src.surface_limit}, {"mean_w", src.mean_w}};
}

Summary run_impurity(const json& p, Writer& out, Checks& checks) {
  using namespace impurity;
  const int n = p["n_particles"].get<int>();
  const int m = p.contains("n_levels") ? p["n_levels"].get<int>()
                                       : static_cast<int>(std::lround(n / p["filling"].get<double>()));
  const std::string disp = p["dispersion"].get<std::string>();
  if (disp != "linear" && disp != "box") invalid("parameters.dispersion", "expected linear or box");
  if (m < n || n < 1) invalid("parameters.n_levels", "need n_levels >= n_particles >= 1");
  const auto model = build_impurity_model(m, n, disp == "linear" ? Dispersion::Linear : Dispersion::Box,
                                          p["potential"].get<double>(), p["bandwidth"].get<double>(),
                                          p["channels"].get<int>());
  const auto beta = to_beta(p["beta"]);
  const double f = anderson_overlap(model);
  checks.add("overlap_in_unit_interval", f > 0.0 && f <= 1.0 + 1e-12);
  const double delta = model.phase_shift;
  json summary = {{"overlap", json_number(f)},
                  {"adiabatic_probability", json_number(f * f)},
                  {"phase_shift", json_number(delta)},
                  {"phase_shift_eigen", json_number(model.phase_shift_eigen)},
                  {"alpha_oc", json_number(model.channels * delta * delta / (2.0 * std::numbers::pi * std::numbers::pi))},
                  {"threshold", json_number(model.threshold())},
                  {"n_levels", m}};
  if (m <= 400) summary["third_cumulant"] = json_number(third_cumulant(model));

  if (p.contains("eta")) {
    const double eta = p["eta"].get<double>();
    const double span = model.levels(m - 1) - model.levels(0);
    const auto t = default_time_grid(eta, 4.0 * span);
    const auto s = persistence_determinant(model, t, beta);
    Table pt{{"t", "re_nu", "im_nu", "re_lambda2", "im_lambda2"}, {}};
    double excess = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
      pt.rows.push_back({t[k], s.nu[k].real(), s.nu[k].imag(), s.lambda2[k].real(), s.lambda2[k].imag()});
      excess = std::max(excess, std::abs(s.nu[k]) - 1.0);
    }
    out.csv("persistence.csv", pt);
    checks.add("nu_at_zero", s.nu[0] == cplx{1.0, 0.0});
    checks.add("nu_bounded", excess <= 1e-9);
    if (m <= 8 && model.channels == 1) {
      const auto ed = persistence_ed(model, t, beta);
      double err = 0.0;
      for (std::size_t k = 0; k < t.size(); ++k) err = std::max(err, std::abs(ed[k] - s.nu[k]));
      checks.bound("determinant_vs_ed", err, 1e-9);
    }
    const auto grid = linspace(-0.5 * span, span, p["detuning_points"].get<int>());
    const auto a = absorption_spectrum(s, grid, {eta, 0.0, 0.0});
    Table at{{"detuning", "absorption"}, {}};
    for (std::size_t j = 0; j < grid.size(); ++j) at.rows.push_back({grid[j], a.a_values[j]});
    out.csv("absorption.csv", at);
    checks.bound("absorption_sum_rule", a.sum_rule - 1.0, 0.05);
    summary["coupling_g"] = json_number(s.coupling_g);
    summary["tau0"] = json_number(s.tau0);
    summary["fitted_alpha"] = json_number(s.fitted_alpha);
  }
  out.json_file("summary.json", summary);
  return {{"overlap", f}, {"n_particles", static_cast<double>(n)}};
}

Summary run_thermal(const json& p, Writer& out, Checks& checks) {
  const int L = p["length"].get<int>();
  if (L < 2 || L > 10) invalid("parameters.length", "thermal runs use 2 <= length <= 10");
  const double l0 = p["lambda0"].get<double>(), dl = p["delta_lambda"].get<double>();
  const double beta = p["beta"].get<double>();
  const Matrix base = ising::spin_hamiltonian(L, 0.0);
  const HamiltonianFamily family(base, ising::spin_hamiltonian(L, 1.0) - base);
  json summary;
  try {
    const auto w = thermal_sudden_work(family, l0, l0 + dl, beta);
    summary["mean_work"] = json_number(w.lhs);
    summary["mean_work_derivative"] = json_number(w.rhs);
    checks.add("thermal_work_routes", true);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::IdentityMismatch) throw;
    checks.add("thermal_work_routes", false, e.what());
  }
  const std::vector<double> dls{dl};
  const auto ex = small_quench_entropy_expansion(family, l0, dls, beta);
  summary["s_irr"] = json_number(ex.rows[0].exact);
  summary["s_irr_second_order"] = json_number(ex.rows[0].estimate);
  summary["free_energy_curvature"] = json_number(ex.second_derivative);
  try {
    const auto r = entropy_production(QuenchSpec::sudden(family.at(l0), family.at(l0 + dl),
                                                         InverseTemperature::finite(beta)));
    checks.bound("s_irr_routes", r.s_irr - ex.rows[0].exact, 1e-8);
    checks.add("relative_entropy_identity", true);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::IdentityMismatch) throw;
    checks.add("relative_entropy_identity", false, e.what());
  }
  out.json_file("summary.json", summary);
  return {{"s_irr", ex.rows[0].exact}};
}

Summary dispatch(const RunConfig& config, const json& params, Writer& out, Checks& checks) {
  try {
    switch (config.scenario) {
      case Scenario::Tpm: return run_tpm(params, config.seed, out, checks);
      case Scenario::Ising: return run_ising(params, out, checks);
      case Scenario::RateFn: return run_ratefn(params, out, checks);
      case Scenario::Impurity: return run_impurity(params, out, checks);
      case Scenario::Thermal: return run_thermal(params, out, checks);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConfigInvalid || e.kind() == ErrorKind::IoError) throw;
    throw Error(e.kind(), scenario_name(config.scenario) + ": " + e.what());
  }
  return {};
}

std::pair<ResultManifest, Summary> run_point(const RunConfig& config, const json& params) {
  const auto start = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(config.output_dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + config.output_dir.string());
  Writer out{config.output_dir, config.precision, {}};
  Checks checks;
  Summary summary = dispatch(config, params, out, checks);
  ResultManifest m;
  m.config = config.source;
  m.artifacts = out.artifacts;
  m.invariants = checks.list;
  m.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emit_json(m.to_json(), config.output_dir / "manifest.json");
  return {std::move(m), std::move(summary)};
}

}  // namespace

// ---------------------------------------------------------------- config

RunConfig parse_config(const json& doc, const std::optional<fs::path>& output_override) {
  if (!doc.is_object()) invalid("$", "config must be a JSON object");
  static const std::vector<std::string> top = {"scenario", "parameters", "output_dir", "seed", "precision", "sweep"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(top.begin(), top.end(), key) == top.end()) invalid(key, "unknown key");
  }
  RunConfig c;
  c.source = doc;
  if (!doc.contains("scenario")) invalid("scenario", "missing required key");
  if (!doc["scenario"].is_string() || !kScenarioNames.contains(doc["scenario"].get<std::string>())) {
    invalid("scenario", "expected one of tpm, ising, ratefn, impurity, thermal");
  }
  c.scenario = kScenarioNames.at(doc["scenario"].get<std::string>());
  if (!doc.contains("parameters")) invalid("parameters", "missing required key");
  if (!doc["parameters"].is_object()) invalid("parameters", "expected an object");
  c.parameters = doc["parameters"];

  if (output_override) {
    c.output_dir = *output_override;
  } else if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) invalid("output_dir", "expected a string");
    c.output_dir = doc["output_dir"].get<std::string>();
  } else {
    invalid("output_dir", "missing required key");
  }
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<std::int64_t>() < 0) {
      invalid("seed", "expected a non-negative integer");
    }
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("precision")) {
    if (!doc["precision"].is_number_integer() || doc["precision"].get<int>() < 0 || doc["precision"].get<int>() > 17) {
      invalid("precision", "expected an integer in [0, 17]");
    }
    c.precision = doc["precision"].get<int>();
  }

  if (doc.contains("sweep")) {
    const auto& s = doc["sweep"];
    if (!s.is_object()) invalid("sweep", "expected an object");
    for (const auto& [key, _] : s.items()) {
      if (key != "parameter" && key != "values") invalid("sweep." + key, "unknown key");
    }
    if (!s.contains("parameter") || !s["parameter"].is_string()) invalid("sweep.parameter", "expected a parameter name");
    if (!s.contains("values") || !s["values"].is_array() || s["values"].empty()) {
      invalid("sweep.values", "expected a non-empty array");
    }
    SweepAxis axis{s["parameter"].get<std::string>(), {}};
    const auto& params = schema_table().at(c.scenario);
    const auto it = std::find_if(params.begin(), params.end(), [&](const Param& p) { return axis.parameter == p.name; });
    if (it == params.end()) invalid("sweep.parameter", "unknown parameter " + axis.parameter);
    for (std::size_t i = 0; i < s["values"].size(); ++i) {
      check_kind("sweep.values[" + std::to_string(i) + "]", s["values"][i], it->kind);
      axis.values.push_back(s["values"][i]);
    }
    json probe = c.parameters;
    probe[axis.parameter] = axis.values.front();
    resolve_parameters(c.scenario, probe);
    c.sweep = std::move(axis);
  } else {
    resolve_parameters(c.scenario, c.parameters);
  }
  return c;
}

RunConfig load_config(const fs::path& path, const std::optional<fs::path>& output_override) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    invalid("$", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(doc, output_override);
}

json parameter_schema() {
  static const std::map<Kind, const char*> kinds = {{Kind::Number, "number"}, {Kind::Integer, "integer"},
                                                    {Kind::String, "string"}, {Kind::Bool, "boolean"},
                                                    {Kind::Matrix, "matrix"}, {Kind::Beta, "number|\"inf\""}};
  json out = json::object();
  for (const auto& [scenario, params] : schema_table()) {
    json entry = json::object();
    for (const auto& p : params) {
      json d = {{"type", kinds.at(p.kind)}, {"required", p.required}};
      if (!p.fallback.is_null()) d["default"] = p.fallback;
      if (*p.note) d["description"] = p.note;
      entry[p.name] = d;
    }
    out[scenario_name(scenario)] = entry;
  }
  return out;
}

// ---------------------------------------------------------------- emitters

std::string format_csv(const Table& table, int precision) {
  std::string out;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out += ',';
    out += table.columns[j];
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              out += format_double(v, precision);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
              out += std::to_string(v);
            } else {
              out += v;
            }
          },
          row[j]);
    }
    out += '\n';
  }
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

}  // namespace

void emit_csv(const Table& table, const fs::path& path, int precision) {
  write_file(path, format_csv(table, precision));
}

std::string format_json(const json& value) {
  return value.dump(2) + "\n";
}

void emit_json(const json& value, const fs::path& path) {
  write_file(path, format_json(value));
}

json json_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x == 0.0 ? 0.0 : x;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return sha256_hex(ss.str());
}

// ---------------------------------------------------------------- runs

bool ResultManifest::all_passed() const {
  return std::all_of(invariants.begin(), invariants.end(), [](const auto& c) { return c.passed; });
}

json ResultManifest::to_json() const {
  json arts = json::array();
  for (const auto& a : artifacts) arts.push_back({{"path", a.path}, {"sha256", a.sha256}});
  json inv = json::array();
  for (const auto& c : invariants) inv.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"config", config},
          {"artifacts", arts},
          {"wall_time_seconds", wall_time_seconds},
          {"version", version},
          {"invariants", inv},
          {"all_passed", all_passed()}};
}

ResultManifest run_scenario(const RunConfig& config) {
  if (config.sweep) return sweep(config, 1);
  return run_point(config, resolve_parameters(config.scenario, config.parameters)).first;
}

ResultManifest sweep(const RunConfig& config, int threads) {
  if (!config.sweep) throw Error(ErrorKind::ConfigInvalid, "sweep: no axis declared");
  const auto start = std::chrono::steady_clock::now();
  const auto& axis = *config.sweep;
  const std::size_t n = axis.values.size();
  std::vector<ResultManifest> points(n);
  std::vector<Summary> summaries(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        json params = config.parameters;
        params[axis.parameter] = axis.values[i];
        RunConfig point = config;
        point.sweep.reset();
        point.parameters = params;
        char name[32];
        std::snprintf(name, sizeof name, "point_%03zu", i);
        point.output_dir = config.output_dir / name;
        point.source.erase("sweep");
        point.source["parameters"] = params;
        std::tie(points[i], summaries[i]) = run_point(point, resolve_parameters(config.scenario, params));
        for (auto& a : points[i].artifacts) a.path = std::string(name) + "/" + a.path;
        for (auto& c : points[i].invariants) c.name = std::string(name) + "/" + c.name;
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int k = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < k; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // Aggregate in axis order.
  Table agg;
  const std::string col = axis.parameter == "n_particles" ? "N" : axis.parameter;
  auto axis_cell = [&](std::size_t i) -> Cell {
    const auto& v = axis.values[i];
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number()) return v.get<double>();
    return v.dump();
  };
  switch (config.scenario) {
    case Scenario::Impurity: {
      agg.columns = {col, "overlap", "fitted_alpha_so_far"};
      std::vector<double> ns, fs_;
      for (std::size_t i = 0; i < n; ++i) {
        ns.push_back(summaries[i].at("n_particles"));
        fs_.push_back(summaries[i].at("overlap"));
        double alpha = std::nan("");
        const bool distinct_n = i > 0 && std::adjacent_find(ns.begin(), ns.end()) == ns.end();
        if (distinct_n && axis.parameter == "n_particles") alpha = -fit_power_law(ns, fs_).slope;
        agg.rows.push_back({axis_cell(i), fs_.back(), alpha});
      }
      break;
    }
    default: {
      static const std::map<Scenario, std::string> key = {{Scenario::Tpm, "mean_work"},
                                                          {Scenario::Ising, "chi2"},
                                                          {Scenario::RateFn, "surface_limit"},
                                                          {Scenario::Thermal, "s_irr"}};
      const std::string& k2 = key.at(config.scenario);
      agg.columns = {col, k2};
      for (std::size_t i = 0; i < n; ++i) agg.rows.push_back({axis_cell(i), summaries[i].at(k2)});
    }
  }
  emit_csv(agg, config.output_dir / "aggregate.csv", config.precision);

  ResultManifest m;
  m.config = config.source;
  for (const auto& p : points) {
    m.artifacts.insert(m.artifacts.end(), p.artifacts.begin(), p.artifacts.end());
    m.invariants.insert(m.invariants.end(), p.invariants.begin(), p.invariants.end());
  }
  m.artifacts.push_back({"aggregate.csv", sha256_file(config.output_dir / "aggregate.csv")});
  m.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emit_json(m.to_json(), config.output_dir / "manifest.json");
  return m;
}

int resolve_threads(std::optional<int> flag) {
  if (flag) return std::max(1, *flag);
  if (const char* env = std::getenv("QUENCHLAB_THREADS")) {
    int v = 0;
    const auto res = std::from_chars(env, env + std::strlen(env), v);
    if (res.ec == std::errc{} && v > 0) return v;
  }
  return 1;
}

std::vector<InvariantCheck> invariant_suite() {
  Checks c;
  auto guarded = [&](const std::string& name, const std::function<void()>& body) {
    try {
      body();
    } catch (const std::exception& e) {
      c.add(name, false, e.what());
    }
  };

  guarded("fluctuation_identities", [&] {
    RandomSource rng(2024);
    double norm = 0.0, jar = 0.0;
    bool pinsker = true;
    for (int i = 0; i < 20; ++i) {
      const auto dim = static_cast<Eigen::Index>(2 + i % 3);
      const auto q = QuenchSpec::driven(eigendecompose(rng.hermitian(dim)), eigendecompose(rng.hermitian(dim)),
                                        rng.unitary(dim), InverseTemperature::finite(1.0));
      const auto r = entropy_production(q);  // throws on an identity mismatch
      norm = std::max(norm, std::abs(tpm_distribution(q).total_probability() - 1.0));
      jar = std::max(jar, r.jarzynski_residual);
      pinsker = pinsker && r.relative_entropy >= 2.0 * r.trace_distance * r.trace_distance - 1e-12;
    }
    c.bound("normalization", norm, 1e-10);
    c.bound("jarzynski", jar, 1e-9);
    c.add("pinsker", pinsker);
  });

  guarded("ising_vs_ed", [&] {
    const auto u = linspace(-10, 10, 64);
    const auto g = ising::g_exact(ising::build_modes(6, 0.7, 1.6), u);
    const auto ed = ising::ed_oracle_g(6, 0.7, 1.6, u, ising::EdBasis::Full);
    double err = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs(g[i] - ed[i]));
    c.bound("ising_vs_ed", err, 1e-8);
  });

  guarded("surface_identity", [&] {
    const auto modes = ising::build_modes(8, 0.5, 1.4);
    const auto film = ising::film_partition_function(modes, ising::film_grid(modes));
    c.bound("surface_identity", std::exp(-16.0 * film.surface) - modes.fidelity_squared(), 1e-8);
  });

  guarded("rate_function", [&] {
    const auto src = mgf_from_modes(ising::build_modes(200, 1.5, 1.2));
    RateConfig cfg;
    cfg.w_grid = linspace(0.0, 1.5 * src.mean_w, 31);
    const auto curve = rate_function(src, cfg);
    c.bound("rate_zero_at_mean", curve.rate_at(src.mean_w), 1e-9);
    c.bound("rate_at_zero_vs_surface", curve.rate_at(0.0) / src.surface_limit - 1.0, 0.02);
  });

  guarded("impurity_determinant_vs_ed", [&] {
    const auto m = impurity::build_impurity_model(6, 3, impurity::Dispersion::Linear, 0.6);
    const auto t = linspace(0, 20, 41);
    double err = 0.0;
    for (auto beta : {InverseTemperature::ground_state(), InverseTemperature::finite(2.0)}) {
      const auto d = impurity::persistence_determinant(m, t, beta).nu;
      const auto e = impurity::persistence_ed(m, t, beta);
      for (std::size_t k = 0; k < t.size(); ++k) err = std::max(err, std::abs(d[k] - e[k]));
    }
    c.bound("impurity_determinant_vs_ed", err, 1e-9);
  });

  guarded("lehmann_absorption", [&] {
    const auto m = impurity::build_impurity_model(6, 3, impurity::Dispersion::Linear, 0.6);
    const double eta = 0.05;
    const auto s = impurity::persistence_determinant(m, impurity::default_time_grid(eta, 8.0),
                                                     InverseTemperature::ground_state());
    const auto grid = linspace(-1.0, 3.0, 201);
    const auto a = impurity::absorption_spectrum(s, grid, {eta, 0.0, 0.0});
    const auto d = impurity::impurity_work_distribution(m, InverseTemperature::ground_state());
    double err = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double p = 0.0;
      for (const auto& atom : d.atoms) {
        const double x = grid[j] + s.threshold - atom.work;
        p += atom.probability * std::exp(-x * x / (2 * eta * eta)) / (std::sqrt(2 * std::numbers::pi) * eta);
      }
      err = std::max(err, std::abs(a.a_values[j] / (2 * std::numbers::pi) - p));
    }
    c.bound("lehmann_absorption", err, 1e-6);
  });

  guarded("thermal_work_routes", [&] {
    const Matrix base = ising::spin_hamiltonian(6, 0.0);
    const HamiltonianFamily family(base, ising::spin_hamiltonian(6, 1.0) - base);
    const auto w = thermal_sudden_work(family, 0.9, 0.95, 2.0);
    c.bound("thermal_work_routes", w.lhs - w.rhs, 1e-6);
  });

  guarded("cli_determinism", [&] {
    const json doc = {{"scenario", "tpm"},
                      {"seed", 7},
                      {"parameters", {{"h0", {{-1, 0}, {0, 1}}}, {"hf", {{0, 1}, {1, 0}}}, {"beta", 1.0},
                                      {"protocol", "random_unitary"}}}};
    const auto base = fs::temp_directory_path() /
                      ("quenchlab_check_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    const auto a = run_scenario(parse_config(doc, base / "a"));
    const auto b = run_scenario(parse_config(doc, base / "b"));
    bool same = a.artifacts.size() == b.artifacts.size();
    for (std::size_t i = 0; same && i < a.artifacts.size(); ++i) {
      same = a.artifacts[i].path == b.artifacts[i].path && a.artifacts[i].sha256 == b.artifacts[i].sha256;
    }
    std::error_code ec;
    fs::remove_all(base, ec);
    c.add("cli_determinism", same && a.all_passed());
  });
  return c.list;
}

}  // namespace quenchlab::cli
