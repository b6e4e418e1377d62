#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "quenchlab/cli_runner.hpp"
#include "quenchlab/error.hpp"

using namespace quenchlab;
using namespace quenchlab::cli;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("quenchlab_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json two_level_tpm() {
  return {{"scenario", "tpm"}, {"parameters", {{"h0", {{-1, 0}, {0, 1}}}, {"hf", {{0, 1}, {1, 0}}}}}};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("csv and json format contracts") {
  Table t{{"col_a", "col_b"}, {{std::int64_t{1}, 0.5}}};
  CHECK(format_csv(t, 3) == "col_a,col_b\n1,0.500\n");
  Table s{{"w", "rate"}, {{-0.1, std::numeric_limits<double>::infinity()}, {-0.0, -1e-9}}};
  CHECK(format_csv(s, 3) == "w,rate\n-0.100,inf\n0.000,0.000\n");
  const json v = {{"b", 1}, {"a", 2}};
  CHECK(format_json(v) == "{\n  \"a\": 2,\n  \"b\": 1\n}\n");
  CHECK(json_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("strict config validation") {
  json empty = {{"scenario", "tpm"}, {"parameters", json::object()}, {"output_dir", "x"}};
  CHECK(kind_of([&] { parse_config(empty); }) == ErrorKind::ConfigInvalid);
  CHECK(message_of([&] { parse_config(empty); }).find("parameters.h0") != std::string::npos);

  json extra = two_level_tpm();
  extra["output_dir"] = "x";
  extra["parameters"]["colour"] = 1;
  CHECK(message_of([&] { parse_config(extra); }).find("parameters.colour") != std::string::npos);

  json top = two_level_tpm();
  top["output_dir"] = "x";
  top["verbose"] = true;
  CHECK(kind_of([&] { parse_config(top); }) == ErrorKind::ConfigInvalid);

  json no_out = two_level_tpm();
  CHECK(kind_of([&] { parse_config(no_out); }) == ErrorKind::ConfigInvalid);
  CHECK(parse_config(no_out, fs::path("y")).output_dir == fs::path("y"));

  json bad_type = two_level_tpm();
  bad_type["output_dir"] = "x";
  bad_type["parameters"]["beta"] = "warm";
  CHECK(message_of([&] { parse_config(bad_type); }).find("parameters.beta") != std::string::npos);

  json bad_axis = {{"scenario", "ising"},
                   {"output_dir", "x"},
                   {"parameters", {{"length", 8}, {"lambda0", 0.5}}},
                   {"sweep", {{"parameter", "gamma"}, {"values", {1.0}}}}};
  CHECK(message_of([&] { parse_config(bad_axis); }).find("sweep.parameter") != std::string::npos);
}

TEST_CASE("tpm scenario writes the two-level distribution") {
  const auto dir = scratch("tpm");
  const auto m = run_scenario(parse_config(two_level_tpm(), dir));
  CHECK(slurp(dir / "work_distribution.csv") ==
        "work,probability\n0.000000000000,0.500000000000\n2.000000000000,0.500000000000\n");
  CHECK(m.all_passed());
  CHECK(fs::exists(dir / "manifest.json"));
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["artifacts"].size() == m.artifacts.size());
  for (const auto& a : m.artifacts) CHECK(a.sha256 == sha256_file(dir / a.path));
  fs::remove_all(dir);
}

TEST_CASE("identical configs give identical hashes") {
  json doc = two_level_tpm();
  doc["seed"] = 11;
  doc["parameters"]["protocol"] = "random_unitary";
  doc["parameters"]["beta"] = 0.7;
  const auto a = run_scenario(parse_config(doc, scratch("det_a")));
  const auto b = run_scenario(parse_config(doc, scratch("det_b")));
  REQUIRE(a.artifacts.size() == b.artifacts.size());
  for (std::size_t i = 0; i < a.artifacts.size(); ++i) CHECK(a.artifacts[i].sha256 == b.artifacts[i].sha256);
  doc["seed"] = 12;
  const auto c = run_scenario(parse_config(doc, scratch("det_c")));
  CHECK(c.artifacts[0].sha256 != a.artifacts[0].sha256);
  for (const char* n : {"det_a", "det_b", "det_c"}) fs::remove_all(scratch(n));
}

TEST_CASE("single-point sweep matches a plain run") {
  json plain = {{"scenario", "ratefn"}, {"parameters", {{"length", 100}, {"lambda0", 1.5}, {"lambda_f", 1.2}}}};
  json swept = plain;
  swept["parameters"].erase("lambda_f");
  swept["sweep"] = {{"parameter", "lambda_f"}, {"values", {1.2}}};
  const auto pdir = scratch("plain"), dir = scratch("swept");
  const auto a = run_scenario(parse_config(plain, pdir));
  const auto b = sweep(parse_config(swept, dir), 1);
  for (const auto& art : a.artifacts) CHECK(sha256_file(pdir / art.path) == sha256_file(dir / "point_000" / art.path));
  CHECK(b.artifacts.size() == a.artifacts.size() + 1);
  const auto agg = slurp(dir / "aggregate.csv");
  CHECK(std::count(agg.begin(), agg.end(), '\n') == 2);
  fs::remove_all(dir);
  fs::remove_all(pdir);
}

TEST_CASE("sweep aggregate order ignores concurrency") {
  json doc = {{"scenario", "impurity"},
              {"parameters", {{"potential", 0.3}, {"channels", 2}}},
              {"sweep", {{"parameter", "n_particles"}, {"values", {50, 100, 200, 25}}}}};
  const auto seq = scratch("seq"), par = scratch("par");
  sweep(parse_config(doc, seq), 1);
  sweep(parse_config(doc, par), 3);
  const auto a = slurp(seq / "aggregate.csv");
  CHECK(a == slurp(par / "aggregate.csv"));
  CHECK(a.rfind("N,overlap,fitted_alpha_so_far\n50,", 0) == 0);
  CHECK(a.find("\n25,") != std::string::npos);
  fs::remove_all(seq);
  fs::remove_all(par);
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(3) == 3);
  setenv("QUENCHLAB_THREADS", "5", 1);
  CHECK(resolve_threads(std::nullopt) == 5);
  unsetenv("QUENCHLAB_THREADS");
  CHECK(resolve_threads(std::nullopt) == 1);
}

TEST_CASE("invariant suite passes") {
  for (const auto& c : invariant_suite()) {
    INFO(c.name << " " << c.detail);
    CHECK(c.passed);
  }
}
