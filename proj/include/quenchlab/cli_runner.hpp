#pragma once

// Config-driven scenario runner behind the `quenchlab` executable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace quenchlab::cli {

inline constexpr const char* kVersion = "0.1.0";

enum class Scenario { Tpm, Ising, RateFn, Impurity, Thermal };

struct SweepAxis {
  std::string parameter;
  std::vector<nlohmann::json> values;
};

struct RunConfig {
  Scenario scenario = Scenario::Tpm;
  nlohmann::json parameters = nlohmann::json::object();
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  int precision = 12;
  std::optional<SweepAxis> sweep;
  nlohmann::json source;  // the document as given, echoed in the manifest
};

/// Strict validation: unknown keys, missing required keys and type errors raise
/// ConfigInvalid with the offending path (e.g. "parameters.lambda_f").
/// `output_override` replaces output_dir, which is otherwise required.
RunConfig parse_config(const nlohmann::json& doc,
                       const std::optional<std::filesystem::path>& output_override = {});
RunConfig load_config(const std::filesystem::path& path,
                      const std::optional<std::filesystem::path>& output_override = {});

/// Schema of every scenario's parameter map, as JSON.
nlohmann::json parameter_schema();

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

/// Fixed-point doubles with `precision` decimals, integers verbatim, "inf",
/// "-inf" and "nan" for non-finite values, no negative zero.
std::string format_csv(const Table& table, int precision);
void emit_csv(const Table& table, const std::filesystem::path& path, int precision);
/// Sorted keys, two-space indent, trailing LF.
std::string format_json(const nlohmann::json& value);
void emit_json(const nlohmann::json& value, const std::filesystem::path& path);
/// Number for JSON output; non-finite values become their string sentinel.
nlohmann::json json_number(double x);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct InvariantCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Artifact {
  std::string path;  // relative to output_dir
  std::string sha256;
};

struct ResultManifest {
  nlohmann::json config;
  std::vector<Artifact> artifacts;
  double wall_time_seconds = 0.0;
  std::string version = kVersion;
  std::vector<InvariantCheck> invariants;

  bool all_passed() const;
  nlohmann::json to_json() const;
};

/// Runs one scenario, writes its files and manifest.json into output_dir.
ResultManifest run_scenario(const RunConfig& config);

/// One run per axis value in output_dir/point_NNN, then aggregate.csv in axis
/// order. Points are spread over `threads` workers.
ResultManifest sweep(const RunConfig& config, int threads = 1);

/// --threads value if given, else QUENCHLAB_THREADS, else 1.
int resolve_threads(std::optional<int> flag);

/// Cross-module identity checks at small sizes, including a determinism run.
std::vector<InvariantCheck> invariant_suite();

}  // namespace quenchlab::cli
