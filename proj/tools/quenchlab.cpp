// quenchlab: run | sweep | check | schema
//
// Exit codes: 0 success, 2 config error, 3 computation error, 4 invariant failure.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "quenchlab/cli_runner.hpp"
#include "quenchlab/error.hpp"

namespace {

namespace cli = quenchlab::cli;
using quenchlab::Error;
using quenchlab::ErrorKind;

int report(const cli::ResultManifest& m, const std::filesystem::path& dir) {
  std::size_t failed = 0;
  for (const auto& c : m.invariants) {
    if (!c.passed) {
      ++failed;
      std::cerr << "invariant failed: " << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
    }
  }
  std::cout << "wrote " << m.artifacts.size() << " artifacts to " << dir.string() << "; "
            << m.invariants.size() - failed << "/" << m.invariants.size() << " invariants pass\n";
  return failed ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum quench work statistics: scenario runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<int> threads;

  auto* run = app.add_subcommand("run", "run one scenario from a JSON config");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");
  run->add_option("--threads", threads, "worker threads for sweeps");

  auto* sweep = app.add_subcommand("sweep", "run a config with a sweep axis");
  sweep->add_option("config", config_path, "config file")->required();
  sweep->add_option("--out", out_dir, "output directory (overrides output_dir)");
  sweep->add_option("--threads", threads, "worker threads");

  auto* check = app.add_subcommand("check", "run the invariant suite");
  auto* schema = app.add_subcommand("schema", "print the parameter schema");

  CLI11_PARSE(app, argc, argv);

  try {
    if (schema->parsed()) {
      std::cout << cli::format_json(cli::parameter_schema());
      return 0;
    }
    if (check->parsed()) {
      int failed = 0;
      for (const auto& c : cli::invariant_suite()) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
        failed += !c.passed;
      }
      return failed ? 4 : 0;
    }
    std::optional<std::filesystem::path> override_dir;
    if (out_dir) override_dir = *out_dir;
    cli::RunConfig config;
    try {
      config = cli::load_config(config_path, override_dir);
    } catch (const Error& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    }
    if (sweep->parsed() && !config.sweep) {
      std::cerr << "config error: sweep: no axis declared\n";
      return 2;
    }
    const auto manifest = config.sweep ? cli::sweep(config, cli::resolve_threads(threads))
                                       : cli::run_scenario(config);
    return report(manifest, config.output_dir);
  } catch (const Error& e) {
    std::cerr << (e.kind() == ErrorKind::ConfigInvalid ? "config error: " : "computation error: ") << e.what()
              << "\n";
    return e.kind() == ErrorKind::ConfigInvalid ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "computation error: " << e.what() << "\n";
    return 3;
  }
}
