// dr_track: batch runner for the setpoint tracking experiments.
//
//   dr_track run --config FILE [--seed U64] [--out DIR] [--trials N] [--scenario tcl|ev]
//                [--feedback LIST] [--rounds T] [--rho R] [--lambda L] [--quiet]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.
// DR_TRACK_OUT overrides the configured output directory; --out overrides both.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "drtrack/config.hpp"
#include "drtrack/format.hpp"
#include "drtrack/output.hpp"
#include "drtrack/sim.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

bool is_config_error(drtrack::ErrorCode code) {
  return code == drtrack::ErrorCode::invalid_configuration || code == drtrack::ErrorCode::invalid_ranges;
}

void write_manifest_file(const std::filesystem::path& path, const drtrack::ExperimentConfig& cfg,
                         const drtrack::ManifestInfo& info) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw drtrack::Error(drtrack::ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  drtrack::write_manifest(out, cfg, info);
}

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::int64_t> trials;
  std::optional<std::string> scenario;
  std::optional<std::string> feedback;
  std::optional<std::int64_t> rounds;
  std::optional<double> rho;
  std::optional<double> lambda;
  bool quiet = false;
};

int run(const RunOptions& opt) {
  using namespace drtrack;
  ExperimentConfig cfg;
  try {
    RawConfig overrides;
    if (opt.seed) overrides.emplace_back("experiment.seed", std::to_string(*opt.seed));
    if (opt.trials) overrides.emplace_back("experiment.trials", format_number(*opt.trials));
    if (opt.scenario) overrides.emplace_back("experiment.scenario", *opt.scenario);
    if (opt.feedback) overrides.emplace_back("experiment.feedback", *opt.feedback);
    if (opt.rounds) overrides.emplace_back("experiment.rounds", format_number(*opt.rounds));
    if (opt.rho) overrides.emplace_back("regularization.rho", format_number(*opt.rho));
    if (opt.lambda) overrides.emplace_back("regularization.lambda", format_number(*opt.lambda));
    if (opt.out)
      overrides.emplace_back("experiment.out", *opt.out);
    else if (const char* env = std::getenv("DR_TRACK_OUT"); env != nullptr && *env != '\0')
      overrides.emplace_back("experiment.out", env);
    cfg = load_config(opt.config, overrides);
  } catch (const Error& e) {
    std::cerr << "dr_track: configuration error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    const auto start = std::chrono::steady_clock::now();
    const std::filesystem::path dir(cfg.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io_failure, "cannot create output directory '" + dir.string() + "'");

    ManifestInfo info;
    info.version = DRTRACK_VERSION;
    info.outputs = {"rounds.csv", "summary.csv", "trajectories.csv", "fleet.txt"};
    write_manifest_file(dir / "manifest.txt", cfg, info);

    std::vector<RegimeResult> results;
    for (const auto& cell : cfg.cells) {
      if (!opt.quiet)
        std::cerr << "running " << to_string(cell.scenario) << "/" << to_string(cell.feedback) << " ("
                  << cell.trials << " trials, T = " << cell.rounds << ", N = " << cell.loads << ")\n";
      results.push_back(run_regime(cell));
    }
    info.outputs = emit_outputs(results, dir);
    info.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_manifest_file(dir / "manifest.txt", cfg, info);

    if (!opt.quiet) {
      std::cout << summary_table(results);
      std::cout << "\noutputs written to " << dir.string() << '\n';
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "dr_track: " << (is_config_error(e.code()) ? "configuration error: " : "error: ") << e.what()
              << '\n';
    return is_config_error(e.code()) ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "dr_track: error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online convex optimization for demand-response setpoint tracking"};
  app.set_version_flag("--version", std::string(DRTRACK_VERSION));
  app.require_subcommand(1);

  RunOptions opt;
  auto* cmd = app.add_subcommand("run", "Run the experiments described by a config file");
  cmd->add_option("--config", opt.config, "Experiment config file")->required();
  cmd->add_option("--seed", opt.seed, "Base random seed");
  cmd->add_option("--out", opt.out, "Output directory");
  cmd->add_option("--trials", opt.trials, "Trials per feedback regime");
  cmd->add_option("--scenario", opt.scenario, "tcl or ev");
  cmd->add_option("--feedback", opt.feedback, "Comma-separated list of full, bandit, partial, bernoulli");
  cmd->add_option("--rounds", opt.rounds, "Horizon T");
  cmd->add_option("--rho", opt.rho, "Mean regularizer weight for every regime");
  cmd->add_option("--lambda", opt.lambda, "Sparsity regularizer weight for every regime");
  cmd->add_flag("--quiet", opt.quiet, "Suppress progress and the summary table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  return run(opt);
}
