#pragma once

#include <filesystem>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "drtrack/sim.hpp"

namespace drtrack {

// Experiment files are flat `key = value` text grouped in sections:
//
//   [experiment]  scenario feedback trials rounds loads observed seed trajectory_loads out
//   [regularization] rho lambda rho.<feedback> lambda.<feedback> bernoulli_mean_regularizer
//   [tuning]      chi chi_bandit chi_F chi_B a bernoulli_warmup
//   [setpoint]    amplitude frequency offset
//   [noise]       mean sd lo hi
//   [tcl]         R_lo R_hi C_lo C_hi P_R_lo P_R_hi COP_lo COP_hi theta_d_lo theta_d_hi
//                 theta_a m_bar_lo m_bar_hi step_minutes fleet_file
//   [ev]          eta_inj eta_ext capacity charge_rate discharge_rate initial_soc step_minutes
//
// Lines starting with '#' or ';' are comments. Only experiment.scenario and
// experiment.feedback are required; feedback takes a comma-separated list.

struct ExperimentConfig {
  std::vector<ScenarioConfig> cells;  ///< one per listed feedback, in order
  std::string out = "results";
  std::string fleet_file;  ///< absolute path when a fixed TCL fleet is loaded
};

/// `section.key` = value pairs in file order.
using RawConfig = std::vector<std::pair<std::string, std::string>>;

RawConfig parse_raw_config(std::istream& in, const std::string& origin);

/// Sets (or replaces) a key. Setting regularization.rho or .lambda drops the
/// per-feedback variants so the override applies everywhere.
void set_override(RawConfig& raw, const std::string& key, const std::string& value);

/// `base_dir` resolves a relative tcl.fleet_file.
ExperimentConfig resolve_config(const RawConfig& raw, const std::filesystem::path& base_dir = {});

ExperimentConfig load_config(const std::filesystem::path& path, const RawConfig& overrides = {});

/// Every key with its resolved value; parsing the result gives back the same experiment.
std::string render_config(const ExperimentConfig& cfg);

/// All keys the parser accepts, as `section.key`.
std::vector<std::string> valid_keys();

}  // namespace drtrack
