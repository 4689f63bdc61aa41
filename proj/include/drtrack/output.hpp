#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "drtrack/config.hpp"
#include "drtrack/sim.hpp"

namespace drtrack {

// Column layouts. All numbers use the shortest round-trip form with '.' as the
// decimal separator; rows end in '\n'.
//
// rounds.csv        scenario,feedback,variant,t,setpoint,aggregate_adjustment,loss,
//                   cumulative_loss,regret,mean_norm,l1_norm   (trial-averaged)
// summary.csv       scenario,feedback,trials,rho,lambda,improvement_pct,
//                   improvement_unregularized_pct,mean_improvement_pct,
//                   sparsity_improvement_pct,simultaneity_pct,
//                   simultaneity_unregularized_pct,regret_final,regret_bound
// trajectories.csv  scenario,feedback,variant,load,t,state,signal   (trial 0)

extern const char* const kRoundsHeader;
extern const char* const kSummaryHeader;
extern const char* const kTrajectoriesHeader;

void write_rounds_csv(std::ostream& out, const std::vector<RegimeResult>& results);
void write_summary_csv(std::ostream& out, const std::vector<RegimeResult>& results);
void write_trajectories_csv(std::ostream& out, const std::vector<RegimeResult>& results);

struct ManifestInfo {
  std::string version;
  double duration_seconds = -1.0;  ///< negative while the run is in progress
  std::vector<std::string> outputs;
};

/// Resolved configuration plus '#' lines for version, duration and outputs; the
/// file parses as a config.
void write_manifest(std::ostream& out, const ExperimentConfig& cfg, const ManifestInfo& info);

/// Writes rounds.csv, summary.csv, trajectories.csv and fleet.txt into `dir`
/// and returns their file names.
std::vector<std::string> emit_outputs(const std::vector<RegimeResult>& results, const std::filesystem::path& dir);

/// Improvement table, one row per regime.
std::string summary_table(const std::vector<RegimeResult>& results);

}  // namespace drtrack
