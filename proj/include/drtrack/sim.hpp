#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "drtrack/algorithms.hpp"
#include "drtrack/core.hpp"
#include "drtrack/loads.hpp"
#include "drtrack/schedule.hpp"

namespace drtrack {

enum class Scenario { tcl, ev };

const char* to_string(Scenario s) noexcept;
std::optional<Scenario> parse_scenario(std::string_view text);
std::optional<ScheduleKind> parse_feedback(std::string_view text);

/// s_t = amplitude * sin(frequency * t) + offset
struct SetpointParams {
  double amplitude = 15.0;
  double frequency = 0.1;
  double offset = 155.0;

  static SetpointParams defaults(Scenario s);
};

double make_setpoint(const SetpointParams& sp, std::int64_t t);

/// One scenario x feedback cell of an experiment, with every default resolved.
struct ScenarioConfig {
  Scenario scenario = Scenario::tcl;
  ScheduleKind feedback = ScheduleKind::full;
  std::int64_t loads = 100;     ///< N
  std::int64_t observed = 10;   ///< n, partial feedback
  std::int64_t rounds = 600;    ///< T
  std::int64_t trials = 100;
  std::uint64_t seed = 1;

  LossParams params;            ///< regularized run
  double chi = 50.0;            ///< COGD updates (full; observed block of partial)
  double chi_bandit = 8000.0;   ///< BCOGD updates (bandit; unobserved block of partial)
  double chi_F = 35.0;          ///< bernoulli, full rounds
  double chi_B = 8000.0;        ///< bernoulli, bandit rounds
  double a = 7.6;               ///< bernoulli probability scale
  BernoulliOptions bernoulli;

  SetpointParams setpoint;
  NoiseModel noise;

  TclRanges tcl;
  double tcl_step_hours = 5.0 / 60.0;
  /// Fixed fleet used by every trial instead of random draws.
  std::optional<std::vector<TclParams>> tcl_fleet;

  EvParams ev;
  double ev_initial_soc = 0.75;
  double ev_step_hours = 1.0 / 60.0;

  /// Loads whose state and signal are recorded for trial 0.
  std::vector<Eigen::Index> trajectory_loads{0, 1, 2};

  /// Default settings for the cell, including its (rho, lambda) pair.
  static ScenarioConfig defaults(Scenario s, ScheduleKind feedback = ScheduleKind::full);

  /// Step-size tuning for this cell's feedback kind.
  ScheduleTuning tuning() const;
  /// Largest |s_eff| the setpoint can take, given the steady consumption.
  double setpoint_bound(double baseline_consumption) const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Feedback channel
// ---------------------------------------------------------------------------

/// Builds the observation a regime is entitled to. `response` and `played` are
/// the full vectors; the returned variant carries only what `kind` permits.
Feedback feedback_channel(FeedbackKind kind, const VectorXd& response, double setpoint, const VectorXd& played,
                          const PartialSplit* split = nullptr);

// ---------------------------------------------------------------------------
// Hindsight optimum
// ---------------------------------------------------------------------------

/// x^T Q x - 2 b^T x + constant + l1_weight ||x||_1 restricted to a box.
struct QuadraticObjective {
  Eigen::MatrixXd Q;
  VectorXd b;
  double constant = 0.0;
  double l1_weight = 0.0;
  Box<double> box;

  double value(const VectorXd& x) const;
};

/// Accumulates sum_t F_t(mu) for a fixed comparator mu as a quadratic form.
/// A fixed TCL decision has <mu>_t = mu; a fixed EV decision has weighted mean
/// alpha_t * mu_c + beta_t * mu_d with alpha_t, beta_t the efficiency-weighted
/// response averages up to t.
class LossHistory {
 public:
  static LossHistory tcl(Eigen::Index loads, LossParams params);
  static LossHistory ev(EvEfficiencies eff, LossParams params);

  void add_tcl(double s_eff, const VectorXd& c);
  void add_ev(double setpoint, const VectorXd& c_c, const VectorXd& c_d);

  std::int64_t rounds() const { return rounds_; }
  QuadraticObjective objective() const;

 private:
  LossHistory() = default;

  bool ev_ = false;
  LossParams params_;
  Eigen::MatrixXd cc_;
  VectorXd sc_;
  double ss_ = 0.0;
  std::int64_t rounds_ = 0;
  EvEfficiencies eff_;
  VectorXd sum_c_, sum_d_;
  VectorXd block_cc_, block_cd_, block_dd_;
};

struct HindsightResult {
  VectorXd mu_star;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
};

inline constexpr int kHindsightMaxIterations = 10'000;

/// Accelerated proximal gradient on the quadratic form with the closed-form
/// box-constrained soft-threshold as the prox. Returns the best iterate.
HindsightResult hindsight_optimum(const QuadraticObjective& obj, int max_iterations = kHindsightMaxIterations);

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

enum class Variant { regularized, unregularized, baseline };

const char* to_string(Variant v) noexcept;

/// Per-round series of one trial. Index k holds round t = k + 1.
struct MetricsLedger {
  std::vector<double> setpoint;         ///< s_eff
  std::vector<double> aggregate;        ///< c_t^T mu_t of the played signal
  std::vector<double> loss;             ///< tracking loss
  std::vector<double> objective;        ///< F_t(mu_t)
  std::vector<double> cumulative_loss;  ///< running sum of loss
  std::vector<double> regret;           ///< sum_{s<=t} F_s(mu_s) - t v*/T
  std::vector<double> mean_norm;        ///< ||<mu>_t||_2 (EV: weighted mean)
  std::vector<double> l1_norm;          ///< ||mu_t||_1
  std::vector<double> simultaneous;     ///< EV: 1 if a vehicle charges and discharges at once

  double hindsight_value = 0.0;          ///< min_mu sum_t F_t(mu)
  double quarter_regret = 0.0;           ///< R_{T/4} against its own hindsight optimum
  bool hindsight_converged = true;
  double K = 0.0;                        ///< max(rho^2, max_t ||c_t||^2)
  double B = 0.0;
  double regret_bound = 0.0;             ///< theoretical bound for this regime
  std::int64_t saturation_events = 0;

  std::int64_t rounds() const { return static_cast<std::int64_t>(loss.size()); }
  double final_regret() const { return regret.empty() ? 0.0 : regret.back(); }
  double cumulative_objective(std::int64_t t) const;
};

/// Per-load state (temperature or SoC) after each round and the signal played.
struct Trajectory {
  std::vector<Eigen::Index> loads;
  Eigen::MatrixXd state;   ///< rounds x loads
  Eigen::MatrixXd signal;  ///< rounds x loads; EV: mu_c + mu_d
};

/// What an observer sees after every metrics round.
struct RoundView {
  std::int64_t t = 0;
  double setpoint = 0.0;
  const VectorXd& response;
  const VectorXd& played;
  const Feedback& feedback;
  const OnlineAlgorithm& algorithm;
  const PartialSplit* split = nullptr;
};

using RoundObserver = std::function<void(const RoundView&)>;

struct TrialRun {
  MetricsLedger ledger;
  Trajectory trajectory;
  std::optional<LossHistory> history;          ///< all T rounds
  std::optional<LossHistory> quarter_history;  ///< first T/4 rounds
  std::string fleet_dump;
};

/// Runs one trial of `cfg` for the given variant. Random streams are derived
/// from (seed, trial), so variants of the same trial see the same fleet and the
/// same responses. Regret fields are filled by attach_regret.
TrialRun run_trial(const ScenarioConfig& cfg, std::int64_t trial, Variant variant,
                   const RoundObserver& observer = {});

struct HindsightPair {
  HindsightResult full;
  HindsightResult quarter;
};

HindsightPair solve_hindsight(const TrialRun& run);

/// Fills regret, hindsight_value, quarter_regret and hindsight_converged.
void attach_regret(MetricsLedger& ledger, const HindsightPair& hindsight);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct TrialSummary {
  double improvement_pct = 0.0;       ///< vs. no DR
  double mean_improvement_pct = 0.0;  ///< vs. unregularized
  double sparsity_improvement_pct = 0.0;
  double simultaneity_pct = 0.0;
  double total_loss = 0.0;
  double baseline_loss = 0.0;
  double regret_final = 0.0;
  double regret_quarter = 0.0;
  double regret_bound = 0.0;
};

/// improvement% = 100 (1 - sum loss / sum baseline loss). With `unregularized`,
/// regularizer improvements are 100 (1 - sum_t x_reg / sum_t x_unreg) for the
/// mean norm and the l1 norm series.
TrialSummary compute_metrics(const MetricsLedger& ledger, const MetricsLedger& baseline,
                             const MetricsLedger* unregularized = nullptr);

struct RegimeSummary {
  double improvement_pct = 0.0;
  double improvement_unregularized_pct = 0.0;
  double mean_improvement_pct = 0.0;
  double sparsity_improvement_pct = 0.0;
  double simultaneity_pct = 0.0;
  double simultaneity_unregularized_pct = 0.0;
  double regret_final = 0.0;
  double regret_bound = 0.0;
};

struct RegimeResult {
  ScenarioConfig config;
  std::vector<TrialSummary> regularized;    ///< per trial
  std::vector<TrialSummary> unregularized;  ///< per trial
  std::vector<MetricsLedger> ledgers;       ///< per trial, regularized
  std::vector<MetricsLedger> ledgers_unregularized;
  MetricsLedger mean_regularized;           ///< trial-averaged series
  MetricsLedger mean_unregularized;
  MetricsLedger mean_baseline;
  std::optional<Trajectory> trajectory_regularized;  ///< trial 0
  std::optional<Trajectory> trajectory_unregularized;
  std::string fleet_dump;                   ///< trial 0
  RegimeSummary summary;
};

/// Element-wise mean of equally long ledgers.
MetricsLedger average_ledgers(const std::vector<MetricsLedger>& ledgers);

RegimeResult run_regime(const ScenarioConfig& cfg);

}  // namespace drtrack
