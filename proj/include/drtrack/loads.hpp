#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "drtrack/core.hpp"

namespace drtrack {

using Rng = std::mt19937_64;

/// Gaussian noise conditioned on [lo, hi].
struct NoiseModel {
  double mean = 0.0;
  double sd = 0.5;
  double lo = -1.0;
  double hi = 1.0;

  void validate() const;
};

/// Rejection sampler for N(mean, sd^2) restricted to [lo, hi]. sd == 0 returns
/// `mean` (which must lie in the interval).
double sample_truncated_gaussian(double mean, double sd, double lo, double hi, Rng& rng);

inline constexpr int kMaxTruncationRejections = 1'000'000;

// ---------------------------------------------------------------------------
// Thermostatically controlled loads
// ---------------------------------------------------------------------------

struct TclParams {
  double R = 2.0;        ///< thermal resistance, degC/kW
  double C = 10.0;       ///< thermal capacitance, kWh/degC
  double P_R = 14.0;     ///< rated power, kW
  double COP = 2.5;      ///< coefficient of performance
  double theta_d = 22.5; ///< desired temperature, degC
};

struct TclState {
  double theta = 0.0;  ///< degC
};

struct SteadyControl {
  double m_bar = 0.0;  ///< duty that holds theta_d at ambient theta_a
  double c0 = 0.0;     ///< average adjustment response, p * min(m_bar, 1 - m_bar)
  double p = 0.0;      ///< electrical power P_R / COP
};

/// Cooling regime only (theta_a > theta_d); throws infeasible_load unless 0 < m_bar < 1.
SteadyControl tcl_steady_control(const TclParams& params, double theta_a);

/// theta_{t+1} = b theta_t + (1 - b)(theta_a - m R P_R),  b = exp(-h / (R C)).
TclState tcl_temp_step(const TclState& state, const TclParams& params, double theta_a, double m, double h_hours);

/// Duty cycle m = m_bar + mu * min(m_bar, 1 - m_bar); mu = 0 holds steady state.
double tcl_apply_signal(double mu, double m_bar);

/// c_t(i) = c0(i) + w, one truncated-Gaussian draw per load.
VectorXd tcl_observe_response(const VectorXd& c0, Rng& rng, const NoiseModel& noise);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct TclRanges {
  Range R{1.5, 2.5};
  Range C{8.0, 12.0};
  Range P_R{10.0, 18.0};
  Range COP{2.0, 3.0};
  Range theta_d{20.0, 25.0};
  double theta_a = 30.0;
  /// Draws whose steady duty falls outside (m_bar_lo, m_bar_hi) are redrawn.
  double m_bar_lo = 0.05;
  double m_bar_hi = 0.95;

  void validate() const;
};

inline constexpr int kMaxFleetRejections = 1000;

class TclFleet {
 public:
  TclFleet(std::vector<TclParams> params, double theta_a);

  Eigen::Index size() const { return static_cast<Eigen::Index>(params_.size()); }
  const std::vector<TclParams>& params() const { return params_; }
  double theta_a() const { return theta_a_; }
  const VectorXd& m_bar() const { return m_bar_; }
  const VectorXd& c0() const { return c0_; }
  const VectorXd& power() const { return p_; }
  /// p^T m_bar: steady-state consumption the setpoint is measured against.
  double baseline_consumption() const { return p_.dot(m_bar_); }
  /// Largest c0 + noise.hi.
  double response_bound(const NoiseModel& noise) const;

  const std::vector<TclState>& state() const { return state_; }
  VectorXd temperatures() const;
  /// Applies one signal per load for h hours.
  void step(const VectorXd& mu, double h_hours);

 private:
  std::vector<TclParams> params_;
  double theta_a_;
  VectorXd m_bar_, c0_, p_;
  std::vector<TclState> state_;
};

/// Uniform parameter draws from `ranges`; every load starts at theta_d.
TclFleet tcl_fleet_init(Eigen::Index loads, Rng& rng, const TclRanges& ranges = {});

// ---------------------------------------------------------------------------
// Electric vehicles
// ---------------------------------------------------------------------------

struct EvParams {
  double eta_inj = 0.85;        ///< injection efficiency
  double eta_ext = 0.85;        ///< extraction efficiency
  double capacity = 10.0;       ///< kWh
  double charge_rate = 3.0;     ///< kW
  double discharge_rate = 1.5;  ///< kW

  void validate() const;
};

struct EvState {
  double soc = 0.75;
  /// Running mean of eta_inj c_c mu_c + c_d mu_d / eta_ext for this vehicle.
  double weighted_mean = 0.0;
  std::int64_t rounds = 0;
  std::int64_t saturation_events = 0;
};

struct EvEfficiencies {
  VectorXd injection;
  VectorXd extraction;
};

struct EvResponse {
  VectorXd charge;     ///< c_c
  VectorXd discharge;  ///< c_d
};

/// c_c(i) = charge_rate + w, c_d(i) = discharge_rate + w', independent draws.
EvResponse ev_observe_response(const std::vector<EvParams>& params, Rng& rng, const NoiseModel& noise);

/// eta_inj c_c mu_c + c_d mu_d / eta_ext, per load.
VectorXd ev_weighted_signal(const EvEfficiencies& eff, const VectorXd& c_c, const VectorXd& c_d,
                            const VectorXd& mu_c, const VectorXd& mu_d);

struct EvLossGradient {
  double loss = 0.0;
  VectorXd grad_c;
  VectorXd grad_d;
};

/// (s - c_c^T mu_c - c_d^T mu_d)^2 + rho ||<mu^w>_t||^2 and its gradient in
/// (mu_c, mu_d). `weighted_mean_prev` holds <mu^w>_{t-1}; t is the current round.
EvLossGradient ev_loss_and_gradient(double setpoint, const VectorXd& c_c, const VectorXd& c_d,
                                    const VectorXd& mu_c, const VectorXd& mu_d, double rho,
                                    const RunningMean<double>& weighted_mean_prev, std::int64_t t,
                                    const EvEfficiencies& eff);

/// S' = clamp(S + (h/B)[eta_inj c_c mu_c + c_d mu_d / eta_ext], 0, 1); clamping counts
/// as a saturation event.
EvState ev_soc_step(const EvState& state, const EvParams& params, double c_c, double c_d, double mu_c, double mu_d,
                    double h_hours);

class EvFleet {
 public:
  EvFleet(std::vector<EvParams> params, double initial_soc);

  Eigen::Index size() const { return static_cast<Eigen::Index>(params_.size()); }
  const std::vector<EvParams>& params() const { return params_; }
  const std::vector<EvState>& state() const { return state_; }
  EvEfficiencies efficiencies() const;
  VectorXd soc() const;
  VectorXd weighted_mean() const;
  std::int64_t saturation_events() const;
  /// max(charge_rate, discharge_rate) + noise.hi
  double response_bound(const NoiseModel& noise) const;

  void step(const EvResponse& response, const VectorXd& mu_c, const VectorXd& mu_d, double h_hours);

 private:
  std::vector<EvParams> params_;
  std::vector<EvState> state_;
};

EvFleet ev_fleet_init(Eigen::Index loads, const EvParams& params = {}, double initial_soc = 0.75);

// ---------------------------------------------------------------------------
// Fleet parameter files: '#' comment lines, then one whitespace-separated row
// per load.
//   tcl: index R C P_R COP theta_d
//   ev:  index eta_inj eta_ext capacity charge_rate discharge_rate
// ---------------------------------------------------------------------------

void write_tcl_fleet(std::ostream& out, const TclFleet& fleet);
std::vector<TclParams> read_tcl_fleet(std::istream& in);
void write_ev_fleet(std::ostream& out, const EvFleet& fleet);
std::vector<EvParams> read_ev_fleet(std::istream& in);

}  // namespace drtrack
