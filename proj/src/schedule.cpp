#include "drtrack/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drtrack/error.hpp"

namespace drtrack {

const char* to_string(ScheduleKind kind) noexcept {
  switch (kind) {
    case ScheduleKind::full: return "full";
    case ScheduleKind::bandit: return "bandit";
    case ScheduleKind::partial: return "partial";
    case ScheduleKind::bernoulli: return "bernoulli";
  }
  return "?";
}

ProblemBounds compute_bounds(std::int64_t loads, double response_bound, double setpoint_bound, double rho) {
  require(loads >= 1, ErrorCode::invalid_argument, "compute_bounds: need at least one load");
  require(response_bound > 0.0 && setpoint_bound >= 0.0 && rho >= 0.0, ErrorCode::invalid_argument,
          "compute_bounds: bounds must be nonnegative");
  const double n = static_cast<double>(loads);
  const double root_n = std::sqrt(n);
  const double reach = setpoint_bound + response_bound * n;
  ProblemBounds b;
  b.D = 2.0 * root_n;
  b.B = reach * reach + rho * n;
  b.G = 2.0 * response_bound * root_n * reach + 2.0 * rho * root_n;
  b.L = b.G;
  return b;
}

void StepSchedule::validate() const {
  require(eta > 0.0 && std::isfinite(eta), ErrorCode::invalid_configuration, "step size must be > 0");
  if (eta2) require(*eta2 > 0.0 && std::isfinite(*eta2), ErrorCode::invalid_configuration, "eta2 must be > 0");
  if (delta) require(*delta > 0.0 && *delta < 1.0, ErrorCode::invalid_configuration, "delta must lie in (0, 1)");
}

double bernoulli_probability(double a, std::int64_t horizon) {
  require(horizon >= 1, ErrorCode::invalid_argument, "horizon must be >= 1");
  require(a >= 0.0, ErrorCode::invalid_configuration, "bernoulli scale a must be >= 0");
  const double p = a / std::cbrt(static_cast<double>(horizon));
  require(p <= 1.0, ErrorCode::invalid_configuration,
          "bernoulli probability a / T^(1/3) = " + std::to_string(p) + " exceeds 1");
  return p;
}

namespace {

double full_rule(double chi, double diameter, double G, double rounds) {
  return chi * diameter / (G * std::sqrt(rounds));
}

double bandit_rule(double chi, double diameter, double B, double dim, double rounds) {
  return diameter * chi / (B * dim * std::pow(rounds, 0.75));
}

double clamp_delta(double delta) { return std::min(delta, kMaxDelta); }

}  // namespace

StepSchedule step_schedule(ScheduleKind kind, std::int64_t horizon, const ScheduleDims& dims,
                           const ProblemBounds& bounds, const ScheduleTuning& tuning,
                           std::optional<std::int64_t> bandit_rounds) {
  require(horizon >= 1, ErrorCode::invalid_argument, "step_schedule: horizon must be >= 1");
  require(dims.loads >= 1, ErrorCode::invalid_argument, "step_schedule: need at least one load");
  require(bounds.G > 0.0 && bounds.B > 0.0 && bounds.D > 0.0, ErrorCode::invalid_argument,
          "step_schedule: bounds must be positive");
  const double T = static_cast<double>(horizon);
  const double N = static_cast<double>(dims.loads);

  StepSchedule s;
  s.kind = kind;
  switch (kind) {
    case ScheduleKind::full:
      s.eta = full_rule(tuning.chi, bounds.D, bounds.G, T);
      break;
    case ScheduleKind::bandit:
      s.eta = bandit_rule(tuning.chi, bounds.D, bounds.B, N, T);
      s.delta = clamp_delta(std::pow(T, -0.25));
      break;
    case ScheduleKind::partial: {
      require(dims.observed >= 1 && dims.observed <= dims.loads - 1, ErrorCode::invalid_configuration,
              "partial feedback needs 1 <= n <= N-1 (n = " + std::to_string(dims.observed) +
                  ", N = " + std::to_string(dims.loads) + ")");
      const double n = static_cast<double>(dims.observed);
      const double unobserved = N - n;
      // Block diameters of the symmetric box scale with sqrt of the block size.
      const double d_bandit = bounds.D * std::sqrt(unobserved / N);
      const double d_full = bounds.D * std::sqrt(n / N);
      s.eta = bandit_rule(tuning.chi_B, d_bandit, bounds.B, unobserved, T);
      s.eta2 = full_rule(tuning.chi_F, d_full, bounds.G, T);
      s.delta = clamp_delta(std::pow(T, -0.25));
      break;
    }
    case ScheduleKind::bernoulli: {
      bernoulli_probability(tuning.a, horizon);
      require(bandit_rounds.has_value(), ErrorCode::invalid_configuration,
              "bernoulli schedule needs the realized number of bandit rounds");
      require(*bandit_rounds >= 0 && *bandit_rounds <= horizon, ErrorCode::invalid_argument,
              "bandit round count out of range");
      const double tb = static_cast<double>(*bandit_rounds);
      s.eta = full_rule(tuning.chi_F, bounds.D, bounds.G, T - tb + 1.0);
      s.eta2 = bandit_rule(tuning.chi_B, bounds.D, bounds.B, N, tb + 1.0);
      s.delta = clamp_delta(std::pow(tb + 1.0, -0.25));
      break;
    }
  }
  s.validate();
  return s;
}

}  // namespace drtrack
