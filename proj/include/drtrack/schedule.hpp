#pragma once

#include <cstdint>
#include <optional>

namespace drtrack {

enum class ScheduleKind { full, bandit, partial, bernoulli };

const char* to_string(ScheduleKind kind) noexcept;

/// Upper bound on delta so the shrunk set [delta-1, 1-delta]^N never collapses.
inline constexpr double kMaxDelta = 0.5;

/// Constants the step-size rules depend on.
struct ProblemBounds {
  double G = 1.0;  ///< gradient norm bound
  double B = 1.0;  ///< bound on f_t
  double D = 1.0;  ///< decision-set diameter
  double L = 1.0;  ///< Lipschitz constant (taken equal to G)
};

/// Conservative bounds derived from configuration for an N-load fleet whose
/// per-coordinate response is at most `response_bound` and whose effective
/// setpoint never exceeds `setpoint_bound` in magnitude:
///   D = 2 sqrt(N)
///   B = (s_max + C N)^2 + rho N
///   G = 2 C sqrt(N) (s_max + C N) + 2 rho sqrt(N),  L = G
ProblemBounds compute_bounds(std::int64_t loads, double response_bound, double setpoint_bound, double rho);

struct ScheduleDims {
  std::int64_t loads = 1;     ///< N
  std::int64_t observed = 0;  ///< n, partial feedback only
};

struct ScheduleTuning {
  double chi = 1.0;    ///< full and bandit kinds
  double chi_F = 1.0;  ///< full-information updates inside partial/bernoulli
  double chi_B = 1.0;  ///< bandit updates inside partial/bernoulli
  double a = 0.0;      ///< bernoulli probability scale, p = a / T^(1/3)
};

/// Step sizes for one algorithm run.
///
/// - full:      eta = chi D / (G sqrt(T))  (= chi sqrt(4N / (G^2 T)) for D = 2 sqrt(N))
/// - bandit:    eta = D chi / (B N T^(3/4)), delta = T^(-1/4)
/// - partial:   eta  = bandit-block step (bandit rule on the N-n unobserved loads, chi_B)
///              eta2 = observed-block step (full rule on the n observed loads, chi_F)
/// - bernoulli: eta  = eta_F = D chi_F / (G (T - T_B + 1)^(1/2))
///              eta2 = eta_B = D chi_B / (B N (T_B + 1)^(3/4)), delta = (T_B + 1)^(-1/4)
///
/// delta is always clamped to at most kMaxDelta.
struct StepSchedule {
  ScheduleKind kind = ScheduleKind::full;
  double eta = 0.0;
  std::optional<double> eta2;
  std::optional<double> delta;

  void validate() const;
};

/// Bernoulli bandit-round probability a / T^(1/3); throws invalid_configuration if it exceeds 1.
double bernoulli_probability(double a, std::int64_t horizon);

StepSchedule step_schedule(ScheduleKind kind, std::int64_t horizon, const ScheduleDims& dims,
                           const ProblemBounds& bounds, const ScheduleTuning& tuning,
                           std::optional<std::int64_t> bandit_rounds = std::nullopt);

}  // namespace drtrack
