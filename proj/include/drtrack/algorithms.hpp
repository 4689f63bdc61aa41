#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <variant>
#include <vector>

#include "drtrack/core.hpp"
#include "drtrack/loads.hpp"
#include "drtrack/schedule.hpp"

namespace drtrack {

// ---------------------------------------------------------------------------
// Feedback
//
// Each variant carries exactly what the aggregator is allowed to see in its
// regime. An algorithm that only accepts AggregateFeedback therefore never
// holds an individual response coordinate.
// ---------------------------------------------------------------------------

/// Every response coordinate c_t plus the effective setpoint.
struct FullFeedback {
  VectorXd response;
  double setpoint = 0.0;
};

/// Only the aggregate effect c_t^T mu_t of the played signal.
struct AggregateFeedback {
  double total = 0.0;
  double setpoint = 0.0;
};

/// Responses of the n observed loads (ordered as PartialSplit::observed) plus
/// the aggregate effect of the whole played signal.
struct PartialFeedback {
  VectorXd observed_response;
  double total = 0.0;
  double setpoint = 0.0;

  /// beta_t = total - c_F^T mu_F: contribution of the unobserved loads.
  double beta(const VectorXd& mu_observed) const { return total - observed_response.dot(mu_observed); }
};

using Feedback = std::variant<FullFeedback, AggregateFeedback, PartialFeedback>;

enum class FeedbackKind { full, aggregate, partial };

const char* to_string(FeedbackKind kind) noexcept;
FeedbackKind kind_of(const Feedback& obs) noexcept;

/// Which loads are observed individually under partial feedback.
struct PartialSplit {
  std::vector<Eigen::Index> unobserved;  ///< bandit block, N - n entries
  std::vector<Eigen::Index> observed;    ///< full-information block, n entries

  /// Observed loads are the last n indices.
  static PartialSplit trailing(Eigen::Index loads, Eigen::Index observed);

  /// `order` is a permutation of 0..N-1; its last n entries are observed.
  static PartialSplit from_order(const std::vector<Eigen::Index>& order, Eigen::Index observed);

  Eigen::Index loads() const { return static_cast<Eigen::Index>(unobserved.size() + observed.size()); }
  void validate(Eigen::Index loads) const;
};

VectorXd gather(const VectorXd& x, const std::vector<Eigen::Index>& idx);
void scatter(VectorXd& x, const std::vector<Eigen::Index>& idx, const VectorXd& values);

/// f~_F(beta_t, mu_F) = (s - beta_t - c_F^T mu_F)^2
double partial_loss_observed_view(double setpoint, double beta, const VectorXd& c_observed,
                                  const VectorXd& mu_observed);

/// f~_B(i_t, mu_B) = (s - i_t - c_B^T mu_B)^2 with i_t = c_F^T mu_F.
double partial_loss_bandit_view(double setpoint, double observed_effect, const VectorXd& c_unobserved,
                                const VectorXd& mu_unobserved);

// ---------------------------------------------------------------------------
// Algorithms
// ---------------------------------------------------------------------------

/// Round protocol shared by every algorithm:
///   const VectorXd& s = alg.play();      // signal dispatched this round
///   alg.observe(feedback_of_kind(alg.expected_feedback()));
/// play() is idempotent until observe() is called.
class OnlineAlgorithm {
 public:
  virtual ~OnlineAlgorithm() = default;

  virtual const VectorXd& play() = 0;
  virtual FeedbackKind expected_feedback() const = 0;
  virtual void observe(const Feedback& obs) = 0;

  /// Current unperturbed decision mu_t.
  const VectorXd& decision() const { return mu_; }
  /// Index t of the round about to be (or being) played, 1-based.
  std::int64_t round() const { return mean_.rounds + 1; }
  const RunningMean<double>& running_mean() const { return mean_; }
  const StepSchedule& schedule() const { return schedule_; }
  const LossParams& params() const { return params_; }
  /// True while the algorithm plays rounds that precede the metrics window.
  virtual bool in_warmup() const { return false; }
  /// Perturbation direction of the current round, if it plays one.
  const std::optional<VectorXd>& pending_direction() const { return pending_v_; }

 protected:
  OnlineAlgorithm(Eigen::Index loads, StepSchedule schedule, LossParams params);

  const VectorXd& begin_round(VectorXd played);
  void finish_round(bool advance_mean = true);
  void require_playing(const char* who) const;

  VectorXd mu_;
  RunningMean<double> mean_;
  StepSchedule schedule_;
  LossParams params_;
  VectorXd played_;
  std::optional<VectorXd> pending_v_;
  bool playing_ = false;
};

/// Composite objective gradient descent with full feedback.
class Cogd final : public OnlineAlgorithm {
 public:
  Cogd(Eigen::Index loads, StepSchedule schedule, LossParams params);
  Cogd(Box<double> box, StepSchedule schedule, LossParams params);

  const VectorXd& play() override;
  FeedbackKind expected_feedback() const override { return FeedbackKind::full; }
  void observe(const Feedback& obs) override;

 private:
  Box<double> box_;
};

/// Bandit COGD: plays mu_t + delta v_t and updates from the aggregate loss only.
class Bcogd final : public OnlineAlgorithm {
 public:
  Bcogd(Eigen::Index loads, StepSchedule schedule, LossParams params, std::uint64_t seed);

  const VectorXd& play() override;
  FeedbackKind expected_feedback() const override { return FeedbackKind::aggregate; }
  void observe(const Feedback& obs) override;

  double delta() const { return *schedule_.delta; }

 private:
  std::mt19937_64 rng_;
  Box<double> shrunk_;
};

/// Partial-bandit COGD: bandit update on the unobserved block, COGD update on
/// the observed block. The mean regularizer is not used (rho must be 0).
class Pbcogd final : public OnlineAlgorithm {
 public:
  Pbcogd(PartialSplit split, StepSchedule schedule, LossParams params, std::uint64_t seed);

  const VectorXd& play() override;
  FeedbackKind expected_feedback() const override { return FeedbackKind::partial; }
  void observe(const Feedback& obs) override;

  const PartialSplit& split() const { return split_; }
  /// beta_t of the last observed round.
  double last_beta() const { return last_beta_; }

 private:
  PartialSplit split_;
  std::mt19937_64 rng_;
  double last_beta_ = 0.0;
};

struct BernoulliOptions {
  /// Apply the mean regularizer inside the gradients. Off by default: the
  /// Bernoulli updates are defined without it and rho then only enters metrics.
  bool use_mean_regularizer = false;
  /// Play one full-information and one bandit round before round 1.
  bool warmup = true;
};

struct BernoulliPlan {
  double probability = 0.0;
  std::vector<bool> bandit_round;  ///< I_1..I_T, true = bandit feedback
  std::int64_t bandit_rounds() const;
};

/// Presamples I_t ~ Bernoulli(a / T^(1/3)) for t = 1..T.
BernoulliPlan sample_bernoulli_plan(double a, std::int64_t horizon, std::mt19937_64& rng);

/// COGD on full-feedback rounds, bandit COGD on bandit rounds, as decided by a
/// presampled plan. Bandit rounds project onto the shrunk box before playing
/// and prox back onto the full box.
class Bercogd final : public OnlineAlgorithm {
 public:
  /// Samples the plan, counts T_B and builds the schedule.
  static Bercogd create(Eigen::Index loads, std::int64_t horizon, const ProblemBounds& bounds,
                        const ScheduleTuning& tuning, LossParams params, BernoulliOptions options,
                        std::uint64_t seed);

  Bercogd(Eigen::Index loads, BernoulliPlan plan, StepSchedule schedule, LossParams params,
          BernoulliOptions options, std::uint64_t seed);

  const VectorXd& play() override;
  FeedbackKind expected_feedback() const override;
  void observe(const Feedback& obs) override;
  bool in_warmup() const override { return warmup_left_ > 0; }

  const BernoulliPlan& plan() const { return plan_; }
  double eta_full() const { return schedule_.eta; }
  double eta_bandit() const { return *schedule_.eta2; }
  double delta() const { return *schedule_.delta; }

 private:
  bool bandit_now() const;

  BernoulliPlan plan_;
  BernoulliOptions options_;
  std::mt19937_64 rng_;
  int warmup_left_ = 0;
  Box<double> box_;
};

/// COGD for an EV fleet. The decision is [mu_c; mu_d] with mu_c in [0,1]^N and
/// mu_d in [-1,0]^N; FullFeedback::response is [c_c; c_d]. The mean regularizer
/// acts on the efficiency-weighted running mean of charge and discharge.
class EvCogd final : public OnlineAlgorithm {
 public:
  EvCogd(EvEfficiencies efficiencies, StepSchedule schedule, LossParams params);

  const VectorXd& play() override;
  FeedbackKind expected_feedback() const override { return FeedbackKind::full; }
  void observe(const Feedback& obs) override;

  Eigen::Index fleet_size() const { return efficiencies_.injection.size(); }
  const RunningMean<double>& weighted_mean() const { return weighted_mean_; }

 private:
  EvEfficiencies efficiencies_;
  RunningMean<double> weighted_mean_;
  Box<double> box_;
};

}  // namespace drtrack
