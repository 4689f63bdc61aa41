#include "drtrack/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace drtrack {

const char* to_string(FeedbackKind kind) noexcept {
  switch (kind) {
    case FeedbackKind::full: return "full";
    case FeedbackKind::aggregate: return "aggregate";
    case FeedbackKind::partial: return "partial";
  }
  return "?";
}

FeedbackKind kind_of(const Feedback& obs) noexcept {
  switch (obs.index()) {
    case 0: return FeedbackKind::full;
    case 1: return FeedbackKind::aggregate;
    default: return FeedbackKind::partial;
  }
}

PartialSplit PartialSplit::trailing(Eigen::Index loads, Eigen::Index observed) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(std::max<Eigen::Index>(loads, 0)));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  return from_order(order, observed);
}

PartialSplit PartialSplit::from_order(const std::vector<Eigen::Index>& order, Eigen::Index observed) {
  const auto loads = static_cast<Eigen::Index>(order.size());
  require(observed >= 1 && observed <= loads - 1, ErrorCode::invalid_configuration,
          "partial feedback needs 1 <= n <= N-1 (n = " + std::to_string(observed) + ", N = " +
              std::to_string(loads) + ")");
  PartialSplit split;
  const auto cut = order.begin() + (loads - observed);
  split.unobserved.assign(order.begin(), cut);
  split.observed.assign(cut, order.end());
  split.validate(loads);
  return split;
}

void PartialSplit::validate(Eigen::Index n_loads) const {
  require(loads() == n_loads, ErrorCode::invalid_configuration, "partial split does not cover the fleet");
  require(!observed.empty() && !unobserved.empty(), ErrorCode::invalid_configuration,
          "partial split needs both blocks nonempty");
  std::vector<bool> seen(static_cast<std::size_t>(n_loads), false);
  for (const auto* block : {&unobserved, &observed}) {
    for (Eigen::Index i : *block) {
      require(i >= 0 && i < n_loads && !seen[static_cast<std::size_t>(i)], ErrorCode::invalid_configuration,
              "partial split order is not a permutation");
      seen[static_cast<std::size_t>(i)] = true;
    }
  }
}

VectorXd gather(const VectorXd& x, const std::vector<Eigen::Index>& idx) {
  VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(idx[k]);
  return out;
}

void scatter(VectorXd& x, const std::vector<Eigen::Index>& idx, const VectorXd& values) {
  require(values.size() == static_cast<Eigen::Index>(idx.size()), ErrorCode::invalid_argument,
          "scatter: length mismatch");
  for (std::size_t k = 0; k < idx.size(); ++k) x(idx[k]) = values(static_cast<Eigen::Index>(k));
}

double partial_loss_observed_view(double setpoint, double beta, const VectorXd& c_observed,
                                  const VectorXd& mu_observed) {
  return tracking_loss(setpoint - beta, c_observed, mu_observed);
}

double partial_loss_bandit_view(double setpoint, double observed_effect, const VectorXd& c_unobserved,
                                const VectorXd& mu_unobserved) {
  return tracking_loss(setpoint - observed_effect, c_unobserved, mu_unobserved);
}

// --- base -------------------------------------------------------------------

OnlineAlgorithm::OnlineAlgorithm(Eigen::Index loads, StepSchedule schedule, LossParams params)
    : mu_(VectorXd::Zero(loads)),
      mean_(RunningMean<double>::zero(loads)),
      schedule_(schedule),
      params_(params) {
  require(loads >= 1, ErrorCode::invalid_argument, "algorithm needs at least one coordinate");
  schedule_.validate();
  params_.validate();
}

const VectorXd& OnlineAlgorithm::begin_round(VectorXd played) {
  played_ = std::move(played);
  require(played_.allFinite(), ErrorCode::invariant_violation, "played signal is not finite");
  playing_ = true;
  return played_;
}

void OnlineAlgorithm::finish_round(bool advance_mean) {
  if (advance_mean) mean_ = running_mean_update(mean_, played_);
  playing_ = false;
  pending_v_.reset();
}

void OnlineAlgorithm::require_playing(const char* who) const {
  require(playing_, ErrorCode::invalid_argument, std::string(who) + ": observe() called before play()");
}

namespace {

template <typename T>
const T& expect(const Feedback& obs, const char* who) {
  const T* p = std::get_if<T>(&obs);
  if (p == nullptr)
    throw Error(ErrorCode::feedback_mismatch,
                std::string(who) + ": unexpected " + to_string(kind_of(obs)) + " feedback");
  return *p;
}

void require_length(const VectorXd& v, Eigen::Index n, const char* who) {
  require(v.size() == n, ErrorCode::feedback_mismatch,
          std::string(who) + ": response has " + std::to_string(v.size()) + " entries, expected " +
              std::to_string(n));
}

void require_kind(const StepSchedule& s, ScheduleKind kind, const char* who) {
  require(s.kind == kind, ErrorCode::invalid_configuration,
          std::string(who) + " needs a " + to_string(kind) + " schedule, got " + to_string(s.kind));
}

}  // namespace

// --- COGD -------------------------------------------------------------------

Cogd::Cogd(Eigen::Index loads, StepSchedule schedule, LossParams params)
    : Cogd(Box<double>::symmetric(loads, 1.0), schedule, params) {}

Cogd::Cogd(Box<double> box, StepSchedule schedule, LossParams params)
    : OnlineAlgorithm(box.size(), schedule, params), box_(std::move(box)) {
  box_.validate();
  require_kind(schedule_, ScheduleKind::full, "COGD");
  mu_ = VectorXd::Zero(box_.size()).cwiseMax(box_.lo).cwiseMin(box_.hi);
}

const VectorXd& Cogd::play() {
  if (playing_) return played_;
  return begin_round(mu_);
}

void Cogd::observe(const Feedback& obs) {
  require_playing("COGD");
  const auto& full = expect<FullFeedback>(obs, "COGD");
  require_length(full.response, mu_.size(), "COGD");
  const VectorXd grad = full_gradient(full.setpoint, full.response, played_, params_, mean_, round());
  mu_ = prox_step(mu_, grad, schedule_.eta, params_.lambda, box_);
  finish_round();
}

// --- BCOGD ------------------------------------------------------------------

Bcogd::Bcogd(Eigen::Index loads, StepSchedule schedule, LossParams params, std::uint64_t seed)
    : OnlineAlgorithm(loads, schedule, params), rng_(seed) {
  require_kind(schedule_, ScheduleKind::bandit, "BCOGD");
  require(schedule_.delta.has_value(), ErrorCode::invalid_configuration, "BCOGD needs delta");
  shrunk_ = Box<double>::shrunk(loads, *schedule_.delta);
}

const VectorXd& Bcogd::play() {
  if (playing_) return played_;
  VectorXd v = sample_unit_sphere<double>(mu_.size(), rng_);
  VectorXd played = mu_ + delta() * v;
  require(Box<double>::symmetric(mu_.size(), 1.0).contains(played, 1e-12), ErrorCode::invariant_violation,
          "BCOGD played a signal outside [-1, 1]^N");
  pending_v_ = std::move(v);
  return begin_round(std::move(played));
}

void Bcogd::observe(const Feedback& obs) {
  require_playing("BCOGD");
  const auto& agg = expect<AggregateFeedback>(obs, "BCOGD");
  const double err = agg.setpoint - agg.total;
  double f = err * err;
  if (params_.rho != 0.0) f += params_.rho * mean_.preview(played_).squaredNorm();
  const VectorXd g = gradient_estimate(f, *pending_v_, mu_.size(), delta());
  mu_ = prox_step(mu_, g, schedule_.eta, params_.lambda, shrunk_);
  finish_round();
}

// --- PBCOGD -----------------------------------------------------------------

Pbcogd::Pbcogd(PartialSplit split, StepSchedule schedule, LossParams params, std::uint64_t seed)
    : OnlineAlgorithm(split.loads(), schedule, params), split_(std::move(split)), rng_(seed) {
  split_.validate(split_.loads());
  require_kind(schedule_, ScheduleKind::partial, "PBCOGD");
  require(schedule_.eta2.has_value() && schedule_.delta.has_value(), ErrorCode::invalid_configuration,
          "PBCOGD needs eta2 and delta");
  require(params_.rho == 0.0, ErrorCode::invalid_configuration,
          "PBCOGD is defined without the mean regularizer; rho must be 0");
}

const VectorXd& Pbcogd::play() {
  if (playing_) return played_;
  const auto nb = static_cast<Eigen::Index>(split_.unobserved.size());
  VectorXd v = sample_unit_sphere<double>(nb, rng_);
  VectorXd played = mu_;
  scatter(played, split_.unobserved, gather(mu_, split_.unobserved) + *schedule_.delta * v);
  require(Box<double>::symmetric(mu_.size(), 1.0).contains(played, 1e-12), ErrorCode::invariant_violation,
          "PBCOGD played a signal outside [-1, 1]^N");
  pending_v_ = std::move(v);
  return begin_round(std::move(played));
}

void Pbcogd::observe(const Feedback& obs) {
  require_playing("PBCOGD");
  const auto& part = expect<PartialFeedback>(obs, "PBCOGD");
  const auto n = static_cast<Eigen::Index>(split_.observed.size());
  const auto nb = static_cast<Eigen::Index>(split_.unobserved.size());
  require_length(part.observed_response, n, "PBCOGD");
  const double delta = *schedule_.delta;

  const VectorXd mu_f = gather(mu_, split_.observed);
  const VectorXd mu_b = gather(mu_, split_.unobserved);
  last_beta_ = part.beta(mu_f);
  const double err = part.setpoint - part.total;

  const VectorXd g_b = gradient_estimate(err * err, *pending_v_, nb, delta);
  const VectorXd g_f = -2.0 * (part.setpoint - last_beta_ - part.observed_response.dot(mu_f)) * part.observed_response;

  scatter(mu_, split_.unobserved, prox_step(mu_b, g_b, schedule_.eta, params_.lambda, Box<double>::shrunk(nb, delta)));
  scatter(mu_, split_.observed, prox_step(mu_f, g_f, *schedule_.eta2, params_.lambda, Box<double>::symmetric(n, 1.0)));
  finish_round();
}

// --- BerCOGD ----------------------------------------------------------------

std::int64_t BernoulliPlan::bandit_rounds() const {
  return static_cast<std::int64_t>(std::count(bandit_round.begin(), bandit_round.end(), true));
}

BernoulliPlan sample_bernoulli_plan(double a, std::int64_t horizon, std::mt19937_64& rng) {
  BernoulliPlan plan;
  plan.probability = bernoulli_probability(a, horizon);
  std::bernoulli_distribution coin(plan.probability);
  plan.bandit_round.resize(static_cast<std::size_t>(horizon));
  for (std::size_t t = 0; t < plan.bandit_round.size(); ++t) plan.bandit_round[t] = coin(rng);
  return plan;
}

Bercogd Bercogd::create(Eigen::Index loads, std::int64_t horizon, const ProblemBounds& bounds,
                        const ScheduleTuning& tuning, LossParams params, BernoulliOptions options,
                        std::uint64_t seed) {
  std::seed_seq seq{seed, std::uint64_t{0xB5}};
  std::mt19937_64 plan_rng(seq);
  BernoulliPlan plan = sample_bernoulli_plan(tuning.a, horizon, plan_rng);
  const StepSchedule schedule = step_schedule(ScheduleKind::bernoulli, horizon, ScheduleDims{loads, 0}, bounds,
                                              tuning, plan.bandit_rounds());
  return Bercogd(loads, std::move(plan), schedule, params, options, seed);
}

Bercogd::Bercogd(Eigen::Index loads, BernoulliPlan plan, StepSchedule schedule, LossParams params,
                 BernoulliOptions options, std::uint64_t seed)
    : OnlineAlgorithm(loads, schedule, params),
      plan_(std::move(plan)),
      options_(options),
      rng_(seed),
      warmup_left_(options.warmup ? 2 : 0),
      box_(Box<double>::symmetric(loads, 1.0)) {
  require_kind(schedule_, ScheduleKind::bernoulli, "BerCOGD");
  require(schedule_.eta2.has_value() && schedule_.delta.has_value(), ErrorCode::invalid_configuration,
          "BerCOGD needs eta_B and delta");
  require(!plan_.bandit_round.empty(), ErrorCode::invalid_configuration, "BerCOGD plan is empty");
}

bool Bercogd::bandit_now() const {
  if (warmup_left_ == 2) return false;
  if (warmup_left_ == 1) return true;
  const std::int64_t t = round();
  require(t <= static_cast<std::int64_t>(plan_.bandit_round.size()), ErrorCode::invalid_argument,
          "BerCOGD played past its horizon");
  return plan_.bandit_round[static_cast<std::size_t>(t - 1)];
}

FeedbackKind Bercogd::expected_feedback() const {
  return bandit_now() ? FeedbackKind::aggregate : FeedbackKind::full;
}

const VectorXd& Bercogd::play() {
  if (playing_) return played_;
  if (!bandit_now()) return begin_round(mu_);
  mu_ = project_shrunk_box(mu_, delta());
  VectorXd v = sample_unit_sphere<double>(mu_.size(), rng_);
  VectorXd played = mu_ + delta() * v;
  require(box_.contains(played, 1e-12), ErrorCode::invariant_violation,
          "BerCOGD played a signal outside [-1, 1]^N");
  pending_v_ = std::move(v);
  return begin_round(std::move(played));
}

void Bercogd::observe(const Feedback& obs) {
  require_playing("BerCOGD");
  const bool warm = in_warmup();
  const bool use_rho = options_.use_mean_regularizer && !warm && params_.rho != 0.0;
  const LossParams effective{use_rho ? params_.rho : 0.0, params_.lambda};
  if (bandit_now()) {
    const auto& agg = expect<AggregateFeedback>(obs, "BerCOGD");
    const double err = agg.setpoint - agg.total;
    double f = err * err;
    if (use_rho) f += params_.rho * mean_.preview(played_).squaredNorm();
    const VectorXd g = gradient_estimate(f, *pending_v_, mu_.size(), delta());
    mu_ = prox_step(mu_, g, eta_bandit(), params_.lambda, box_);
  } else {
    const auto& full = expect<FullFeedback>(obs, "BerCOGD");
    require_length(full.response, mu_.size(), "BerCOGD");
    const VectorXd grad = full_gradient(full.setpoint, full.response, played_, effective, mean_, round());
    mu_ = prox_step(mu_, grad, eta_full(), params_.lambda, box_);
  }
  if (warm) {
    --warmup_left_;
    finish_round(false);
  } else {
    finish_round();
  }
}

// --- EV COGD ----------------------------------------------------------------

EvCogd::EvCogd(EvEfficiencies efficiencies, StepSchedule schedule, LossParams params)
    : OnlineAlgorithm(2 * efficiencies.injection.size(), schedule, params),
      efficiencies_(std::move(efficiencies)) {
  const Eigen::Index n = efficiencies_.injection.size();
  require(efficiencies_.extraction.size() == n, ErrorCode::invalid_argument, "efficiency vectors differ in length");
  require_kind(schedule_, ScheduleKind::full, "EV COGD");
  weighted_mean_ = RunningMean<double>::zero(n);
  box_.lo.resize(2 * n);
  box_.hi.resize(2 * n);
  box_.lo << VectorXd::Zero(n), VectorXd::Constant(n, -1.0);
  box_.hi << VectorXd::Constant(n, 1.0), VectorXd::Zero(n);
}

const VectorXd& EvCogd::play() {
  if (playing_) return played_;
  return begin_round(mu_);
}

void EvCogd::observe(const Feedback& obs) {
  require_playing("EV COGD");
  const auto& full = expect<FullFeedback>(obs, "EV COGD");
  const Eigen::Index n = fleet_size();
  require_length(full.response, 2 * n, "EV COGD");
  const VectorXd c_c = full.response.head(n);
  const VectorXd c_d = full.response.tail(n);
  const VectorXd mu_c = played_.head(n);
  const VectorXd mu_d = played_.tail(n);
  const EvLossGradient lg =
      ev_loss_and_gradient(full.setpoint, c_c, c_d, mu_c, mu_d, params_.rho, weighted_mean_, round(), efficiencies_);
  VectorXd grad(2 * n);
  grad << lg.grad_c, lg.grad_d;
  mu_ = prox_step(mu_, grad, schedule_.eta, params_.lambda, box_);
  weighted_mean_ = running_mean_update(weighted_mean_, ev_weighted_signal(efficiencies_, c_c, c_d, mu_c, mu_d));
  finish_round();
}

}  // namespace drtrack
