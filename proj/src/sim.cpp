#include "drtrack/sim.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>

namespace drtrack {

const char* to_string(Scenario s) noexcept {
  switch (s) {
    case Scenario::tcl: return "tcl";
    case Scenario::ev: return "ev";
  }
  return "?";
}

std::optional<Scenario> parse_scenario(std::string_view text) {
  if (text == "tcl") return Scenario::tcl;
  if (text == "ev") return Scenario::ev;
  return std::nullopt;
}

std::optional<ScheduleKind> parse_feedback(std::string_view text) {
  for (auto k : {ScheduleKind::full, ScheduleKind::bandit, ScheduleKind::partial, ScheduleKind::bernoulli})
    if (text == to_string(k)) return k;
  return std::nullopt;
}

const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::regularized: return "regularized";
    case Variant::unregularized: return "unregularized";
    case Variant::baseline: return "no_dr";
  }
  return "?";
}

SetpointParams SetpointParams::defaults(Scenario s) {
  if (s == Scenario::ev) return SetpointParams{25.0, 0.1, 0.0};
  return SetpointParams{15.0, 0.1, 155.0};
}

double make_setpoint(const SetpointParams& sp, std::int64_t t) {
  return sp.amplitude * std::sin(sp.frequency * static_cast<double>(t)) + sp.offset;
}

// --- configuration ----------------------------------------------------------

ScenarioConfig ScenarioConfig::defaults(Scenario s, ScheduleKind feedback) {
  ScenarioConfig cfg;
  cfg.scenario = s;
  cfg.feedback = feedback;
  cfg.setpoint = SetpointParams::defaults(s);
  if (s == Scenario::ev) {
    cfg.noise = NoiseModel{0.0, 0.1, -1.5, 1.5};
    cfg.chi = 35.0;
    cfg.params = LossParams{100.0, 46.0};
    return cfg;
  }
  switch (feedback) {
    case ScheduleKind::full: cfg.params = LossParams{250.0, 7.5}; break;
    case ScheduleKind::bandit: cfg.params = LossParams{1.5, 60.0}; break;
    case ScheduleKind::partial: cfg.params = LossParams{0.0, 40.0}; break;
    case ScheduleKind::bernoulli: cfg.params = LossParams{2.5, 65.0}; break;
  }
  return cfg;
}

ScheduleTuning ScenarioConfig::tuning() const {
  ScheduleTuning t;
  t.a = a;
  switch (feedback) {
    case ScheduleKind::full: t.chi = chi; break;
    case ScheduleKind::bandit: t.chi = chi_bandit; break;
    case ScheduleKind::partial:
      t.chi_F = chi;
      t.chi_B = chi_bandit;
      break;
    case ScheduleKind::bernoulli:
      t.chi_F = chi_F;
      t.chi_B = chi_B;
      break;
  }
  return t;
}

double ScenarioConfig::setpoint_bound(double baseline_consumption) const {
  return std::abs(setpoint.amplitude) + std::abs(setpoint.offset - baseline_consumption);
}

void ScenarioConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::invalid_configuration, what); };
  if (loads < 1) bad("loads must be >= 1");
  if (rounds < 4) bad("rounds must be >= 4 (the regret ratio uses T/4)");
  if (trials < 0) bad("trials must be >= 0");
  if (feedback == ScheduleKind::partial && (observed < 1 || observed > loads - 1))
    bad("partial feedback needs 1 <= observed <= loads - 1 (observed = " + std::to_string(observed) +
        ", loads = " + std::to_string(loads) + ")");
  if (feedback == ScheduleKind::partial && params.rho != 0.0)
    bad("partial feedback is defined without the mean regularizer; set rho = 0");
  if (scenario == Scenario::ev && feedback != ScheduleKind::full)
    bad(std::string("the ev scenario supports full feedback only, got ") + to_string(feedback));
  if (!(chi > 0.0 && chi_bandit > 0.0 && chi_F > 0.0 && chi_B > 0.0)) bad("chi values must be > 0");
  if (feedback == ScheduleKind::bernoulli) bernoulli_probability(a, rounds);
  try {
    params.validate();
    noise.validate();
    tcl.validate();
    ev.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::invalid_configuration, e.what());
  }
  if (!(tcl_step_hours > 0.0 && ev_step_hours > 0.0)) bad("step_minutes must be > 0");
  if (!(ev_initial_soc >= 0.0 && ev_initial_soc <= 1.0)) bad("initial_soc must lie in [0, 1]");
  if (!std::isfinite(setpoint.amplitude) || !std::isfinite(setpoint.frequency) || !std::isfinite(setpoint.offset))
    bad("setpoint parameters must be finite");
  if (tcl_fleet && static_cast<std::int64_t>(tcl_fleet->size()) != loads)
    bad("fleet file has " + std::to_string(tcl_fleet->size()) + " loads but loads = " + std::to_string(loads));
  for (Eigen::Index i : trajectory_loads)
    if (i < 0 || i >= loads) bad("trajectory load " + std::to_string(i) + " outside 0..loads-1");
}

// --- feedback ---------------------------------------------------------------

Feedback feedback_channel(FeedbackKind kind, const VectorXd& response, double setpoint, const VectorXd& played,
                          const PartialSplit* split) {
  require(response.size() == played.size(), ErrorCode::invalid_argument, "feedback_channel: length mismatch");
  switch (kind) {
    case FeedbackKind::full: return FullFeedback{response, setpoint};
    case FeedbackKind::aggregate: return AggregateFeedback{response.dot(played), setpoint};
    case FeedbackKind::partial:
      require(split != nullptr, ErrorCode::invalid_argument, "feedback_channel: partial feedback needs a split");
      return PartialFeedback{gather(response, split->observed), response.dot(played), setpoint};
  }
  throw Error(ErrorCode::invalid_argument, "feedback_channel: unknown kind");
}

// --- hindsight --------------------------------------------------------------

double QuadraticObjective::value(const VectorXd& x) const {
  return x.dot(Q * x) - 2.0 * b.dot(x) + constant + l1_weight * x.lpNorm<1>();
}

LossHistory LossHistory::tcl(Eigen::Index loads, LossParams params) {
  LossHistory h;
  h.params_ = params;
  h.cc_ = Eigen::MatrixXd::Zero(loads, loads);
  h.sc_ = VectorXd::Zero(loads);
  return h;
}

LossHistory LossHistory::ev(EvEfficiencies eff, LossParams params) {
  const Eigen::Index n = eff.injection.size();
  LossHistory h = tcl(2 * n, params);
  h.ev_ = true;
  h.eff_ = std::move(eff);
  h.sum_c_ = h.sum_d_ = VectorXd::Zero(n);
  h.block_cc_ = h.block_cd_ = h.block_dd_ = VectorXd::Zero(n);
  return h;
}

void LossHistory::add_tcl(double s_eff, const VectorXd& c) {
  require(!ev_ && c.size() == sc_.size(), ErrorCode::invalid_argument, "LossHistory::add_tcl: wrong shape");
  cc_.noalias() += c * c.transpose();
  sc_ += s_eff * c;
  ss_ += s_eff * s_eff;
  ++rounds_;
}

void LossHistory::add_ev(double setpoint, const VectorXd& c_c, const VectorXd& c_d) {
  const Eigen::Index n = sum_c_.size();
  require(ev_ && c_c.size() == n && c_d.size() == n, ErrorCode::invalid_argument,
          "LossHistory::add_ev: wrong shape");
  VectorXd c(2 * n);
  c << c_c, c_d;
  cc_.noalias() += c * c.transpose();
  sc_ += setpoint * c;
  ss_ += setpoint * setpoint;
  ++rounds_;
  sum_c_ += c_c;
  sum_d_ += c_d;
  const double t = static_cast<double>(rounds_);
  const VectorXd alpha = (eff_.injection.array() * sum_c_.array() / t).matrix();
  const VectorXd beta = (sum_d_.array() / (t * eff_.extraction.array())).matrix();
  block_cc_.array() += alpha.array().square();
  block_cd_.array() += alpha.array() * beta.array();
  block_dd_.array() += beta.array().square();
}

QuadraticObjective LossHistory::objective() const {
  QuadraticObjective obj;
  const double T = static_cast<double>(rounds_);
  obj.Q = cc_;
  obj.b = sc_;
  obj.constant = ss_;
  obj.l1_weight = T * params_.lambda;
  const Eigen::Index dim = sc_.size();
  if (!ev_) {
    obj.Q.diagonal().array() += T * params_.rho;
    obj.box = Box<double>::symmetric(dim, 1.0);
    return obj;
  }
  const Eigen::Index n = dim / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    obj.Q(i, i) += params_.rho * block_cc_(i);
    obj.Q(i, n + i) += params_.rho * block_cd_(i);
    obj.Q(n + i, i) += params_.rho * block_cd_(i);
    obj.Q(n + i, n + i) += params_.rho * block_dd_(i);
  }
  obj.box.lo.resize(dim);
  obj.box.hi.resize(dim);
  obj.box.lo << VectorXd::Zero(n), VectorXd::Constant(n, -1.0);
  obj.box.hi << VectorXd::Constant(n, 1.0), VectorXd::Zero(n);
  return obj;
}

HindsightResult hindsight_optimum(const QuadraticObjective& obj, int max_iterations) {
  const Eigen::Index dim = obj.b.size();
  require(obj.Q.rows() == dim && obj.Q.cols() == dim && obj.box.size() == dim, ErrorCode::invalid_argument,
          "hindsight_optimum: shape mismatch");
  require(max_iterations >= 1, ErrorCode::invalid_argument, "hindsight_optimum: need at least one iteration");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(obj.Q, Eigen::EigenvaluesOnly);
  const double lipschitz = 2.0 * std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  HindsightResult res;
  VectorXd x = VectorXd::Zero(dim).cwiseMax(obj.box.lo).cwiseMin(obj.box.hi);
  VectorXd y = x;
  double momentum = 1.0;
  for (int k = 0; k < max_iterations; ++k) {
    const VectorXd grad = 2.0 * (obj.Q * y - obj.b);
    VectorXd next = prox_step(y, grad, step, obj.l1_weight, obj.box);
    const double change = (next - x).norm();
    if ((y - next).dot(next - x) > 0.0) {
      momentum = 1.0;
      y = next;
    } else {
      const double m_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      y = next + ((momentum - 1.0) / m_next) * (next - x);
      momentum = m_next;
    }
    x = std::move(next);
    res.iterations = k + 1;
    if (change <= 1e-12 * (1.0 + x.norm())) {
      res.converged = true;
      break;
    }
  }
  res.value = obj.value(x);
  res.mu_star = std::move(x);
  return res;
}

// --- trials -----------------------------------------------------------------

double MetricsLedger::cumulative_objective(std::int64_t t) const {
  require(t >= 0 && t <= rounds(), ErrorCode::invalid_argument, "cumulative_objective: round out of range");
  return std::accumulate(objective.begin(), objective.begin() + t, 0.0);
}

namespace {

enum Stream : std::uint32_t { kFleetStream = 0, kNoiseStream = 1, kAlgorithmStream = 2, kWarmupStream = 3 };

std::mt19937_64 make_stream(std::uint64_t seed, std::int64_t trial, Stream s) {
  const auto tr = static_cast<std::uint64_t>(trial);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tr), static_cast<std::uint32_t>(tr >> 32),
                    static_cast<std::uint32_t>(s)};
  return std::mt19937_64(seq);
}

/// No demand response: plays mu = 0 through the same loop.
class ZeroPolicy final : public OnlineAlgorithm {
 public:
  explicit ZeroPolicy(Eigen::Index dim) : OnlineAlgorithm(dim, StepSchedule{ScheduleKind::full, 1.0, {}, {}}, {}) {}

  const VectorXd& play() override {
    if (playing_) return played_;
    return begin_round(VectorXd::Zero(mu_.size()));
  }
  FeedbackKind expected_feedback() const override { return FeedbackKind::full; }
  void observe(const Feedback&) override {
    require_playing("no-DR policy");
    finish_round();
  }
};

double theoretical_bound(const ScenarioConfig& cfg, const ProblemBounds& b, double K) {
  const double T = static_cast<double>(cfg.rounds);
  const double N = static_cast<double>(cfg.loads);
  switch (cfg.feedback) {
    case ScheduleKind::full: return 4.0 * cfg.chi * std::sqrt(T * K * b.B);
    case ScheduleKind::bandit:
      return (2.0 * std::pow(N, 1.5) * b.B * cfg.chi_bandit + 4.0 * std::sqrt(N) * b.L) * std::pow(T, 0.75);
    case ScheduleKind::partial: {
      const double nb = N - static_cast<double>(cfg.observed);
      const double d_f = b.D * std::sqrt(static_cast<double>(cfg.observed) / N);
      return (2.0 * std::pow(nb, 1.5) * b.B * cfg.chi_bandit + 4.0 * std::sqrt(nb) * b.L) * std::pow(T, 0.75) +
             d_f * b.G * cfg.chi * std::sqrt(T);
    }
    case ScheduleKind::bernoulli: {
      const double full_part = std::sqrt(16.0 * K * b.B * cfg.chi_F * cfg.chi_F);
      const double bandit_part = b.D * b.B * N * cfg.chi_B + 2.0 * b.D * b.L;
      return (full_part + bandit_part * std::pow(cfg.a, 0.75)) * std::sqrt(T) + full_part + bandit_part;
    }
  }
  return 0.0;
}

double algorithm_rho(const ScenarioConfig& cfg, const LossParams& params) {
  if (cfg.feedback == ScheduleKind::partial) return 0.0;
  if (cfg.feedback == ScheduleKind::bernoulli && !cfg.bernoulli.use_mean_regularizer) return 0.0;
  return params.rho;
}

void reserve_ledger(MetricsLedger& l, std::size_t n) {
  for (auto* v : {&l.setpoint, &l.aggregate, &l.loss, &l.objective, &l.cumulative_loss, &l.regret, &l.mean_norm,
                  &l.l1_norm, &l.simultaneous})
    v->reserve(n);
}

}  // namespace

TrialRun run_trial(const ScenarioConfig& cfg, std::int64_t trial, Variant variant, const RoundObserver& observer) {
  cfg.validate();
  require(trial >= 0, ErrorCode::invalid_argument, "trial index must be >= 0");
  const Eigen::Index N = cfg.loads;
  const std::int64_t T = cfg.rounds;
  const bool ev = cfg.scenario == Scenario::ev;

  auto fleet_rng = make_stream(cfg.seed, trial, kFleetStream);
  auto noise_rng = make_stream(cfg.seed, trial, kNoiseStream);
  auto alg_rng = make_stream(cfg.seed, trial, kAlgorithmStream);
  auto warmup_rng = make_stream(cfg.seed, trial, kWarmupStream);
  const std::uint64_t alg_seed = alg_rng();

  const LossParams metric_params = variant == Variant::unregularized ? LossParams{} : cfg.params;
  const LossParams alg_params{algorithm_rho(cfg, metric_params), metric_params.lambda};

  std::optional<TclFleet> tcl;
  std::optional<EvFleet> evf;
  double baseline_consumption = 0.0;
  double response_bound = 0.0;
  TrialRun run;
  if (ev) {
    evf.emplace(ev_fleet_init(N, cfg.ev, cfg.ev_initial_soc));
    response_bound = evf->response_bound(cfg.noise);
    std::ostringstream os;
    write_ev_fleet(os, *evf);
    run.fleet_dump = os.str();
  } else {
    if (cfg.tcl_fleet)
      tcl.emplace(*cfg.tcl_fleet, cfg.tcl.theta_a);
    else
      tcl.emplace(tcl_fleet_init(N, fleet_rng, cfg.tcl));
    baseline_consumption = tcl->baseline_consumption();
    response_bound = tcl->response_bound(cfg.noise);
    std::ostringstream os;
    write_tcl_fleet(os, *tcl);
    run.fleet_dump = os.str();
  }

  const ProblemBounds bounds =
      compute_bounds(N, response_bound, cfg.setpoint_bound(baseline_consumption), alg_params.rho);
  const ScheduleTuning tuning = cfg.tuning();
  const ScheduleDims dims{N, cfg.observed};

  std::unique_ptr<OnlineAlgorithm> alg;
  std::optional<PartialSplit> split;
  if (variant == Variant::baseline) {
    alg = std::make_unique<ZeroPolicy>(ev ? 2 * N : N);
  } else if (ev) {
    alg = std::make_unique<EvCogd>(evf->efficiencies(), step_schedule(ScheduleKind::full, T, dims, bounds, tuning),
                                   alg_params);
  } else {
    switch (cfg.feedback) {
      case ScheduleKind::full:
        alg = std::make_unique<Cogd>(N, step_schedule(ScheduleKind::full, T, dims, bounds, tuning), alg_params);
        break;
      case ScheduleKind::bandit:
        alg = std::make_unique<Bcogd>(N, step_schedule(ScheduleKind::bandit, T, dims, bounds, tuning), alg_params,
                                      alg_seed);
        break;
      case ScheduleKind::partial:
        split = PartialSplit::trailing(N, cfg.observed);
        alg = std::make_unique<Pbcogd>(*split, step_schedule(ScheduleKind::partial, T, dims, bounds, tuning),
                                       alg_params, alg_seed);
        break;
      case ScheduleKind::bernoulli:
        alg = std::make_unique<Bercogd>(
            Bercogd::create(N, T, bounds, tuning, alg_params, cfg.bernoulli, alg_seed));
        break;
    }
  }

  std::vector<EvParams> ev_params;
  EvEfficiencies eff;
  if (ev) {
    ev_params = evf->params();
    eff = evf->efficiencies();
  }
  auto draw_response = [&](Rng& rng) -> VectorXd {
    if (!ev) return tcl_observe_response(tcl->c0(), rng, cfg.noise);
    EvResponse r = ev_observe_response(ev_params, rng, cfg.noise);
    VectorXd c(2 * N);
    c << r.charge, r.discharge;
    return c;
  };

  const PartialSplit* split_ptr = split ? &*split : nullptr;
  // Warm-up rounds precede the metrics window and leave the fleet untouched.
  while (alg->in_warmup()) {
    const double s = make_setpoint(cfg.setpoint, 0) - baseline_consumption;
    const VectorXd played = alg->play();
    const VectorXd response = draw_response(warmup_rng);
    alg->observe(feedback_channel(alg->expected_feedback(), response, s, played, split_ptr));
  }

  run.history = ev ? LossHistory::ev(eff, metric_params) : LossHistory::tcl(N, metric_params);
  MetricsLedger& L = run.ledger;
  reserve_ledger(L, static_cast<std::size_t>(T));
  L.K = metric_params.rho * metric_params.rho;
  L.B = bounds.B;
  const auto traj_n = static_cast<Eigen::Index>(cfg.trajectory_loads.size());
  run.trajectory.loads = cfg.trajectory_loads;
  run.trajectory.state.resize(T, traj_n);
  run.trajectory.signal.resize(T, traj_n);

  RunningMean<double> mean = RunningMean<double>::zero(N);
  double cumulative = 0.0;
  const std::int64_t quarter = T / 4;

  for (std::int64_t t = 1; t <= T; ++t) {
    try {
      const double s = make_setpoint(cfg.setpoint, t) - baseline_consumption;
      const VectorXd played = alg->play();
      const VectorXd response = draw_response(noise_rng);
      const Feedback fb = feedback_channel(alg->expected_feedback(), response, s, played, split_ptr);
      alg->observe(fb);
      if (observer) observer(RoundView{t, s, response, played, fb, *alg, split_ptr});

      const double aggregate = response.dot(played);
      const double err = s - aggregate;
      const double loss = err * err;
      double simultaneous = 0.0;
      const auto k = static_cast<Eigen::Index>(t - 1);
      if (ev) {
        const VectorXd c_c = response.head(N), c_d = response.tail(N);
        const VectorXd mu_c = played.head(N), mu_d = played.tail(N);
        mean = running_mean_update(mean, ev_weighted_signal(eff, c_c, c_d, mu_c, mu_d));
        run.history->add_ev(s, c_c, c_d);
        if ((mu_c.cwiseAbs().cwiseMin(mu_d.cwiseAbs()).array() > 1e-2).any()) simultaneous = 1.0;
        evf->step(EvResponse{c_c, c_d}, mu_c, mu_d, cfg.ev_step_hours);
        const VectorXd soc = evf->soc();
        for (Eigen::Index j = 0; j < traj_n; ++j) {
          const Eigen::Index i = cfg.trajectory_loads[static_cast<std::size_t>(j)];
          run.trajectory.state(k, j) = soc(i);
          run.trajectory.signal(k, j) = mu_c(i) + mu_d(i);
        }
      } else {
        mean = running_mean_update(mean, played);
        run.history->add_tcl(s, response);
        tcl->step(played, cfg.tcl_step_hours);
        for (Eigen::Index j = 0; j < traj_n; ++j) {
          const Eigen::Index i = cfg.trajectory_loads[static_cast<std::size_t>(j)];
          run.trajectory.state(k, j) = tcl->state()[static_cast<std::size_t>(i)].theta;
          run.trajectory.signal(k, j) = played(i);
        }
      }
      const double mean_sq = mean.mean.squaredNorm();
      const double l1 = played.lpNorm<1>();
      cumulative += loss;
      L.setpoint.push_back(s);
      L.aggregate.push_back(aggregate);
      L.loss.push_back(loss);
      L.objective.push_back(loss + metric_params.rho * mean_sq + metric_params.lambda * l1);
      L.cumulative_loss.push_back(cumulative);
      L.mean_norm.push_back(std::sqrt(mean_sq));
      L.l1_norm.push_back(l1);
      L.simultaneous.push_back(simultaneous);
      L.K = std::max(L.K, response.squaredNorm());
      if (t == quarter) run.quarter_history = run.history;
    } catch (const Error& e) {
      throw Error(e.code(), "round " + std::to_string(t) + ": " + e.what());
    }
  }
  if (ev) L.saturation_events = evf->saturation_events();
  L.regret_bound = theoretical_bound(cfg, bounds, L.K);
  return run;
}

HindsightPair solve_hindsight(const TrialRun& run) {
  require(run.history && run.quarter_history, ErrorCode::invalid_argument, "solve_hindsight: trial has no history");
  return HindsightPair{hindsight_optimum(run.history->objective()),
                       hindsight_optimum(run.quarter_history->objective())};
}

void attach_regret(MetricsLedger& ledger, const HindsightPair& hindsight) {
  const std::int64_t T = ledger.rounds();
  ledger.hindsight_value = hindsight.full.value;
  ledger.hindsight_converged = hindsight.full.converged && hindsight.quarter.converged;
  ledger.regret.assign(static_cast<std::size_t>(T), 0.0);
  double cum = 0.0;
  for (std::int64_t k = 0; k < T; ++k) {
    cum += ledger.objective[static_cast<std::size_t>(k)];
    ledger.regret[static_cast<std::size_t>(k)] =
        cum - static_cast<double>(k + 1) * hindsight.full.value / static_cast<double>(T);
  }
  ledger.quarter_regret = ledger.cumulative_objective(T / 4) - hindsight.quarter.value;
}

// --- metrics ----------------------------------------------------------------

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double reduction_pct(double value, double reference) {
  return reference > 0.0 ? 100.0 * (1.0 - value / reference) : 0.0;
}

}  // namespace

TrialSummary compute_metrics(const MetricsLedger& ledger, const MetricsLedger& baseline,
                             const MetricsLedger* unregularized) {
  require(ledger.rounds() == baseline.rounds(), ErrorCode::invalid_argument,
          "compute_metrics: ledgers differ in length");
  TrialSummary s;
  s.total_loss = sum(ledger.loss);
  s.baseline_loss = sum(baseline.loss);
  s.improvement_pct = reduction_pct(s.total_loss, s.baseline_loss);
  if (unregularized != nullptr) {
    require(unregularized->rounds() == ledger.rounds(), ErrorCode::invalid_argument,
            "compute_metrics: ledgers differ in length");
    s.mean_improvement_pct = reduction_pct(sum(ledger.mean_norm), sum(unregularized->mean_norm));
    s.sparsity_improvement_pct = reduction_pct(sum(ledger.l1_norm), sum(unregularized->l1_norm));
  }
  s.simultaneity_pct = ledger.rounds() > 0 ? 100.0 * sum(ledger.simultaneous) / static_cast<double>(ledger.rounds())
                                           : 0.0;
  s.regret_final = ledger.final_regret();
  s.regret_quarter = ledger.quarter_regret;
  s.regret_bound = ledger.regret_bound;
  return s;
}

MetricsLedger average_ledgers(const std::vector<MetricsLedger>& ledgers) {
  MetricsLedger out;
  if (ledgers.empty()) return out;
  const double n = static_cast<double>(ledgers.size());
  using Series = std::vector<double> MetricsLedger::*;
  const Series series[] = {&MetricsLedger::setpoint,  &MetricsLedger::aggregate,       &MetricsLedger::loss,
                           &MetricsLedger::objective, &MetricsLedger::cumulative_loss, &MetricsLedger::regret,
                           &MetricsLedger::mean_norm, &MetricsLedger::l1_norm,         &MetricsLedger::simultaneous};
  for (Series m : series) {
    const std::size_t len = (ledgers.front().*m).size();
    std::vector<double> acc(len, 0.0);
    for (const auto& l : ledgers) {
      require((l.*m).size() == len, ErrorCode::invalid_argument, "average_ledgers: ledgers differ in length");
      for (std::size_t k = 0; k < len; ++k) acc[k] += (l.*m)[k];
    }
    for (double& x : acc) x /= n;
    out.*m = std::move(acc);
  }
  for (const auto& l : ledgers) {
    out.hindsight_value += l.hindsight_value / n;
    out.quarter_regret += l.quarter_regret / n;
    out.hindsight_converged = out.hindsight_converged && l.hindsight_converged;
    out.K += l.K / n;
    out.B += l.B / n;
    out.regret_bound += l.regret_bound / n;
    out.saturation_events += l.saturation_events;
  }
  return out;
}

namespace {

template <typename F>
double mean_of(const std::vector<TrialSummary>& v, F f) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& s : v) acc += f(s);
  return acc / static_cast<double>(v.size());
}

}  // namespace

RegimeResult run_regime(const ScenarioConfig& cfg) {
  cfg.validate();
  RegimeResult res;
  res.config = cfg;
  std::vector<MetricsLedger> baselines;
  const bool already_unregularized = cfg.params.rho == 0.0 && cfg.params.lambda == 0.0;
  for (std::int64_t trial = 0; trial < cfg.trials; ++trial) {
    TrialRun reg = run_trial(cfg, trial, Variant::regularized);
    TrialRun unreg = run_trial(cfg, trial, Variant::unregularized);
    TrialRun base = run_trial(cfg, trial, Variant::baseline);

    const HindsightPair h_reg = solve_hindsight(reg);
    const HindsightPair h_unreg = already_unregularized ? h_reg : solve_hindsight(unreg);
    attach_regret(reg.ledger, h_reg);
    attach_regret(unreg.ledger, h_unreg);
    attach_regret(base.ledger, h_reg);

    res.regularized.push_back(compute_metrics(reg.ledger, base.ledger, &unreg.ledger));
    res.unregularized.push_back(compute_metrics(unreg.ledger, base.ledger, &unreg.ledger));
    if (trial == 0) {
      res.trajectory_regularized = std::move(reg.trajectory);
      res.trajectory_unregularized = std::move(unreg.trajectory);
      res.fleet_dump = std::move(reg.fleet_dump);
    }
    res.ledgers.push_back(std::move(reg.ledger));
    res.ledgers_unregularized.push_back(std::move(unreg.ledger));
    baselines.push_back(std::move(base.ledger));
  }
  res.mean_regularized = average_ledgers(res.ledgers);
  res.mean_unregularized = average_ledgers(res.ledgers_unregularized);
  res.mean_baseline = average_ledgers(baselines);

  RegimeSummary& s = res.summary;
  s.improvement_pct = mean_of(res.regularized, [](const TrialSummary& x) { return x.improvement_pct; });
  s.improvement_unregularized_pct =
      mean_of(res.unregularized, [](const TrialSummary& x) { return x.improvement_pct; });
  s.mean_improvement_pct = mean_of(res.regularized, [](const TrialSummary& x) { return x.mean_improvement_pct; });
  s.sparsity_improvement_pct =
      mean_of(res.regularized, [](const TrialSummary& x) { return x.sparsity_improvement_pct; });
  s.simultaneity_pct = mean_of(res.regularized, [](const TrialSummary& x) { return x.simultaneity_pct; });
  s.simultaneity_unregularized_pct =
      mean_of(res.unregularized, [](const TrialSummary& x) { return x.simultaneity_pct; });
  s.regret_final = mean_of(res.regularized, [](const TrialSummary& x) { return x.regret_final; });
  s.regret_bound = mean_of(res.regularized, [](const TrialSummary& x) { return x.regret_bound; });
  return res;
}

}  // namespace drtrack
