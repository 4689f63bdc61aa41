#include <functional>
#include <cmath>
#include <random>

#include "doctest.h"
#include "drtrack/algorithms.hpp"
#include "oracles.hpp"

using namespace drtrack;

namespace {

StepSchedule full_schedule(double eta) {
  StepSchedule s;
  s.kind = ScheduleKind::full;
  s.eta = eta;
  return s;
}

StepSchedule bandit_schedule(double eta, double delta) {
  StepSchedule s;
  s.kind = ScheduleKind::bandit;
  s.eta = eta;
  s.delta = delta;
  return s;
}

StepSchedule partial_schedule(double eta_b, double eta_f, double delta) {
  StepSchedule s;
  s.kind = ScheduleKind::partial;
  s.eta = eta_b;
  s.eta2 = eta_f;
  s.delta = delta;
  return s;
}

StepSchedule bernoulli_schedule(double eta_f, double eta_b, double delta) {
  StepSchedule s;
  s.kind = ScheduleKind::bernoulli;
  s.eta = eta_f;
  s.eta2 = eta_b;
  s.delta = delta;
  return s;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return ErrorCode::invalid_argument;
}

/// Random response/setpoint stream shared by the comparison tests.
struct Stream {
  explicit Stream(std::uint64_t seed, Eigen::Index n) : rng(seed), n(n) {}
  std::mt19937_64 rng;
  Eigen::Index n;
  std::uniform_real_distribution<double> u{0.5, 2.0};
  VectorXd response() { return VectorXd::NullaryExpr(n, [&] { return u(rng); }); }
  double setpoint(int t) { return 2.0 * std::sin(0.3 * t) + 1.0; }
};

}  // namespace

TEST_CASE("COGD with zero response stays at the origin") {
  Cogd alg(3, full_schedule(0.7), LossParams{});
  for (int t = 1; t <= 50; ++t) {
    alg.play();
    alg.observe(FullFeedback{VectorXd::Zero(3), 2.0});
  }
  CHECK(alg.decision().norm() == 0.0);
  CHECK(alg.round() == 51);
}

TEST_CASE("COGD hand iteration") {
  Cogd alg(1, full_schedule(0.25), LossParams{});
  VectorXd one = VectorXd::Ones(1);
  CHECK(alg.play()(0) == 0.0);
  alg.observe(FullFeedback{one, 1.0});
  CHECK(alg.decision()(0) == doctest::Approx(0.5));
  CHECK(alg.play()(0) == doctest::Approx(0.5));
  alg.observe(FullFeedback{one, 1.0});
  CHECK(alg.decision()(0) == doctest::Approx(0.75));
  CHECK(alg.running_mean().mean(0) == doctest::Approx(0.25));
}

TEST_CASE("COGD converges on a fixed quadratic") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int inst = 0; inst < 5; ++inst) {
    const Eigen::Index n = 4;
    VectorXd c = VectorXd::NullaryExpr(n, [&] { return 1.0 + 0.5 * u(rng); });
    VectorXd target = VectorXd::NullaryExpr(n, [&] { return 0.8 * u(rng); });
    const double s = c.dot(target);
    Cogd alg(n, full_schedule(0.02), LossParams{});
    double first = 0.0, last = 0.0;
    for (int t = 1; t <= 2000; ++t) {
      const VectorXd& mu = alg.play();
      const double loss = tracking_loss(s, c, mu);
      if (t <= 100) first += loss;
      if (t > 1900) last += loss;
      alg.observe(FullFeedback{c, s});
    }
    CHECK(last < first);
  }
}

TEST_CASE("feedback of the wrong kind is rejected") {
  Cogd cogd(2, full_schedule(0.1), LossParams{});
  cogd.play();
  CHECK(code_of([&] { cogd.observe(AggregateFeedback{1.0, 1.0}); }) == ErrorCode::feedback_mismatch);
  CHECK(code_of([&] { cogd.observe(FullFeedback{VectorXd::Ones(3), 1.0}); }) == ErrorCode::feedback_mismatch);

  Bcogd bcogd(2, bandit_schedule(0.1, 0.2), LossParams{}, 1);
  bcogd.play();
  CHECK(code_of([&] { bcogd.observe(FullFeedback{VectorXd::Ones(2), 1.0}); }) == ErrorCode::feedback_mismatch);

  Pbcogd pb(PartialSplit::trailing(3, 1), partial_schedule(0.1, 0.1, 0.2), LossParams{}, 1);
  pb.play();
  CHECK(code_of([&] { pb.observe(AggregateFeedback{1.0, 1.0}); }) == ErrorCode::feedback_mismatch);

  Cogd idle(2, full_schedule(0.1), LossParams{});
  CHECK(code_of([&] { idle.observe(FullFeedback{VectorXd::Ones(2), 1.0}); }) == ErrorCode::invalid_argument);
}

TEST_CASE("BCOGD zero case and feasibility") {
  Bcogd zero(4, bandit_schedule(0.3, 0.2), LossParams{}, 9);
  for (int t = 1; t <= 100; ++t) {
    const VectorXd& p = zero.play();
    CHECK(zero.pending_direction().has_value());
    CHECK((p - zero.decision()).norm() == doctest::Approx(0.2));
    zero.observe(AggregateFeedback{0.0, 0.0});
    CHECK_FALSE(zero.pending_direction().has_value());
  }
  CHECK(zero.decision().norm() == 0.0);

  Stream st(3, 5);
  Bcogd alg(5, bandit_schedule(0.05, 0.3), LossParams{0.5, 0.2}, 4);
  const auto box = Box<double>::symmetric(5, 1.0);
  const auto shrunk = Box<double>::shrunk(5, 0.3);
  for (int t = 1; t <= 500; ++t) {
    CHECK(shrunk.contains(alg.decision(), 1e-15));
    const VectorXd played = alg.play();
    CHECK(box.contains(played, 1e-12));
    alg.observe(AggregateFeedback{st.response().dot(played), 4.0 * st.setpoint(t)});
  }
}

TEST_CASE("BCOGD update uses the aggregate loss and the local mean term") {
  const double eta = 0.01, delta = 0.25, rho = 3.0;
  Bcogd alg(2, bandit_schedule(eta, delta), LossParams{rho, 0.0}, 12);
  const VectorXd p1 = alg.play();
  const VectorXd v = *alg.pending_direction();
  alg.observe(AggregateFeedback{0.7, 2.0});
  const double f = (2.0 - 0.7) * (2.0 - 0.7) + rho * p1.squaredNorm();
  const VectorXd expected = project_shrunk_box(VectorXd(-eta * (2.0 / delta) * f * v), delta);
  CHECK((alg.decision() - expected).norm() <= 1e-15);
}

TEST_CASE("PBCOGD decomposition identity and block updates") {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Eigen::Index N = 6, n = 2;
  std::vector<Eigen::Index> order{3, 0, 5, 1, 4, 2};
  PartialSplit split = PartialSplit::from_order(order, n);
  CHECK(split.observed == std::vector<Eigen::Index>{4, 2});
  Pbcogd alg(split, partial_schedule(0.01, 0.05, 0.3), LossParams{0.0, 0.4}, 77);
  for (int t = 1; t <= 200; ++t) {
    const VectorXd played = alg.play();
    CHECK(Box<double>::symmetric(N, 1.0).contains(played, 1e-12));
    for (Eigen::Index i : split.observed) CHECK(played(i) == alg.decision()(i));
    const VectorXd c = VectorXd::NullaryExpr(N, [&] { return 1.5 + u(rng); });
    const double s = 3.0 * u(rng);
    const VectorXd c_f = gather(c, split.observed), c_b = gather(c, split.unobserved);
    const VectorXd mu_f = gather(played, split.observed), mu_b = gather(played, split.unobserved);
    const double total = c.dot(played);
    const double f = (s - total) * (s - total);
    const PartialFeedback obs{c_f, total, s};
    const double beta = obs.beta(mu_f);
    const double fF = partial_loss_observed_view(s, beta, c_f, mu_f);
    const double fB = partial_loss_bandit_view(s, c_f.dot(mu_f), c_b, mu_b);
    CHECK(std::abs(fF - f) <= 1e-9 * std::max(1.0, f));
    CHECK(std::abs(fB - f) <= 1e-9 * std::max(1.0, f));
    alg.observe(obs);
    CHECK(alg.last_beta() == doctest::Approx(c_b.dot(mu_b)));
  }
}

TEST_CASE("PBCOGD update equals the per-block grid minimizers") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double eta_b = 0.002, eta_f = 0.08, delta = 0.5, lambda = 0.7;
  for (int inst = 0; inst < 6; ++inst) {
    Pbcogd alg(PartialSplit::trailing(4, 2), partial_schedule(eta_b, eta_f, delta), LossParams{0.0, lambda},
               100 + static_cast<std::uint64_t>(inst));
    // Move away from the origin first so the prox has something to work with.
    for (int warm = 0; warm < 3; ++warm) {
      const VectorXd p = alg.play();
      const VectorXd c = VectorXd::NullaryExpr(4, [&] { return 1.0 + u(rng); });
      alg.observe(PartialFeedback{c.tail(2), c.dot(p), 2.0 * u(rng)});
    }
    const VectorXd mu_t = alg.decision();
    const VectorXd played = alg.play();
    const VectorXd v = *alg.pending_direction();
    const VectorXd c = VectorXd::NullaryExpr(4, [&] { return 1.0 + u(rng); });
    const double s = 3.0 * u(rng), total = c.dot(played);
    alg.observe(PartialFeedback{c.tail(2), total, s});

    const VectorXd g_b = (2.0 / delta) * (s - total) * (s - total) * v;
    const double beta = total - c.tail(2).dot(played.tail(2));
    const VectorXd g_f = -2.0 * (s - beta - c.tail(2).dot(mu_t.tail(2))) * c.tail(2);
    auto obj_b = [&](const VectorXd& m) { return oracle::prox_objective(m, mu_t.head(2), g_b, eta_b, lambda); };
    auto obj_f = [&](const VectorXd& m) { return oracle::prox_objective(m, mu_t.tail(2), g_f, eta_f, lambda); };
    const auto grid_b = oracle::fine_grid_min(obj_b, VectorXd::Constant(2, -0.5), VectorXd::Constant(2, 0.5));
    const auto grid_f = oracle::fine_grid_min(obj_f, VectorXd::Constant(2, -1.0), VectorXd::Constant(2, 1.0));
    const double joint = obj_b(alg.decision().head(2)) + obj_f(alg.decision().tail(2));
    CHECK(std::abs(joint - (grid_b.value + grid_f.value)) <= 1e-6);
  }
}

TEST_CASE("PBCOGD configuration checks") {
  CHECK(code_of([] { PartialSplit::trailing(5, 5); }) == ErrorCode::invalid_configuration);
  CHECK(code_of([] { PartialSplit::trailing(5, 0); }) == ErrorCode::invalid_configuration);
  CHECK(code_of([] { PartialSplit::from_order({0, 0, 1}, 1); }) == ErrorCode::invalid_configuration);
  CHECK(code_of([] { Pbcogd(PartialSplit::trailing(3, 1), partial_schedule(0.1, 0.1, 0.2), LossParams{1.0, 0.0}, 1); }) ==
        ErrorCode::invalid_configuration);
}

TEST_CASE("PBCOGD with a one-load bandit block") {
  // n = N - 1: the observed block follows COGD exactly.
  const Eigen::Index N = 4;
  Pbcogd pb(PartialSplit::trailing(N, N - 1), partial_schedule(1e-3, 0.1, 0.2), LossParams{}, 5);
  Cogd cogd(N - 1, full_schedule(0.1), LossParams{});
  Stream st(8, N);
  for (int t = 1; t <= 100; ++t) {
    const VectorXd p = pb.play();
    const VectorXd q = cogd.play();
    CHECK((p.tail(N - 1) - q).norm() <= 1e-12);
    CHECK(pb.pending_direction()->size() == 1);
    const VectorXd c = st.response();
    const double s = st.setpoint(t);
    const double total = c.dot(p);
    pb.observe(PartialFeedback{c.tail(N - 1), total, s});
    cogd.observe(FullFeedback{c.tail(N - 1), s - c(0) * p(0)});
  }
}

TEST_CASE("Bernoulli plan sampling") {
  std::mt19937_64 rng(1);
  const BernoulliPlan plan = sample_bernoulli_plan(7.6, 600, rng);
  CHECK(plan.probability == doctest::Approx(7.6 / std::cbrt(600.0)));
  CHECK(plan.bandit_round.size() == 600);

  std::mt19937_64 big(2);
  const BernoulliPlan many = sample_bernoulli_plan(21.0, 10'000, big);
  CHECK(std::abs(many.bandit_rounds() / 1e4 - many.probability) <= 0.02);

  std::mt19937_64 none(3);
  CHECK(sample_bernoulli_plan(0.0, 600, none).bandit_rounds() == 0);
  std::mt19937_64 bad(4);
  CHECK(code_of([&] { sample_bernoulli_plan(8.5, 600, bad); }) == ErrorCode::invalid_configuration);
}

TEST_CASE("BerCOGD is deterministic for a fixed seed") {
  const ProblemBounds b = compute_bounds(5, 2.0, 4.0, 0.0);
  ScheduleTuning tune;
  tune.chi_F = 1.0;
  tune.chi_B = 50.0;
  tune.a = 7.6;
  auto run = [&] {
    Bercogd alg = Bercogd::create(5, 600, b, tune, LossParams{0.0, 0.1}, BernoulliOptions{}, 99);
    Stream st(21, 5);
    std::vector<VectorXd> played;
    int t = 0;
    while (alg.round() <= 600) {
      const VectorXd p = alg.play();
      played.push_back(p);
      const VectorXd c = st.response();
      const double s = st.setpoint(++t);
      if (alg.expected_feedback() == FeedbackKind::full)
        alg.observe(FullFeedback{c, s});
      else
        alg.observe(AggregateFeedback{c.dot(p), s});
    }
    return std::make_pair(alg.plan().bandit_round, played);
  };
  const auto a = run();
  const auto b2 = run();
  CHECK(a.first == b2.first);
  REQUIRE(a.second.size() == b2.second.size());
  CHECK(a.second.size() == 602);
  for (std::size_t k = 0; k < a.second.size(); ++k) CHECK(a.second[k] == b2.second[k]);
}

TEST_CASE("BerCOGD warm-up rounds") {
  BernoulliPlan plan;
  plan.bandit_round.assign(10, false);
  Bercogd alg(3, plan, bernoulli_schedule(0.1, 0.01, 0.4), LossParams{}, BernoulliOptions{false, true}, 5);
  CHECK(alg.in_warmup());
  CHECK(alg.expected_feedback() == FeedbackKind::full);
  alg.play();
  alg.observe(FullFeedback{VectorXd::Ones(3), 1.0});
  CHECK(alg.in_warmup());
  CHECK(alg.expected_feedback() == FeedbackKind::aggregate);
  const VectorXd p = alg.play();
  CHECK(code_of([&] { alg.observe(FullFeedback{VectorXd::Ones(3), 1.0}); }) == ErrorCode::feedback_mismatch);
  alg.observe(AggregateFeedback{p.sum(), 1.0});
  CHECK_FALSE(alg.in_warmup());
  CHECK(alg.round() == 1);
  CHECK(alg.running_mean().rounds == 0);
}

TEST_CASE("BerCOGD with an all-full plan follows COGD") {
  BernoulliPlan plan;
  plan.bandit_round.assign(300, false);
  const double eta = 0.04;
  Bercogd ber(4, plan, bernoulli_schedule(eta, 0.01, 0.3), LossParams{0.0, 0.3}, BernoulliOptions{false, false}, 3);
  Cogd cogd(4, full_schedule(eta), LossParams{0.0, 0.3});
  Stream st(13, 4);
  for (int t = 1; t <= 300; ++t) {
    REQUIRE(ber.expected_feedback() == FeedbackKind::full);
    CHECK(ber.play() == cogd.play());
    const FullFeedback obs{st.response(), st.setpoint(t)};
    ber.observe(obs);
    cogd.observe(obs);
  }
  CHECK(ber.decision() == cogd.decision());
}

TEST_CASE("BerCOGD with an all-bandit plan follows BCOGD") {
  BernoulliPlan plan;
  plan.bandit_round.assign(300, true);
  const double eta = 1e-3, delta = 0.3;
  Bercogd ber(4, plan, bernoulli_schedule(0.1, eta, delta), LossParams{0.0, 0.3}, BernoulliOptions{false, false}, 17);
  Bcogd bcogd(4, bandit_schedule(eta, delta), LossParams{0.0, 0.3}, 17);
  Stream st(14, 4);
  for (int t = 1; t <= 300; ++t) {
    REQUIRE(ber.expected_feedback() == FeedbackKind::aggregate);
    const VectorXd p = ber.play();
    const VectorXd q = bcogd.play();
    CHECK((p - q).norm() <= 1e-12);
    const VectorXd c = st.response();
    const double s = st.setpoint(t);
    ber.observe(AggregateFeedback{c.dot(p), s});
    bcogd.observe(AggregateFeedback{c.dot(q), s});
  }
}

TEST_CASE("BerCOGD played signals stay feasible") {
  const ProblemBounds b = compute_bounds(6, 2.0, 4.0, 0.0);
  ScheduleTuning tune;
  tune.chi_F = 5.0;
  tune.chi_B = 5000.0;
  tune.a = 4.0;
  Bercogd alg = Bercogd::create(6, 200, b, tune, LossParams{0.0, 0.1}, BernoulliOptions{}, 8);
  Stream st(4, 6);
  int t = 0;
  while (alg.round() <= 200) {
    const VectorXd p = alg.play();
    CHECK(Box<double>::symmetric(6, 1.0).contains(p, 1e-12));
    const VectorXd c = st.response();
    const double s = 3.0 * st.setpoint(++t);
    if (alg.expected_feedback() == FeedbackKind::full)
      alg.observe(FullFeedback{c, s});
    else
      alg.observe(AggregateFeedback{c.dot(p), s});
  }
}

TEST_CASE("EV COGD stays in the sign boxes") {
  EvEfficiencies eff{VectorXd::Constant(3, 0.85), VectorXd::Constant(3, 0.9)};
  EvCogd alg(eff, full_schedule(0.05), LossParams{5.0, 0.5});
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(0.5, 3.5);
  for (int t = 1; t <= 300; ++t) {
    const VectorXd p = alg.play();
    CHECK((p.head(3).array() >= 0.0).all());
    CHECK((p.head(3).array() <= 1.0).all());
    CHECK((p.tail(3).array() <= 0.0).all());
    CHECK((p.tail(3).array() >= -1.0).all());
    const VectorXd c = VectorXd::NullaryExpr(6, [&] { return u(rng); });
    alg.observe(FullFeedback{c, 6.0 * std::sin(0.2 * t)});
  }
  CHECK(alg.weighted_mean().rounds == 300);
}
