// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drtrack/config.hpp"
#include "drtrack/format.hpp"
#include "drtrack/output.hpp"
#include "drtrack/sim.hpp"
#include "oracles.hpp"

using namespace drtrack;

namespace {

const std::filesystem::path kConfigs = DRTRACK_CONFIG_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(double x, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

std::string sci(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", x);
  return buf;
}

int failures = 0;

void report(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.note(std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (budget_s > 0.0 && secs > budget_s) {
    o.pass = false;
    o.note("runtime " + fmt(secs, 1) + " s exceeds " + fmt(budget_s, 0) + " s");
  }
  if (!o.pass) ++failures;
  std::printf("AC%-2d %s  %s (%.1f s)\n      %s\n", id, o.pass ? "PASS" : "FAIL", title, secs, o.detail.c_str());
  std::fflush(stdout);
}

std::vector<RegimeResult> run_all(const ExperimentConfig& cfg) {
  std::vector<RegimeResult> out;
  for (const auto& cell : cfg.cells) out.push_back(run_regime(cell));
  return out;
}

std::string csv_bytes(const std::vector<RegimeResult>& results) {
  std::ostringstream os;
  write_rounds_csv(os, results);
  write_summary_csv(os, results);
  write_trajectories_csv(os, results);
  for (const auto& r : results) os << r.fleet_dump;
  return os.str();
}

const RegimeResult& find(const std::vector<RegimeResult>& rs, ScheduleKind kind) {
  for (const auto& r : rs)
    if (r.config.feedback == kind) return r;
  throw Error(ErrorCode::invalid_argument, std::string("grid has no ") + to_string(kind) + " cell");
}

}  // namespace

int main() {
  const ExperimentConfig table1 = load_config(kConfigs / "table1.cfg");
  const ExperimentConfig ev_cfg = load_config(kConfigs / "ev.cfg");
  std::vector<RegimeResult> grid;
  double grid_seconds = 0.0;

  report(1, "Regime ordering without regularization", 120.0, [&] {
    const auto start = std::chrono::steady_clock::now();
    grid = run_all(table1);
    grid_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    Outcome o;
    const double full = find(grid, ScheduleKind::full).summary.improvement_unregularized_pct;
    const double ber = find(grid, ScheduleKind::bernoulli).summary.improvement_unregularized_pct;
    const double part = find(grid, ScheduleKind::partial).summary.improvement_unregularized_pct;
    const double band = find(grid, ScheduleKind::bandit).summary.improvement_unregularized_pct;
    o.note(std::to_string(find(grid, ScheduleKind::full).config.trials) + " trials: full " + fmt(full) +
           "%, bernoulli " + fmt(ber) + "%, partial " + fmt(part) + "%, bandit " + fmt(band) + "%");
    o.require(full > ber && ber > part && part > band, "strict ordering");
    o.require(band > 0.0, "all positive");
    o.require(full >= 85.0, "full >= 85%");
    o.require(band >= 15.0 && band <= 60.0, "bandit in [15%, 60%]");
    for (const auto& r : grid)
      for (const auto& l : r.ledgers) o.require(l.hindsight_converged, "hindsight solver converged");
    return o;
  });

  report(2, "Regularization cost and regularizer improvements", 0.0, [&] {
    Outcome o;
    o.require(!grid.empty(), "grid available");
    for (const auto& r : grid) {
      const auto& s = r.summary;
      const double drop = s.improvement_unregularized_pct - s.improvement_pct;
      o.note(std::string(to_string(r.config.feedback)) + ": " + fmt(s.improvement_unregularized_pct) + "% -> " +
             fmt(s.improvement_pct) + "% (drop " + fmt(drop) + " pp), mean " + fmt(s.mean_improvement_pct) +
             "%, sparsity " + fmt(s.sparsity_improvement_pct) + "%");
      o.require(drop <= 15.0, std::string(to_string(r.config.feedback)) + " drop <= 15 pp");
      o.require(s.mean_improvement_pct > 0.0, std::string(to_string(r.config.feedback)) + " mean improvement > 0");
      o.require(s.sparsity_improvement_pct > 0.0,
                std::string(to_string(r.config.feedback)) + " sparsity improvement > 0");
    }
    o.note("grid runtime " + fmt(grid_seconds, 1) + " s");
    return o;
  });

  report(3, "Regret bound and sublinearity", 60.0, [&] {
    Outcome o;
    std::vector<RegimeResult> runs;
    for (auto cell : table1.cells) {
      cell.trials = 20;
      runs.push_back(run_regime(cell));
    }
    const RegimeResult& full = find(runs, ScheduleKind::full);
    int within = 0, total = 0;
    double worst = -1e300;
    for (const auto* set : {&full.ledgers, &full.ledgers_unregularized})
      for (const auto& l : *set) {
        ++total;
        worst = std::max(worst, l.final_regret() / l.regret_bound);
        if (l.final_regret() <= l.regret_bound) ++within;
      }
    o.note("COGD: " + std::to_string(within) + "/" + std::to_string(total) +
           " trials within 4 chi sqrt(TKB), max R_T/bound " + sci(worst));
    o.require(within == total, "COGD bound on every full-information trial");

    for (const auto& r : runs) {
      const double T = static_cast<double>(r.config.rounds), Q = static_cast<double>(r.config.rounds / 4);
      auto ratios = [&](const std::vector<MetricsLedger>& ls) {
        double end = 0.0, quarter = 0.0;
        for (const auto& l : ls) {
          end += l.final_regret() / T;
          quarter += l.quarter_regret / Q;
        }
        return std::make_pair(end / static_cast<double>(ls.size()), quarter / static_cast<double>(ls.size()));
      };
      const auto [u_end, u_quarter] = ratios(r.ledgers_unregularized);
      const auto [r_end, r_quarter] = ratios(r.ledgers);
      const std::string name = to_string(r.config.feedback);
      o.note(name + ": R_T/T " + fmt(u_end) + " vs R_T/4/(T/4) " + fmt(u_quarter) + " (regularized run " +
             fmt(r_end) + " vs " + fmt(r_quarter) + ")");
      o.require(u_end < u_quarter, name + " sublinear");
    }
    return o;
  });

  report(4, "Gradient estimator Monte Carlo mean", 5.0, [] {
    Outcome o;
    const VectorXd c = (VectorXd(3) << 1.0, 0.5, -0.3).finished();
    const VectorXd mu = (VectorXd(3) << 0.1, -0.2, 0.3).finished();
    const double delta = 0.01;
    auto f = [&](const VectorXd& x) { return (2.0 - c.dot(x)) * (2.0 - c.dot(x)); };
    const VectorXd analytic = -2.0 * (2.0 - c.dot(mu)) * c;
    std::mt19937_64 rng(2024);
    VectorXd paired = VectorXd::Zero(3), plain = VectorXd::Zero(3);
    const int draws = 100'000;
    for (int k = 0; k < draws / 2; ++k) {
      const VectorXd v = sample_unit_sphere(3, rng);
      const VectorXd w = -v;
      const VectorXd a = gradient_estimate(f(mu + delta * v), v, 3, delta);
      const VectorXd b = gradient_estimate(f(mu + delta * w), w, 3, delta);
      paired += a + b;
      plain += a;
    }
    paired /= static_cast<double>(draws);
    plain /= static_cast<double>(draws / 2);
    const double err = (paired - analytic).cwiseAbs().maxCoeff();
    o.note("antithetic mean (" + fmt(paired(0), 3) + ", " + fmt(paired(1), 3) + ", " + fmt(paired(2), 3) +
           ") vs analytic (" + fmt(analytic(0), 3) + ", " + fmt(analytic(1), 3) + ", " + fmt(analytic(2), 3) +
           "), max error " + sci(err) + "; independent draws max error " +
           sci((plain - analytic).cwiseAbs().maxCoeff()));
    o.require(err <= 0.1, "within 0.1 per coordinate");
    return o;
  });

  report(5, "Closed-form prox against grid search", 10.0, [] {
    Outcome o;
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
    double worst = 0.0;
    bool inside = true;
    for (int k = 0; k < 100; ++k) {
      const Eigen::Index n = k < 50 ? 1 : 2;
      const bool unit = k % 2 == 0;
      const VectorXd lo = VectorXd::NullaryExpr(n, [&] { return unit ? -1.0 : -std::round(100 * pos(rng)) / 100.0; });
      const VectorXd hi = VectorXd::NullaryExpr(n, [&] { return unit ? 1.0 : std::round(100 * pos(rng)) / 100.0; });
      const VectorXd mu_t = VectorXd::NullaryExpr(n, [&] { return u(rng); }).cwiseMax(lo).cwiseMin(hi);
      const VectorXd g = VectorXd::NullaryExpr(n, [&] { return 5.0 * u(rng); });
      const double eta = 0.01 + pos(rng);
      const double lambda = k % 4 == 0 ? 0.0 : 3.0 * pos(rng);
      const Box<double> box{lo, hi};
      const VectorXd out = prox_step(mu_t, g, eta, lambda, box);
      inside = inside && box.contains(out);
      auto obj = [&](const VectorXd& m) { return oracle::prox_objective(m, mu_t, g, eta, lambda); };
      const auto grid = oracle::fine_grid_min(obj, lo, hi);
      worst = std::max(worst, std::abs(obj(out) - grid.value));
    }
    o.note("100 instances, max |closed form - grid| " + sci(worst));
    o.require(worst <= 1e-6, "value gap <= 1e-6");
    o.require(inside, "outputs inside the box");
    return o;
  });

  report(6, "Partial-feedback decomposition identity", 30.0, [&] {
    Outcome o;
    ScenarioConfig cfg = find(grid.empty() ? run_all(table1) : grid, ScheduleKind::partial).config;
    cfg.trials = 20;
    double worst = 0.0;
    std::int64_t rounds = 0;
    for (std::int64_t trial = 0; trial < cfg.trials; ++trial) {
      run_trial(cfg, trial, Variant::regularized, [&](const RoundView& v) {
        const auto& obs = std::get<PartialFeedback>(v.feedback);
        const VectorXd mu_f = gather(v.played, v.split->observed);
        const VectorXd mu_b = gather(v.played, v.split->unobserved);
        const VectorXd c_b = gather(v.response, v.split->unobserved);
        const double err = v.setpoint - v.response.dot(v.played);
        const double f = err * err;
        const double fF = partial_loss_observed_view(obs.setpoint, obs.beta(mu_f), obs.observed_response, mu_f);
        const double fB = partial_loss_bandit_view(obs.setpoint, obs.observed_response.dot(mu_f), c_b, mu_b);
        const double scale = std::max(1.0, std::abs(f));
        worst = std::max({worst, std::abs(fF - f) / scale, std::abs(fB - f) / scale});
        ++rounds;
      });
    }
    o.note(std::to_string(rounds) + " rounds, max relative deviation " + sci(worst));
    o.require(worst <= 1e-9, "identity to 1e-9 relative");
    return o;
  });

  report(7, "Bernoulli feedback schedule", 0.0, [] {
    Outcome o;
    const double p = bernoulli_probability(7.6, 600);
    o.note("p = " + fmt(p, 4));
    o.require(std::abs(p - 0.90) <= 0.005, "p = 0.90 to two decimals");
    const ProblemBounds b = compute_bounds(100, 3.0, 20.0, 0.0);
    ScheduleTuning tune;
    tune.chi_F = 35.0;
    tune.chi_B = 8000.0;
    tune.a = 7.6;
    std::int64_t bandit = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Bercogd alg = Bercogd::create(100, 600, b, tune, LossParams{}, BernoulliOptions{}, seed);
      bandit += alg.plan().bandit_rounds();
      total += static_cast<std::int64_t>(alg.plan().bandit_round.size());
    }
    const double frac = static_cast<double>(bandit) / static_cast<double>(total);
    o.note("bandit fraction over 100 plans " + fmt(frac, 4));
    o.require(std::abs(frac - 0.90) <= 0.03, "fraction within 0.90 +- 0.03");

    int checked = 0, wrong = 0;
    for (double a : {0.5, 1.0, 2.0, 3.0, 5.0, 7.6, 8.4, 8.5, 10.0, 15.0})
      for (std::int64_t T : {4, 8, 27, 100, 343, 600, 1000, 5000}) {
        const double ratio = a / std::pow(static_cast<double>(T), 1.0 / 3.0);
        if (std::abs(ratio - 1.0) < 1e-9) continue;
        tune.a = a;
        bool rejected = false;
        try {
          Bercogd::create(10, T, b, tune, LossParams{}, BernoulliOptions{}, 1);
        } catch (const Error& e) {
          rejected = e.code() == ErrorCode::invalid_configuration;
        }
        ++checked;
        if (rejected != (ratio > 1.0)) ++wrong;
      }
    o.note(std::to_string(checked - wrong) + "/" + std::to_string(checked) + " (a, T) pairs accepted or rejected correctly");
    o.require(wrong == 0, "reject exactly when a / T^(1/3) > 1");
    return o;
  });

  std::vector<RegimeResult> ev_grid;
  report(8, "EV charge/discharge results", 60.0, [&] {
    Outcome o;
    ev_grid = run_all(ev_cfg);
    const RegimeSummary& s = ev_grid.front().summary;
    o.note(std::to_string(ev_grid.front().config.trials) + " trials: loss decrease " + fmt(s.improvement_pct) +
           "%, sparsity " + fmt(s.sparsity_improvement_pct) + "%, weighted mean " + fmt(s.mean_improvement_pct) +
           "%, simultaneity " + fmt(s.simultaneity_pct) + "% vs " + fmt(s.simultaneity_unregularized_pct) +
           "% unregularized");
    o.require(s.improvement_pct >= 50.0, "loss decrease >= 50%");
    o.require(s.sparsity_improvement_pct >= 60.0, "sparsity >= 60%");
    o.require(s.mean_improvement_pct >= 40.0, "weighted mean >= 40%");
    o.require(s.simultaneity_pct < 5.0, "simultaneity < 5% with regularization");
    o.require(s.simultaneity_unregularized_pct > 50.0, "simultaneity > 50% without");
    return o;
  });

  report(9, "Hindsight optimum against exhaustive grid", 30.0, [] {
    Outcome o;
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.0, 1.0);
    std::uniform_int_distribution<int> rounds(1, 10);
    double worst = 0.0;
    int unconverged = 0;
    for (int k = 0; k < 50; ++k) {
      const int T = rounds(rng);
      const LossParams p{k % 5 == 0 ? 0.0 : pos(rng), k % 7 == 0 ? 0.0 : 0.5 * pos(rng)};
      std::vector<double> s;
      double ours = 0.0, grid = 0.0;
      if (k < 35) {
        const Eigen::Index n = 1 + k % 2;
        LossHistory h = LossHistory::tcl(n, p);
        std::vector<VectorXd> c;
        for (int t = 0; t < T; ++t) {
          c.push_back(VectorXd::NullaryExpr(n, [&] { return u(rng); }));
          s.push_back(2.0 * u(rng));
          h.add_tcl(s.back(), c.back());
        }
        const HindsightResult r = hindsight_optimum(h.objective());
        unconverged += r.converged ? 0 : 1;
        ours = oracle::fixed_decision_total(s, c, r.mu_star, p.rho, p.lambda);
        auto total = [&](const VectorXd& m) { return oracle::fixed_decision_total(s, c, m, p.rho, p.lambda); };
        grid = oracle::full_grid_min(total, VectorXd::Constant(n, -1.0), VectorXd::Constant(n, 1.0), 1000).value;
      } else {
        const double eta_inj = 0.7 + 0.3 * pos(rng), eta_ext = 0.7 + 0.3 * pos(rng);
        LossHistory h = LossHistory::ev(EvEfficiencies{VectorXd::Constant(1, eta_inj), VectorXd::Constant(1, eta_ext)},
                                        LossParams{10.0 * p.rho, p.lambda});
        std::vector<double> cc, cd;
        for (int t = 0; t < T; ++t) {
          cc.push_back(0.5 + pos(rng));
          cd.push_back(0.5 + pos(rng));
          s.push_back(2.0 * u(rng));
          h.add_ev(s.back(), VectorXd::Constant(1, cc.back()), VectorXd::Constant(1, cd.back()));
        }
        const HindsightResult r = hindsight_optimum(h.objective());
        unconverged += r.converged ? 0 : 1;
        auto total = [&](const VectorXd& m) {
          return oracle::fixed_ev_total(s, cc, cd, m(0), m(1), eta_inj, eta_ext, 10.0 * p.rho, p.lambda);
        };
        ours = total(r.mu_star);
        const VectorXd lo = (VectorXd(2) << 0.0, -1.0).finished(), hi = (VectorXd(2) << 1.0, 0.0).finished();
        grid = oracle::full_grid_min(total, lo, hi, 1000).value;
      }
      worst = std::max(worst, std::abs(ours - grid));
    }
    o.note("50 instances (35 TCL, 15 EV), max |solver - grid| " + sci(worst) + ", unconverged " +
           std::to_string(unconverged));
    o.require(worst <= 1e-4, "within 1e-4 of the grid");
    return o;
  });

  report(10, "Determinism of the acceptance grid", 0.0, [&] {
    Outcome o;
    const std::string first = csv_bytes(grid) + csv_bytes(ev_grid);
    const std::string second = csv_bytes(run_all(table1)) + csv_bytes(run_all(ev_cfg));
    o.note("two runs, " + std::to_string(first.size()) + " CSV bytes each");
    o.require(!grid.empty() && !ev_grid.empty(), "grids available");
    o.require(first == second, "byte-identical CSVs");
    return o;
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
