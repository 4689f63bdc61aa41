#include "drtrack/loads.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "drtrack/format.hpp"

namespace drtrack {

void NoiseModel::validate() const {
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi, ErrorCode::invalid_argument,
          "noise support needs finite lo < hi");
  require(std::isfinite(sd) && sd >= 0.0, ErrorCode::invalid_argument, "noise sd must be >= 0");
  require(std::isfinite(mean), ErrorCode::invalid_argument, "noise mean must be finite");
}

double sample_truncated_gaussian(double mean, double sd, double lo, double hi, Rng& rng) {
  require(lo < hi, ErrorCode::invalid_argument, "truncated gaussian needs lo < hi");
  require(sd >= 0.0, ErrorCode::invalid_argument, "truncated gaussian needs sd >= 0");
  if (sd == 0.0) {
    require(mean >= lo && mean <= hi, ErrorCode::sampling_failure, "degenerate noise mean outside its support");
    return mean;
  }
  std::normal_distribution<double> gauss(mean, sd);
  for (int i = 0; i < kMaxTruncationRejections; ++i) {
    const double x = gauss(rng);
    if (x >= lo && x <= hi) return x;
  }
  throw Error(ErrorCode::sampling_failure, "truncated gaussian acceptance region has negligible mass");
}

// --- TCL --------------------------------------------------------------------

SteadyControl tcl_steady_control(const TclParams& params, double theta_a) {
  require(params.R > 0 && params.C > 0 && params.P_R > 0 && params.COP > 0, ErrorCode::invalid_argument,
          "TCL parameters must be positive");
  SteadyControl out;
  out.m_bar = (theta_a - params.theta_d) / (params.P_R * params.R);
  require(out.m_bar > 0.0 && out.m_bar < 1.0, ErrorCode::infeasible_load,
          "steady duty m_bar = " + format_number(out.m_bar) + " outside (0, 1)");
  out.p = params.P_R / params.COP;
  out.c0 = out.p * std::min(out.m_bar, 1.0 - out.m_bar);
  return out;
}

TclState tcl_temp_step(const TclState& state, const TclParams& params, double theta_a, double m, double h_hours) {
  require(h_hours > 0.0, ErrorCode::invalid_argument, "time step must be > 0");
  const double b = std::exp(-h_hours / (params.R * params.C));
  return TclState{b * state.theta + (1.0 - b) * (theta_a - m * params.R * params.P_R)};
}

double tcl_apply_signal(double mu, double m_bar) {
  return m_bar + mu * std::min(m_bar, 1.0 - m_bar);
}

VectorXd tcl_observe_response(const VectorXd& c0, Rng& rng, const NoiseModel& noise) {
  VectorXd c(c0.size());
  for (Eigen::Index i = 0; i < c0.size(); ++i)
    c(i) = c0(i) + sample_truncated_gaussian(noise.mean, noise.sd, noise.lo, noise.hi, rng);
  return c;
}

void TclRanges::validate() const {
  for (const Range& r : {R, C, P_R, COP, theta_d})
    require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi, ErrorCode::invalid_ranges,
            "parameter range needs lo <= hi");
  require(R.lo > 0 && C.lo > 0 && P_R.lo > 0 && COP.lo > 0, ErrorCode::invalid_ranges,
          "thermal parameters must be positive");
  require(m_bar_lo >= 0.0 && m_bar_lo < m_bar_hi && m_bar_hi <= 1.0, ErrorCode::invalid_ranges,
          "m_bar acceptance window must satisfy 0 <= lo < hi <= 1");
}

TclFleet::TclFleet(std::vector<TclParams> params, double theta_a)
    : params_(std::move(params)), theta_a_(theta_a) {
  require(!params_.empty(), ErrorCode::invalid_argument, "fleet needs at least one load");
  const auto n = size();
  m_bar_.resize(n);
  c0_.resize(n);
  p_.resize(n);
  state_.resize(params_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& prm = params_[static_cast<std::size_t>(i)];
    const SteadyControl sc = tcl_steady_control(prm, theta_a_);
    m_bar_(i) = sc.m_bar;
    c0_(i) = sc.c0;
    p_(i) = sc.p;
    state_[static_cast<std::size_t>(i)].theta = prm.theta_d;
  }
}

double TclFleet::response_bound(const NoiseModel& noise) const { return c0_.maxCoeff() + noise.hi; }

VectorXd TclFleet::temperatures() const {
  VectorXd out(size());
  for (Eigen::Index i = 0; i < size(); ++i) out(i) = state_[static_cast<std::size_t>(i)].theta;
  return out;
}

void TclFleet::step(const VectorXd& mu, double h_hours) {
  require(mu.size() == size(), ErrorCode::invalid_argument, "signal length differs from fleet size");
  for (Eigen::Index i = 0; i < size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const double m = tcl_apply_signal(std::clamp(mu(i), -1.0, 1.0), m_bar_(i));
    state_[k] = tcl_temp_step(state_[k], params_[k], theta_a_, m, h_hours);
  }
}

TclFleet tcl_fleet_init(Eigen::Index loads, Rng& rng, const TclRanges& ranges) {
  require(loads >= 1, ErrorCode::invalid_argument, "fleet needs at least one load");
  ranges.validate();
  auto draw = [&rng](const Range& r) { return std::uniform_real_distribution<double>(r.lo, r.hi)(rng); };
  std::vector<TclParams> params;
  params.reserve(static_cast<std::size_t>(loads));
  int rejections = 0;
  while (static_cast<Eigen::Index>(params.size()) < loads) {
    TclParams p;
    p.R = draw(ranges.R);
    p.C = draw(ranges.C);
    p.P_R = draw(ranges.P_R);
    p.COP = draw(ranges.COP);
    p.theta_d = draw(ranges.theta_d);
    const double m_bar = (ranges.theta_a - p.theta_d) / (p.P_R * p.R);
    if (m_bar > ranges.m_bar_lo && m_bar < ranges.m_bar_hi) {
      params.push_back(p);
      rejections = 0;
    } else if (++rejections > kMaxFleetRejections) {
      throw Error(ErrorCode::invalid_ranges, "parameter ranges rarely yield a steady duty inside (" +
                                                 format_number(ranges.m_bar_lo) + ", " +
                                                 format_number(ranges.m_bar_hi) + ")");
    }
  }
  return TclFleet(std::move(params), ranges.theta_a);
}

// --- EV ---------------------------------------------------------------------

void EvParams::validate() const {
  require(eta_inj > 0.0 && eta_inj <= 1.0 && eta_ext > 0.0 && eta_ext <= 1.0, ErrorCode::invalid_argument,
          "EV efficiencies must lie in (0, 1]");
  require(capacity > 0.0 && charge_rate > 0.0 && discharge_rate > 0.0, ErrorCode::invalid_argument,
          "EV capacity and rates must be positive");
}

EvResponse ev_observe_response(const std::vector<EvParams>& params, Rng& rng, const NoiseModel& noise) {
  const auto n = static_cast<Eigen::Index>(params.size());
  EvResponse r{VectorXd(n), VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = params[static_cast<std::size_t>(i)];
    r.charge(i) = p.charge_rate + sample_truncated_gaussian(noise.mean, noise.sd, noise.lo, noise.hi, rng);
    r.discharge(i) = p.discharge_rate + sample_truncated_gaussian(noise.mean, noise.sd, noise.lo, noise.hi, rng);
  }
  return r;
}

VectorXd ev_weighted_signal(const EvEfficiencies& eff, const VectorXd& c_c, const VectorXd& c_d,
                            const VectorXd& mu_c, const VectorXd& mu_d) {
  return (eff.injection.array() * c_c.array() * mu_c.array() + c_d.array() * mu_d.array() / eff.extraction.array())
      .matrix();
}

EvLossGradient ev_loss_and_gradient(double setpoint, const VectorXd& c_c, const VectorXd& c_d,
                                    const VectorXd& mu_c, const VectorXd& mu_d, double rho,
                                    const RunningMean<double>& weighted_mean_prev, std::int64_t t,
                                    const EvEfficiencies& eff) {
  const auto n = c_c.size();
  require(c_d.size() == n && mu_c.size() == n && mu_d.size() == n && eff.injection.size() == n &&
              eff.extraction.size() == n,
          ErrorCode::invalid_argument, "ev_loss_and_gradient: length mismatch");
  require(t >= 1, ErrorCode::invalid_argument, "ev_loss_and_gradient: round index must be >= 1");
  constexpr double tol = 1e-12;
  require((mu_c.array() >= -tol).all() && (mu_c.array() <= 1.0 + tol).all(), ErrorCode::invalid_argument,
          "charging signal outside [0, 1]");
  require((mu_d.array() >= -1.0 - tol).all() && (mu_d.array() <= tol).all(), ErrorCode::invalid_argument,
          "discharging signal outside [-1, 0]");

  const double err = setpoint - c_c.dot(mu_c) - c_d.dot(mu_d);
  EvLossGradient out;
  out.loss = err * err;
  out.grad_c = -2.0 * err * c_c;
  out.grad_d = -2.0 * err * c_d;
  if (rho != 0.0) {
    const double td = static_cast<double>(t);
    const VectorXd prev = weighted_mean_prev.rounds == 0 ? VectorXd::Zero(n) : weighted_mean_prev.mean;
    require(prev.size() == n, ErrorCode::invalid_argument, "weighted mean length mismatch");
    const VectorXd mean_t = (static_cast<double>(t - 1) * prev + ev_weighted_signal(eff, c_c, c_d, mu_c, mu_d)) / td;
    out.loss += rho * mean_t.squaredNorm();
    const double scale = 2.0 * rho / td;
    out.grad_c.array() += scale * eff.injection.array() * c_c.array() * mean_t.array();
    out.grad_d.array() += scale * c_d.array() / eff.extraction.array() * mean_t.array();
  }
  return out;
}

EvState ev_soc_step(const EvState& state, const EvParams& params, double c_c, double c_d, double mu_c, double mu_d,
                    double h_hours) {
  const double weighted = params.eta_inj * c_c * mu_c + c_d * mu_d / params.eta_ext;
  EvState next = state;
  const double soc = state.soc + h_hours / params.capacity * weighted;
  next.soc = std::clamp(soc, 0.0, 1.0);
  if (next.soc != soc) ++next.saturation_events;
  next.rounds = state.rounds + 1;
  next.weighted_mean =
      (static_cast<double>(state.rounds) * state.weighted_mean + weighted) / static_cast<double>(next.rounds);
  return next;
}

EvFleet::EvFleet(std::vector<EvParams> params, double initial_soc) : params_(std::move(params)) {
  require(!params_.empty(), ErrorCode::invalid_argument, "fleet needs at least one vehicle");
  require(initial_soc >= 0.0 && initial_soc <= 1.0, ErrorCode::invalid_argument, "initial SoC outside [0, 1]");
  for (const auto& p : params_) p.validate();
  state_.assign(params_.size(), EvState{initial_soc, 0.0, 0, 0});
}

EvEfficiencies EvFleet::efficiencies() const {
  EvEfficiencies eff{VectorXd(size()), VectorXd(size())};
  for (Eigen::Index i = 0; i < size(); ++i) {
    eff.injection(i) = params_[static_cast<std::size_t>(i)].eta_inj;
    eff.extraction(i) = params_[static_cast<std::size_t>(i)].eta_ext;
  }
  return eff;
}

VectorXd EvFleet::soc() const {
  VectorXd out(size());
  for (Eigen::Index i = 0; i < size(); ++i) out(i) = state_[static_cast<std::size_t>(i)].soc;
  return out;
}

VectorXd EvFleet::weighted_mean() const {
  VectorXd out(size());
  for (Eigen::Index i = 0; i < size(); ++i) out(i) = state_[static_cast<std::size_t>(i)].weighted_mean;
  return out;
}

std::int64_t EvFleet::saturation_events() const {
  std::int64_t n = 0;
  for (const auto& s : state_) n += s.saturation_events;
  return n;
}

double EvFleet::response_bound(const NoiseModel& noise) const {
  double rate = 0.0;
  for (const auto& p : params_) rate = std::max({rate, p.charge_rate, p.discharge_rate});
  return rate + noise.hi;
}

void EvFleet::step(const EvResponse& response, const VectorXd& mu_c, const VectorXd& mu_d, double h_hours) {
  require(mu_c.size() == size() && mu_d.size() == size(), ErrorCode::invalid_argument,
          "signal length differs from fleet size");
  for (Eigen::Index i = 0; i < size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    state_[k] = ev_soc_step(state_[k], params_[k], response.charge(i), response.discharge(i), mu_c(i), mu_d(i),
                            h_hours);
  }
}

EvFleet ev_fleet_init(Eigen::Index loads, const EvParams& params, double initial_soc) {
  require(loads >= 1, ErrorCode::invalid_argument, "fleet needs at least one vehicle");
  return EvFleet(std::vector<EvParams>(static_cast<std::size_t>(loads), params), initial_soc);
}

// --- fleet files ------------------------------------------------------------

namespace {

std::vector<std::vector<double>> read_rows(std::istream& in, std::size_t columns, const char* what) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      auto v = parse_double(tok);
      require(v.has_value(), ErrorCode::invalid_argument,
              std::string(what) + " line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      row.push_back(*v);
    }
    require(row.size() == columns, ErrorCode::invalid_argument,
            std::string(what) + " line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                " columns");
    require(static_cast<std::size_t>(row[0]) == rows.size(), ErrorCode::invalid_argument,
            std::string(what) + " line " + std::to_string(line_no) + ": rows must be indexed 0, 1, 2, ...");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::invalid_argument, std::string(what) + ": no rows");
  return rows;
}

}  // namespace

void write_tcl_fleet(std::ostream& out, const TclFleet& fleet) {
  out << "# drtrack tcl fleet\n# theta_a " << format_number(fleet.theta_a()) << "\n";
  out << "# index R C P_R COP theta_d\n";
  std::int64_t i = 0;
  for (const auto& p : fleet.params()) {
    out << i++ << ' ' << format_number(p.R) << ' ' << format_number(p.C) << ' ' << format_number(p.P_R) << ' '
        << format_number(p.COP) << ' ' << format_number(p.theta_d) << '\n';
  }
}

std::vector<TclParams> read_tcl_fleet(std::istream& in) {
  std::vector<TclParams> out;
  for (const auto& r : read_rows(in, 6, "tcl fleet")) out.push_back(TclParams{r[1], r[2], r[3], r[4], r[5]});
  return out;
}

void write_ev_fleet(std::ostream& out, const EvFleet& fleet) {
  out << "# drtrack ev fleet\n# index eta_inj eta_ext capacity charge_rate discharge_rate\n";
  std::int64_t i = 0;
  for (const auto& p : fleet.params()) {
    out << i++ << ' ' << format_number(p.eta_inj) << ' ' << format_number(p.eta_ext) << ' '
        << format_number(p.capacity) << ' ' << format_number(p.charge_rate) << ' '
        << format_number(p.discharge_rate) << '\n';
  }
}

std::vector<EvParams> read_ev_fleet(std::istream& in) {
  std::vector<EvParams> out;
  for (const auto& r : read_rows(in, 6, "ev fleet")) out.push_back(EvParams{r[1], r[2], r[3], r[4], r[5]});
  return out;
}

}  // namespace drtrack
