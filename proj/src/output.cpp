#include "drtrack/output.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "drtrack/format.hpp"

namespace drtrack {

const char* const kRoundsHeader =
    "scenario,feedback,variant,t,setpoint,aggregate_adjustment,loss,cumulative_loss,regret,mean_norm,l1_norm";
const char* const kSummaryHeader =
    "scenario,feedback,trials,rho,lambda,improvement_pct,improvement_unregularized_pct,mean_improvement_pct,"
    "sparsity_improvement_pct,simultaneity_pct,simultaneity_unregularized_pct,regret_final,regret_bound";
const char* const kTrajectoriesHeader = "scenario,feedback,variant,load,t,state,signal";

namespace {

/// Builds one CSV line; numeric cells must be finite.
class Row {
 public:
  Row(const char* file, std::int64_t t) : file_(file), t_(t) {}

  Row& text(const std::string& s) {
    sep();
    line_ += s;
    return *this;
  }

  Row& integer(std::int64_t x) { return text(format_number(x)); }

  Row& number(double x, const char* column) {
    if (!std::isfinite(x))
      throw Error(ErrorCode::invalid_argument, std::string(file_) + ": non-finite value in column " + column +
                                                   " at round " + std::to_string(t_));
    return text(format_number(x));
  }

  void emit(std::ostream& out) { out << line_ << '\n'; }

 private:
  void sep() {
    if (!first_) line_ += ',';
    first_ = false;
  }

  const char* file_;
  std::int64_t t_;
  std::string line_;
  bool first_ = true;
};

void rounds_rows(std::ostream& out, const RegimeResult& r, const MetricsLedger& l, const char* variant) {
  for (std::size_t k = 0; k < l.loss.size(); ++k) {
    const auto t = static_cast<std::int64_t>(k + 1);
    Row row("rounds.csv", t);
    row.text(to_string(r.config.scenario)).text(to_string(r.config.feedback)).text(variant).integer(t);
    row.number(l.setpoint[k], "setpoint")
        .number(l.aggregate[k], "aggregate_adjustment")
        .number(l.loss[k], "loss")
        .number(l.cumulative_loss[k], "cumulative_loss")
        .number(l.regret[k], "regret")
        .number(l.mean_norm[k], "mean_norm")
        .number(l.l1_norm[k], "l1_norm");
    row.emit(out);
  }
}

void trajectory_rows(std::ostream& out, const RegimeResult& r, const Trajectory& tr, const char* variant) {
  for (std::size_t j = 0; j < tr.loads.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    for (Eigen::Index k = 0; k < tr.state.rows(); ++k) {
      Row row("trajectories.csv", k + 1);
      row.text(to_string(r.config.scenario)).text(to_string(r.config.feedback)).text(variant);
      row.integer(tr.loads[j]).integer(k + 1);
      row.number(tr.state(k, col), "state").number(tr.signal(k, col), "signal");
      row.emit(out);
    }
  }
}

}  // namespace

void write_rounds_csv(std::ostream& out, const std::vector<RegimeResult>& results) {
  out << kRoundsHeader << '\n';
  for (const auto& r : results) {
    rounds_rows(out, r, r.mean_regularized, to_string(Variant::regularized));
    rounds_rows(out, r, r.mean_unregularized, to_string(Variant::unregularized));
    rounds_rows(out, r, r.mean_baseline, to_string(Variant::baseline));
  }
}

void write_summary_csv(std::ostream& out, const std::vector<RegimeResult>& results) {
  out << kSummaryHeader << '\n';
  for (const auto& r : results) {
    if (r.config.trials == 0) continue;
    const RegimeSummary& s = r.summary;
    Row row("summary.csv", 0);
    row.text(to_string(r.config.scenario)).text(to_string(r.config.feedback)).integer(r.config.trials);
    row.number(r.config.params.rho, "rho")
        .number(r.config.params.lambda, "lambda")
        .number(s.improvement_pct, "improvement_pct")
        .number(s.improvement_unregularized_pct, "improvement_unregularized_pct")
        .number(s.mean_improvement_pct, "mean_improvement_pct")
        .number(s.sparsity_improvement_pct, "sparsity_improvement_pct")
        .number(s.simultaneity_pct, "simultaneity_pct")
        .number(s.simultaneity_unregularized_pct, "simultaneity_unregularized_pct")
        .number(s.regret_final, "regret_final")
        .number(s.regret_bound, "regret_bound");
    row.emit(out);
  }
}

void write_trajectories_csv(std::ostream& out, const std::vector<RegimeResult>& results) {
  out << kTrajectoriesHeader << '\n';
  for (const auto& r : results) {
    if (r.trajectory_regularized) trajectory_rows(out, r, *r.trajectory_regularized, to_string(Variant::regularized));
    if (r.trajectory_unregularized)
      trajectory_rows(out, r, *r.trajectory_unregularized, to_string(Variant::unregularized));
  }
}

void write_manifest(std::ostream& out, const ExperimentConfig& cfg, const ManifestInfo& info) {
  out << "# dr_track run manifest\n";
  out << "# version " << info.version << '\n';
  if (info.duration_seconds >= 0.0)
    out << "# duration_seconds " << format_number(info.duration_seconds) << '\n';
  else
    out << "# duration_seconds pending\n";
  for (const auto& f : info.outputs) out << "# output " << f << '\n';
  out << '\n' << render_config(cfg);
}

namespace {

template <typename F>
void write_file(const std::filesystem::path& path, F&& body) {
  std::ostringstream buf;
  body(buf);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  out << buf.str();
  out.close();
  if (!out) throw Error(ErrorCode::io_failure, "failed writing '" + path.string() + "'");
}

}  // namespace

std::vector<std::string> emit_outputs(const std::vector<RegimeResult>& results, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io_failure, "cannot create output directory '" + dir.string() + "': " + ec.message());
  std::vector<std::string> files = {"rounds.csv", "summary.csv", "trajectories.csv"};
  write_file(dir / "rounds.csv", [&](std::ostream& os) { write_rounds_csv(os, results); });
  write_file(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, results); });
  write_file(dir / "trajectories.csv", [&](std::ostream& os) { write_trajectories_csv(os, results); });
  if (!results.empty() && !results.front().fleet_dump.empty()) {
    write_file(dir / "fleet.txt", [&](std::ostream& os) { os << results.front().fleet_dump; });
    files.emplace_back("fleet.txt");
  }
  return files;
}

std::string summary_table(const std::vector<RegimeResult>& results) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "Setpoint tracking improvement vs. no DR\n";
  os << std::left << std::setw(12) << "feedback" << std::right << std::setw(8) << "trials" << std::setw(16)
     << "regularized %" << std::setw(18) << "unregularized %" << std::setw(10) << "rho" << std::setw(10) << "lambda"
     << '\n';
  for (const auto& r : results) {
    os << std::left << std::setw(12) << to_string(r.config.feedback) << std::right << std::setw(8) << r.config.trials
       << std::setw(16) << r.summary.improvement_pct << std::setw(18) << r.summary.improvement_unregularized_pct
       << std::setw(10) << r.config.params.rho << std::setw(10) << r.config.params.lambda << '\n';
  }
  os << "\nPer-round regularizer improvement vs. unregularized\n";
  os << std::left << std::setw(12) << "feedback" << std::right << std::setw(10) << "mean %" << std::setw(12)
     << "sparsity %";
  const bool ev = !results.empty() && results.front().config.scenario == Scenario::ev;
  if (ev) os << std::setw(16) << "simultaneous %" << std::setw(18) << "(unregularized)";
  os << '\n';
  for (const auto& r : results) {
    os << std::left << std::setw(12) << to_string(r.config.feedback) << std::right << std::setw(10)
       << r.summary.mean_improvement_pct << std::setw(12) << r.summary.sparsity_improvement_pct;
    if (ev) os << std::setw(16) << r.summary.simultaneity_pct << std::setw(18) << r.summary.simultaneity_unregularized_pct;
    os << '\n';
  }
  return os.str();
}

}  // namespace drtrack
