#include "drtrack/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "drtrack/format.hpp"

namespace drtrack {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(ErrorCode::invalid_configuration, what); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double as_double(const std::string& key, const std::string& v) {
  auto x = parse_double(v);
  if (!x || !std::isfinite(*x)) config_error(key + ": expected a finite number, got '" + v + "'");
  return *x;
}

std::int64_t as_int(const std::string& key, const std::string& v) {
  auto x = parse_int(v);
  if (!x) config_error(key + ": expected an integer, got '" + v + "'");
  return *x;
}

std::uint64_t as_uint(const std::string& key, const std::string& v) {
  auto x = parse_uint(v);
  if (!x) config_error(key + ": expected an unsigned integer, got '" + v + "'");
  return *x;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  config_error(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double x) { return format_number(x); }
std::string fmt_int(std::int64_t x) { return format_number(x); }
std::string fmt_bool(bool b) { return b ? "true" : "false"; }

struct Field {
  std::string key;
  std::function<void(ScenarioConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const ScenarioConfig&)> get;
};

#define DRTRACK_DOUBLE(KEY, MEMBER)                                                                    \
  Field {                                                                                              \
    KEY, [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.MEMBER = as_double(k, v); }, \
        [](const ScenarioConfig& c) { return fmt(c.MEMBER); }                                          \
  }

#define DRTRACK_INT(KEY, MEMBER)                                                                      \
  Field {                                                                                             \
    KEY, [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.MEMBER = as_int(k, v); }, \
        [](const ScenarioConfig& c) { return fmt_int(c.MEMBER); }                                     \
  }

#define DRTRACK_BOOL(KEY, MEMBER)                                                                      \
  Field {                                                                                              \
    KEY, [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.MEMBER = as_bool(k, v); }, \
        [](const ScenarioConfig& c) { return fmt_bool(c.MEMBER); }                                     \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      DRTRACK_INT("experiment.trials", trials),
      DRTRACK_INT("experiment.rounds", rounds),
      DRTRACK_INT("experiment.loads", loads),
      DRTRACK_INT("experiment.observed", observed),
      Field{"experiment.seed",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) { c.seed = as_uint(k, v); },
            [](const ScenarioConfig& c) { return std::to_string(c.seed); }},
      Field{"experiment.trajectory_loads",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              c.trajectory_loads.clear();
              for (const auto& item : split_list(v)) c.trajectory_loads.push_back(as_int(k, item));
            },
            [](const ScenarioConfig& c) {
              std::string out;
              for (std::size_t i = 0; i < c.trajectory_loads.size(); ++i)
                out += (i ? "," : "") + fmt_int(c.trajectory_loads[i]);
              return out;
            }},
      DRTRACK_BOOL("regularization.bernoulli_mean_regularizer", bernoulli.use_mean_regularizer),
      DRTRACK_DOUBLE("tuning.chi", chi),
      DRTRACK_DOUBLE("tuning.chi_bandit", chi_bandit),
      DRTRACK_DOUBLE("tuning.chi_F", chi_F),
      DRTRACK_DOUBLE("tuning.chi_B", chi_B),
      DRTRACK_DOUBLE("tuning.a", a),
      DRTRACK_BOOL("tuning.bernoulli_warmup", bernoulli.warmup),
      DRTRACK_DOUBLE("setpoint.amplitude", setpoint.amplitude),
      DRTRACK_DOUBLE("setpoint.frequency", setpoint.frequency),
      DRTRACK_DOUBLE("setpoint.offset", setpoint.offset),
      DRTRACK_DOUBLE("noise.mean", noise.mean),
      DRTRACK_DOUBLE("noise.sd", noise.sd),
      DRTRACK_DOUBLE("noise.lo", noise.lo),
      DRTRACK_DOUBLE("noise.hi", noise.hi),
      DRTRACK_DOUBLE("tcl.R_lo", tcl.R.lo),
      DRTRACK_DOUBLE("tcl.R_hi", tcl.R.hi),
      DRTRACK_DOUBLE("tcl.C_lo", tcl.C.lo),
      DRTRACK_DOUBLE("tcl.C_hi", tcl.C.hi),
      DRTRACK_DOUBLE("tcl.P_R_lo", tcl.P_R.lo),
      DRTRACK_DOUBLE("tcl.P_R_hi", tcl.P_R.hi),
      DRTRACK_DOUBLE("tcl.COP_lo", tcl.COP.lo),
      DRTRACK_DOUBLE("tcl.COP_hi", tcl.COP.hi),
      DRTRACK_DOUBLE("tcl.theta_d_lo", tcl.theta_d.lo),
      DRTRACK_DOUBLE("tcl.theta_d_hi", tcl.theta_d.hi),
      DRTRACK_DOUBLE("tcl.theta_a", tcl.theta_a),
      DRTRACK_DOUBLE("tcl.m_bar_lo", tcl.m_bar_lo),
      DRTRACK_DOUBLE("tcl.m_bar_hi", tcl.m_bar_hi),
      Field{"tcl.step_minutes",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              c.tcl_step_hours = as_double(k, v) / 60.0;
            },
            [](const ScenarioConfig& c) { return fmt(c.tcl_step_hours * 60.0); }},
      DRTRACK_DOUBLE("ev.eta_inj", ev.eta_inj),
      DRTRACK_DOUBLE("ev.eta_ext", ev.eta_ext),
      DRTRACK_DOUBLE("ev.capacity", ev.capacity),
      DRTRACK_DOUBLE("ev.charge_rate", ev.charge_rate),
      DRTRACK_DOUBLE("ev.discharge_rate", ev.discharge_rate),
      DRTRACK_DOUBLE("ev.initial_soc", ev_initial_soc),
      Field{"ev.step_minutes",
            [](ScenarioConfig& c, const std::string& k, const std::string& v) {
              c.ev_step_hours = as_double(k, v) / 60.0;
            },
            [](const ScenarioConfig& c) { return fmt(c.ev_step_hours * 60.0); }},
  };
  return table;
}

#undef DRTRACK_DOUBLE
#undef DRTRACK_INT
#undef DRTRACK_BOOL

const std::vector<std::string>& feedback_names() {
  static const std::vector<std::string> names = {"full", "bandit", "partial", "bernoulli"};
  return names;
}

std::vector<std::string> special_keys() {
  std::vector<std::string> keys = {"experiment.scenario", "experiment.feedback", "experiment.out",
                                   "regularization.rho", "regularization.lambda", "tcl.fleet_file"};
  for (const auto& fb : feedback_names()) {
    keys.push_back("regularization.rho." + fb);
    keys.push_back("regularization.lambda." + fb);
  }
  return keys;
}

std::string section_of(const std::string& key) { return key.substr(0, key.find('.')); }

void check_known(const std::string& key, const std::string& where) {
  const auto keys = valid_keys();
  if (std::find(keys.begin(), keys.end(), key) != keys.end()) return;
  const std::string section = section_of(key);
  std::set<std::string> sections;
  std::string alternatives;
  for (const auto& k : keys) {
    sections.insert(section_of(k));
    if (section_of(k) == section) alternatives += (alternatives.empty() ? "" : ", ") + k.substr(section.size() + 1);
  }
  if (alternatives.empty()) {
    std::string list;
    for (const auto& s : sections) list += (list.empty() ? "" : ", ") + s;
    config_error(where + "unknown section [" + section + "]; valid sections: " + list);
  }
  config_error(where + "unknown key '" + key.substr(section.size() + 1) + "' in [" + section +
               "]; valid keys: " + alternatives);
}

const std::string* lookup(const RawConfig& raw, const std::string& key) {
  for (const auto& [k, v] : raw)
    if (k == key) return &v;
  return nullptr;
}

}  // namespace

std::vector<std::string> valid_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  for (auto& k : special_keys()) keys.push_back(std::move(k));
  return keys;
}

RawConfig parse_raw_config(std::istream& in, const std::string& origin) {
  RawConfig raw;
  std::string section;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = origin + ":" + std::to_string(line_no) + ": ";
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) config_error(where + "malformed section header '" + text + "'");
      section = trim(text.substr(1, text.size() - 2));
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) config_error(where + "expected 'key = value', got '" + text + "'");
    if (section.empty()) config_error(where + "key outside of any [section]");
    const std::string key = section + "." + trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    check_known(key, where);
    if (lookup(raw, key) != nullptr) config_error(where + "duplicate key '" + key + "'");
    raw.emplace_back(key, value);
  }
  return raw;
}

void set_override(RawConfig& raw, const std::string& key, const std::string& value) {
  check_known(key, "override: ");
  if (key == "regularization.rho" || key == "regularization.lambda") {
    const std::string prefix = key + ".";
    raw.erase(std::remove_if(raw.begin(), raw.end(),
                             [&](const auto& kv) { return kv.first.rfind(prefix, 0) == 0; }),
              raw.end());
  }
  for (auto& kv : raw) {
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  }
  raw.emplace_back(key, value);
}

ExperimentConfig resolve_config(const RawConfig& raw, const std::filesystem::path& base_dir) {
  for (const auto& kv : raw) check_known(kv.first, "");
  const std::string* scenario_text = lookup(raw, "experiment.scenario");
  if (scenario_text == nullptr) config_error("missing required key experiment.scenario (tcl or ev)");
  const auto scenario = parse_scenario(*scenario_text);
  if (!scenario) config_error("experiment.scenario: expected tcl or ev, got '" + *scenario_text + "'");
  const std::string* feedback_text = lookup(raw, "experiment.feedback");
  if (feedback_text == nullptr)
    config_error("missing required key experiment.feedback (full, bandit, partial, bernoulli)");
  std::vector<ScheduleKind> kinds;
  for (const auto& item : split_list(*feedback_text)) {
    const auto kind = parse_feedback(item);
    if (!kind) config_error("experiment.feedback: unknown feedback '" + item + "'; valid: full, bandit, partial, bernoulli");
    if (std::find(kinds.begin(), kinds.end(), *kind) != kinds.end())
      config_error("experiment.feedback: '" + item + "' listed twice");
    kinds.push_back(*kind);
  }
  if (kinds.empty()) config_error("experiment.feedback: empty list");

  ExperimentConfig out;
  std::optional<std::vector<TclParams>> fleet;
  if (const std::string* file = lookup(raw, "tcl.fleet_file")) {
    std::filesystem::path p(*file);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    std::ifstream in(p);
    if (!in) config_error("tcl.fleet_file: cannot open '" + p.string() + "'");
    try {
      fleet = read_tcl_fleet(in);
    } catch (const Error& e) {
      config_error("tcl.fleet_file '" + p.string() + "': " + e.what());
    }
    out.fleet_file = std::filesystem::absolute(p).lexically_normal().string();
  }

  if (const std::string* o = lookup(raw, "experiment.out")) out.out = *o;
  for (ScheduleKind kind : kinds) {
    ScenarioConfig cfg = ScenarioConfig::defaults(*scenario, kind);
    if (fleet) {
      cfg.tcl_fleet = fleet;
      cfg.loads = static_cast<std::int64_t>(fleet->size());
    }
    for (const auto& f : fields())
      if (const std::string* v = lookup(raw, f.key)) f.set(cfg, f.key, *v);
    const std::string fb = to_string(kind);
    for (const std::string name : {"rho", "lambda"}) {
      double* target = name == "rho" ? &cfg.params.rho : &cfg.params.lambda;
      const std::string generic = "regularization." + name;
      if (const std::string* v = lookup(raw, generic)) *target = as_double(generic, *v);
      if (const std::string* v = lookup(raw, generic + "." + fb)) *target = as_double(generic + "." + fb, *v);
    }
    cfg.validate();
    out.cells.push_back(std::move(cfg));
  }
  return out;
}

ExperimentConfig load_config(const std::filesystem::path& path, const RawConfig& overrides) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config file '" + path.string() + "'");
  RawConfig raw = parse_raw_config(in, path.string());
  for (const auto& [k, v] : overrides) set_override(raw, k, v);
  return resolve_config(raw, path.parent_path());
}

std::string render_config(const ExperimentConfig& cfg) {
  require(!cfg.cells.empty(), ErrorCode::invalid_argument, "render_config: no cells");
  const ScenarioConfig& first = cfg.cells.front();
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> by_section;
  std::vector<std::string> order;
  auto put = [&](const std::string& key, const std::string& value) {
    const std::string section = section_of(key);
    if (by_section.find(section) == by_section.end()) order.push_back(section);
    by_section[section].emplace_back(key.substr(section.size() + 1), value);
  };
  put("experiment.scenario", to_string(first.scenario));
  std::string feedback;
  for (const auto& c : cfg.cells) feedback += (feedback.empty() ? "" : ",") + std::string(to_string(c.feedback));
  put("experiment.feedback", feedback);
  put("experiment.out", cfg.out);
  for (const auto& c : cfg.cells) {
    put(std::string("regularization.rho.") + to_string(c.feedback), fmt(c.params.rho));
    put(std::string("regularization.lambda.") + to_string(c.feedback), fmt(c.params.lambda));
  }
  for (const auto& f : fields()) put(f.key, f.get(first));
  if (!cfg.fleet_file.empty()) put("tcl.fleet_file", cfg.fleet_file);
  std::ostringstream os;
  for (const auto& section : order) {
    os << "[" << section << "]\n";
    for (const auto& [k, v] : by_section[section]) os << k << " = " << v << "\n";
    os << "\n";
  }
  return os.str();
}

}  // namespace drtrack
