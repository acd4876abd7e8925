#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mcra/errors.hpp"

namespace mcra {

enum class Scenario { fixed, dynamic, rate };
enum class BaselineKind { none, max_rate, pf, aloha };

inline std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::fixed: return "fixed";
    case Scenario::dynamic: return "dynamic";
    default: return "rate";
  }
}
inline std::string to_string(BaselineKind b) {
  switch (b) {
    case BaselineKind::none: return "none";
    case BaselineKind::max_rate: return "max_rate";
    case BaselineKind::pf: return "pf";
    default: return "aloha";
  }
}

// Flat key/value run configuration. Defaults follow the reference
// hyperparameters (learning rate 0.01, tau 0.95, epsilon 0.1, minibatch 40,
// LSTM 300 / value 50); desk-scale runs override the network sizes.
struct ExperimentConfig {
  Scenario scenario = Scenario::fixed;
  int n_rbs = 0;  // required
  int k_max = 5;

  // population
  int n_users = 5;         // fixed scenario
  double lambda = 0.02;    // dynamic scenario, arrivals/slot
  int t_min = 900;         // dynamic activity duration bounds
  int t_max = 1100;
  std::string trace;       // rate scenario trace file

  std::vector<int> t_w = {5, 10, 20};
  long horizon = 0;  // 0 = scenario default (50k fixed, 100k dynamic/rate)

  // DQN
  int lstm_size = 300;
  int value_hidden = 50;
  double learning_rate = 0.01;
  double tau = 0.95;
  double epsilon = 0.1;
  double epsilon_decay = 0.995;
  double epsilon_floor = 0.001;
  int minibatch = 40;
  int t1 = 5;
  int t2 = 10;
  int buffer_capacity = 2000;

  // radio (rate scenario)
  double bandwidth_hz = 20e6;
  double tx_power_dbm = 23.0;
  double noise_psd_dbm = -174.0;
  double path_loss_exp = 3.38;
  double fading_corr = 0.9;
  double cell_radius_m = 500.0;

  BaselineKind baseline = BaselineKind::none;
  double aloha_p = -1.0;  // < 0: adaptive min(1, N/|K(t)|)

  std::uint64_t seed = 1;
  std::string out_dir = "out";
  bool sequential = true;
  std::string weights_out;   // directory for departing agents' snapshots
  std::string warm_start;    // snapshot loaded into every new agent

  long effective_horizon() const {
    if (horizon > 0) return horizon;
    return scenario == Scenario::fixed ? 50000 : 100000;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !(in >> std::ws).eof())
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

inline void require(bool ok, const std::string& key, const std::string& bound) {
  if (!ok) throw ConfigError("config key '" + key + "' out of range: expected " + bound);
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::require;
  require(c.n_rbs >= 1, "n_rbs", ">= 1");
  require(c.k_max >= 1, "k_max", ">= 1");
  require(c.n_users >= 1, "n_users", ">= 1");
  require(c.lambda > 0.0, "lambda", "> 0");
  require(c.t_min >= 1 && c.t_min <= c.t_max, "t_min", "1 <= t_min <= t_max");
  require(!c.t_w.empty(), "t_w", "non-empty list");
  for (int w : c.t_w) require(w >= 1, "t_w", ">= 1");
  require(c.horizon >= 0, "horizon", ">= 0");
  require(c.lstm_size >= 1, "lstm_size", ">= 1");
  require(c.value_hidden >= 1, "value_hidden", ">= 1");
  require(c.learning_rate > 0.0, "learning_rate", "> 0");
  require(c.tau >= 0.0 && c.tau <= 1.0, "tau", "in [0, 1]");
  require(c.epsilon >= 0.0 && c.epsilon <= 1.0, "epsilon", "in [0, 1]");
  require(c.epsilon_decay > 0.0 && c.epsilon_decay <= 1.0, "epsilon_decay", "in (0, 1]");
  require(c.epsilon_floor >= 0.0 && c.epsilon_floor <= 1.0, "epsilon_floor", "in [0, 1]");
  require(c.minibatch >= 1, "minibatch", ">= 1");
  require(c.t1 >= 1, "t1", ">= 1");
  require(c.t2 >= 1, "t2", ">= 1");
  require(c.buffer_capacity >= c.minibatch, "buffer_capacity", ">= minibatch");
  require(c.bandwidth_hz > 0.0, "bandwidth_hz", "> 0");
  require(c.path_loss_exp >= 2.0, "path_loss_exp", ">= 2");
  require(c.fading_corr >= 0.0 && c.fading_corr < 1.0, "fading_corr", "in [0, 1)");
  require(c.cell_radius_m > 0.0, "cell_radius_m", "> 0");
  require(c.aloha_p <= 1.0, "aloha_p", "<= 1");
  if (c.scenario == Scenario::rate)
    require(!c.trace.empty(), "trace", "a trace file path in the rate scenario");
  if (c.baseline == BaselineKind::max_rate || c.baseline == BaselineKind::pf)
    require(c.scenario == Scenario::rate, "baseline",
            "centralized baselines require scenario = rate");
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  std::string line;
  int line_no = 0;
  bool have_n_rbs = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value, got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));

    if (key == "scenario") {
      if (value == "fixed") c.scenario = Scenario::fixed;
      else if (value == "dynamic") c.scenario = Scenario::dynamic;
      else if (value == "rate") c.scenario = Scenario::rate;
      else throw ConfigError("config key 'scenario': expected fixed|dynamic|rate");
    } else if (key == "n_rbs") {
      c.n_rbs = detail::parse_number<int>(key, value);
      have_n_rbs = true;
    } else if (key == "k_max") c.k_max = detail::parse_number<int>(key, value);
    else if (key == "n_users") c.n_users = detail::parse_number<int>(key, value);
    else if (key == "lambda") c.lambda = detail::parse_number<double>(key, value);
    else if (key == "t_min") c.t_min = detail::parse_number<int>(key, value);
    else if (key == "t_max") c.t_max = detail::parse_number<int>(key, value);
    else if (key == "trace") c.trace = value;
    else if (key == "t_w") {
      c.t_w.clear();
      std::istringstream list(value);
      std::string item;
      while (std::getline(list, item, ','))
        c.t_w.push_back(detail::parse_number<int>(key, detail::trim(item)));
    } else if (key == "horizon") c.horizon = detail::parse_number<long>(key, value);
    else if (key == "lstm_size") c.lstm_size = detail::parse_number<int>(key, value);
    else if (key == "value_hidden") c.value_hidden = detail::parse_number<int>(key, value);
    else if (key == "learning_rate") c.learning_rate = detail::parse_number<double>(key, value);
    else if (key == "tau") c.tau = detail::parse_number<double>(key, value);
    else if (key == "epsilon") c.epsilon = detail::parse_number<double>(key, value);
    else if (key == "epsilon_decay") c.epsilon_decay = detail::parse_number<double>(key, value);
    else if (key == "epsilon_floor") c.epsilon_floor = detail::parse_number<double>(key, value);
    else if (key == "minibatch") c.minibatch = detail::parse_number<int>(key, value);
    else if (key == "t1") c.t1 = detail::parse_number<int>(key, value);
    else if (key == "t2") c.t2 = detail::parse_number<int>(key, value);
    else if (key == "buffer_capacity") c.buffer_capacity = detail::parse_number<int>(key, value);
    else if (key == "bandwidth_hz") c.bandwidth_hz = detail::parse_number<double>(key, value);
    else if (key == "tx_power_dbm") c.tx_power_dbm = detail::parse_number<double>(key, value);
    else if (key == "noise_psd_dbm") c.noise_psd_dbm = detail::parse_number<double>(key, value);
    else if (key == "path_loss_exp") c.path_loss_exp = detail::parse_number<double>(key, value);
    else if (key == "fading_corr") c.fading_corr = detail::parse_number<double>(key, value);
    else if (key == "cell_radius_m") c.cell_radius_m = detail::parse_number<double>(key, value);
    else if (key == "baseline") {
      if (value == "none") c.baseline = BaselineKind::none;
      else if (value == "max_rate") c.baseline = BaselineKind::max_rate;
      else if (value == "pf") c.baseline = BaselineKind::pf;
      else if (value == "aloha") c.baseline = BaselineKind::aloha;
      else throw ConfigError("config key 'baseline': expected none|max_rate|pf|aloha");
    } else if (key == "aloha_p") c.aloha_p = detail::parse_number<double>(key, value);
    else if (key == "seed") c.seed = detail::parse_number<std::uint64_t>(key, value);
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "sequential") {
      if (value == "true" || value == "1") c.sequential = true;
      else if (value == "false" || value == "0") c.sequential = false;
      else throw ConfigError("config key 'sequential': expected true|false");
    } else if (key == "weights_out") c.weights_out = value;
    else if (key == "warm_start") c.warm_start = value;
    else throw ConfigError("unknown config key '" + key + "'");
  }
  if (!have_n_rbs) throw ConfigError("missing required config key 'n_rbs'");
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

inline void emit_config(const ExperimentConfig& c, std::ostream& out) {
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "scenario = " << to_string(c.scenario) << '\n';
  out << "n_rbs = " << c.n_rbs << '\n';
  out << "k_max = " << c.k_max << '\n';
  out << "n_users = " << c.n_users << '\n';
  out << "lambda = " << num(c.lambda) << '\n';
  out << "t_min = " << c.t_min << '\n';
  out << "t_max = " << c.t_max << '\n';
  if (!c.trace.empty()) out << "trace = " << c.trace << '\n';
  out << "t_w = ";
  for (std::size_t i = 0; i < c.t_w.size(); ++i)
    out << (i ? "," : "") << c.t_w[i];
  out << '\n';
  out << "horizon = " << c.horizon << '\n';
  out << "lstm_size = " << c.lstm_size << '\n';
  out << "value_hidden = " << c.value_hidden << '\n';
  out << "learning_rate = " << num(c.learning_rate) << '\n';
  out << "tau = " << num(c.tau) << '\n';
  out << "epsilon = " << num(c.epsilon) << '\n';
  out << "epsilon_decay = " << num(c.epsilon_decay) << '\n';
  out << "epsilon_floor = " << num(c.epsilon_floor) << '\n';
  out << "minibatch = " << c.minibatch << '\n';
  out << "t1 = " << c.t1 << '\n';
  out << "t2 = " << c.t2 << '\n';
  out << "buffer_capacity = " << c.buffer_capacity << '\n';
  out << "bandwidth_hz = " << num(c.bandwidth_hz) << '\n';
  out << "tx_power_dbm = " << num(c.tx_power_dbm) << '\n';
  out << "noise_psd_dbm = " << num(c.noise_psd_dbm) << '\n';
  out << "path_loss_exp = " << num(c.path_loss_exp) << '\n';
  out << "fading_corr = " << num(c.fading_corr) << '\n';
  out << "cell_radius_m = " << num(c.cell_radius_m) << '\n';
  out << "baseline = " << to_string(c.baseline) << '\n';
  out << "aloha_p = " << num(c.aloha_p) << '\n';
  out << "seed = " << c.seed << '\n';
  out << "out_dir = " << c.out_dir << '\n';
  out << "sequential = " << (c.sequential ? "true" : "false") << '\n';
  if (!c.weights_out.empty()) out << "weights_out = " << c.weights_out << '\n';
  if (!c.warm_start.empty()) out << "warm_start = " << c.warm_start << '\n';
}

}  // namespace mcra
