#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mcra/env.hpp"
#include "mcra/errors.hpp"

namespace mcra {

struct SlotRow {
  SlotIndex t = 0;
  UserId user = 0;
  int choice = 0;
  double gamma = 0.0;
  double big_gamma = 0.0;         // windowed achieved, primary T_w
  double big_gamma_target = 0.0;  // windowed target, primary T_w
  int collided = 0;
};

struct UserRow {
  UserId user = 0;
  SlotIndex t_arr = 0;
  SlotIndex t_dep = 0;
  double long_term_throughput = 0.0;
  double long_term_target = 0.0;
  std::vector<double> deltas;  // one per configured T_w, ascending
};

struct RunSummary {
  double sum_throughput = 0.0;      // (1/T) sum_k sum_t gamma_k(t)
  double weighted_objective = 0.0;  // duration-weighted loss at primary T_w
  double collision_rate = 0.0;      // collided attempts / attempts
  std::uint64_t seed = 0;

  // extras for analysis and acceptance (not part of summary.csv)
  std::map<int, double> mean_delta;  // per T_w, unweighted user mean
  double second_half_collision_rate = 0.0;
  long slots_simulated = 0;
  long attempts = 0;
  long collided = 0;
};

struct DecisionWindowLog {
  SlotIndex start = 0;
  int length = 0;
};

struct MetricsLog {
  std::vector<int> t_w;  // ascending; last entry is the primary window
  std::vector<SlotRow> slots;
  std::vector<UserRow> users;
  std::vector<DecisionWindowLog> windows;
  RunSummary summary;
};

namespace detail {
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}
}  // namespace detail

// Writes slots.csv, users.csv, summary.csv into out_dir (created on demand).
inline void emit_metrics(const MetricsLog& log, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  const auto open = [&out_dir](const std::string& name) {
    std::ofstream out(out_dir + "/" + name);
    if (!out) throw SimError("cannot write " + out_dir + "/" + name);
    return out;
  };

  {
    auto out = open("slots.csv");
    out << "t,user_id,choice,gamma,Gamma,Gamma_target,collided\n";
    for (const SlotRow& r : log.slots) {
      out << r.t << ',' << r.user << ',' << r.choice << ','
          << detail::fmt_double(r.gamma) << ',' << detail::fmt_double(r.big_gamma)
          << ',' << detail::fmt_double(r.big_gamma_target) << ',' << r.collided
          << '\n';
    }
  }
  {
    auto out = open("users.csv");
    out << "user_id,t_arr,t_dep,long_term_throughput,long_term_target";
    for (int w : log.t_w) out << ",delta_Tw" << w;
    out << '\n';
    for (const UserRow& r : log.users) {
      out << r.user << ',' << r.t_arr << ',' << r.t_dep << ','
          << detail::fmt_double(r.long_term_throughput) << ','
          << detail::fmt_double(r.long_term_target);
      for (double d : r.deltas) out << ',' << detail::fmt_double(d);
      out << '\n';
    }
  }
  {
    auto out = open("summary.csv");
    out << "sum_throughput,weighted_objective,collision_rate,seed\n";
    out << detail::fmt_double(log.summary.sum_throughput) << ','
        << detail::fmt_double(log.summary.weighted_objective) << ','
        << detail::fmt_double(log.summary.collision_rate) << ','
        << log.summary.seed << '\n';
  }
}

namespace detail {
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string field;
  while (std::getline(in, field, ',')) out.push_back(field);
  return out;
}
}  // namespace detail

inline std::vector<SlotRow> load_slots_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<SlotRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    rows.push_back(SlotRow{std::stoll(f[0]), static_cast<UserId>(std::stol(f[1])),
                           std::stoi(f[2]), std::stod(f[3]), std::stod(f[4]),
                           std::stod(f[5]), std::stoi(f[6])});
  }
  return rows;
}

inline std::vector<UserRow> load_users_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<UserRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    UserRow r;
    r.user = static_cast<UserId>(std::stol(f[0]));
    r.t_arr = std::stoll(f[1]);
    r.t_dep = std::stoll(f[2]);
    r.long_term_throughput = std::stod(f[3]);
    r.long_term_target = std::stod(f[4]);
    for (std::size_t i = 5; i < f.size(); ++i) r.deltas.push_back(std::stod(f[i]));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline RunSummary load_summary_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SimError("cannot open " + path);
  std::string line;
  std::getline(in, line);  // header
  std::getline(in, line);
  const auto f = detail::split_csv(line);
  RunSummary s;
  s.sum_throughput = std::stod(f[0]);
  s.weighted_objective = std::stod(f[1]);
  s.collision_rate = std::stod(f[2]);
  s.seed = std::stoull(f[3]);
  return s;
}

}  // namespace mcra
