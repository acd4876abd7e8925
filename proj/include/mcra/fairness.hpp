#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "mcra/env.hpp"
#include "mcra/errors.hpp"

namespace mcra {

enum class ThroughputMode { indicator, rate };

// Fair per-user share of the N RBs among the currently active users.
inline double gamma_target(int active_count, int n_rbs) {
  if (active_count < 1) throw SimError("gamma_target: no active users");
  return std::min(1.0, static_cast<double>(n_rbs) / active_count);
}

// Rate-mode upper bound on the per-user target: share times the best channel.
inline double rate_target(int active_count, int n_rbs,
                          std::span<const double> rates) {
  if (rates.empty()) throw SimError("rate_target: empty rate vector");
  const double best = *std::max_element(rates.begin(), rates.end());
  return std::min(1.0, static_cast<double>(n_rbs) / active_count) * best;
}

// Mean of series over slots [max(t_arr, t - t_w) : t], inclusive bounds.
// series[i] holds the value at slot t_arr + i.
inline double windowed_average(std::span<const double> series, SlotIndex t,
                               SlotIndex t_arr, int t_w) {
  const SlotIndex lo = std::max(t_arr, t - t_w);
  double sum = 0.0;
  for (SlotIndex i = lo; i <= t; ++i) sum += series[static_cast<std::size_t>(i - t_arr)];
  return sum / static_cast<double>(t - lo + 1);
}

// Per-user slot series of achieved and target throughput, with windowed
// queries backed by prefix sums and post-departure loss evaluation.
class FairnessLedger {
 public:
  void on_slot(UserId user, SlotIndex t, double gamma, double target) {
    auto [it, inserted] = users_.try_emplace(user);
    UserSeries& u = it->second;
    if (inserted) {
      u.t_arr = t;
      u.prefix_gamma.push_back(0.0);
      u.prefix_target.push_back(0.0);
    }
    u.gamma.push_back(gamma);
    u.target.push_back(target);
    u.prefix_gamma.push_back(u.prefix_gamma.back() + gamma);
    u.prefix_target.push_back(u.prefix_target.back() + target);
  }

  void close_user(UserId user, SlotIndex t_dep) {
    UserSeries& u = series(user);
    u.t_dep = t_dep;
    u.closed = true;
  }

  bool has_user(UserId user) const { return users_.count(user) > 0; }
  bool closed(UserId user) const { return series(user).closed; }
  std::size_t series_length(UserId user) const { return series(user).gamma.size(); }
  SlotIndex arrival(UserId user) const { return series(user).t_arr; }
  SlotIndex departure(UserId user) const { return series(user).t_dep; }
  SlotIndex active_duration(UserId user) const {
    const UserSeries& u = series(user);
    return u.t_dep - u.t_arr + 1;
  }
  double gamma_at(UserId user, SlotIndex t) const {
    const UserSeries& u = series(user);
    return u.gamma[static_cast<std::size_t>(t - u.t_arr)];
  }
  double target_at(UserId user, SlotIndex t) const {
    const UserSeries& u = series(user);
    return u.target[static_cast<std::size_t>(t - u.t_arr)];
  }

  double windowed_gamma(UserId user, SlotIndex t, int t_w) const {
    const UserSeries& u = series(user);
    return windowed(u.prefix_gamma, u.t_arr, t, t_w);
  }
  double windowed_target(UserId user, SlotIndex t, int t_w) const {
    const UserSeries& u = series(user);
    return windowed(u.prefix_target, u.t_arr, t, t_w);
  }

  // Lifetime mean of the achieved / target series.
  double long_term_gamma(UserId user) const {
    const UserSeries& u = series(user);
    return u.prefix_gamma.back() / static_cast<double>(u.gamma.size());
  }
  double long_term_target(UserId user) const {
    const UserSeries& u = series(user);
    return u.prefix_target.back() / static_cast<double>(u.target.size());
  }

  // Windowed average shortfall of achieved vs target over the user's
  // lifetime. Indicator mode uses the plain difference; rate mode the
  // loss ratio, with zero-target slots contributing no loss.
  double throughput_loss(UserId user, int t_w, ThroughputMode mode) const {
    const UserSeries& u = series(user);
    if (!u.closed) throw SimError("throughput_loss: user still active");
    double acc = 0.0;
    for (SlotIndex t = u.t_arr; t <= u.t_dep; ++t) {
      const double tgt = windowed(u.prefix_target, u.t_arr, t, t_w);
      const double ach = windowed(u.prefix_gamma, u.t_arr, t, t_w);
      if (mode == ThroughputMode::indicator) {
        acc += std::max(tgt - ach, 0.0);
      } else if (tgt > 0.0) {
        acc += std::max((tgt - ach) / tgt, 0.0);
      }
    }
    return acc / static_cast<double>(u.t_dep - u.t_arr + 1);
  }

  // Duration-weighted mean loss over all completed users; the weights
  // T_k / sum_l T_l sum to one.
  double weighted_objective(int t_w, ThroughputMode mode) const {
    double total_duration = 0.0;
    double acc = 0.0;
    for (const auto& [user, u] : users_) {
      if (!u.closed) continue;
      const double duration = static_cast<double>(u.t_dep - u.t_arr + 1);
      acc += duration * throughput_loss(user, t_w, mode);
      total_duration += duration;
    }
    if (total_duration == 0.0) throw SimError("weighted_objective: no completed users");
    return acc / total_duration;
  }

  std::vector<UserId> user_ids() const {
    std::vector<UserId> ids;
    ids.reserve(users_.size());
    for (const auto& [user, u] : users_) ids.push_back(user);
    return ids;
  }

 private:
  struct UserSeries {
    SlotIndex t_arr = 0;
    SlotIndex t_dep = 0;
    bool closed = false;
    std::vector<double> gamma, target;
    std::vector<double> prefix_gamma, prefix_target;  // size n + 1
  };

  static double windowed(const std::vector<double>& prefix, SlotIndex t_arr,
                         SlotIndex t, int t_w) {
    const SlotIndex lo = std::max(t_arr, t - t_w);
    const auto a = static_cast<std::size_t>(lo - t_arr);
    const auto b = static_cast<std::size_t>(t - t_arr + 1);
    return (prefix[b] - prefix[a]) / static_cast<double>(b - a);
  }

  const UserSeries& series(UserId user) const {
    auto it = users_.find(user);
    if (it == users_.end()) throw SimError("unknown user " + std::to_string(user));
    return it->second;
  }
  UserSeries& series(UserId user) {
    auto it = users_.find(user);
    if (it == users_.end()) throw SimError("unknown user " + std::to_string(user));
    return it->second;
  }

  std::map<UserId, UserSeries> users_;
};

}  // namespace mcra
