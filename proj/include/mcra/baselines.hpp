#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <vector>

#include "mcra/channel.hpp"
#include "mcra/env.hpp"
#include "mcra/fairness.hpp"
#include "mcra/rng.hpp"

namespace mcra {

// One slot of a centralized schedule; nonzero RBs are pairwise distinct.
struct ScheduleAssignment {
  std::map<UserId, TransmissionChoice> assignment;
};

// Greedy max-metric scheduling: min(|K|, N) rounds, each assigning the
// (user, RB) pair with the largest remaining metric. Ties break on the
// lexicographically smallest (user, RB).
inline ScheduleAssignment centralized_max_rate(const RateTable& rates, int n_rbs) {
  ScheduleAssignment out;
  for (const auto& [user, row] : rates) out.assignment[user] = TransmissionChoice{0};
  std::set<UserId> users_left;
  for (const auto& [user, row] : rates) users_left.insert(user);
  std::vector<char> rb_left(static_cast<std::size_t>(n_rbs), 1);
  const int rounds = std::min(static_cast<int>(rates.size()), n_rbs);
  for (int round = 0; round < rounds; ++round) {
    UserId best_user = 0;
    int best_rb = -1;
    double best = 0.0;
    for (UserId user : users_left) {
      const auto& row = rates.at(user);
      for (int n = 0; n < n_rbs; ++n) {
        if (!rb_left[static_cast<std::size_t>(n)]) continue;
        if (best_rb < 0 || row[static_cast<std::size_t>(n)] > best) {
          best = row[static_cast<std::size_t>(n)];
          best_user = user;
          best_rb = n;
        }
      }
    }
    out.assignment[best_user] = TransmissionChoice{best_rb + 1};
    users_left.erase(best_user);
    rb_left[static_cast<std::size_t>(best_rb)] = 0;
  }
  return out;
}

// Windowed average of each user's achieved (scheduled and decoded) rate,
// the denominator of the proportional-fair metric.
class PfState {
 public:
  explicit PfState(int t_w) : t_w_(t_w) {}

  void on_slot(UserId user, SlotIndex t, double achieved_rate) {
    auto [it, inserted] = users_.try_emplace(user);
    PerUser& u = it->second;
    if (inserted) {
      u.t_arr = t;
      u.prefix.push_back(0.0);
    }
    u.prefix.push_back(u.prefix.back() + achieved_rate);
    u.last_t = t;
  }

  bool has_user(UserId user) const { return users_.count(user) > 0; }

  // r_ave over [max(t_arr, t - T_w) : t]; callers pass t-1 for the metric.
  double r_ave(UserId user, SlotIndex t) const {
    const auto it = users_.find(user);
    if (it == users_.end()) return 0.0;
    const PerUser& u = it->second;
    if (t < u.t_arr) return 0.0;
    const SlotIndex hi = std::min(t, u.last_t);
    const SlotIndex lo = std::max(u.t_arr, t - t_w_);
    const auto a = static_cast<std::size_t>(lo - u.t_arr);
    const auto b = static_cast<std::size_t>(hi - u.t_arr + 1);
    return (u.prefix[b] - u.prefix[a]) / static_cast<double>(t - lo + 1);
  }

  void remove_user(UserId user) { users_.erase(user); }

 private:
  struct PerUser {
    SlotIndex t_arr = 0;
    SlotIndex last_t = 0;
    std::vector<double> prefix;
  };
  int t_w_;
  std::map<UserId, PerUser> users_;
};

// Proportional fairness: greedy max-rate on the metric c / max(r_ave, floor).
// Users with no history get the floor and hence near-infinite priority.
inline ScheduleAssignment centralized_pf(const RateTable& rates, const PfState& pf,
                                         SlotIndex t, int n_rbs,
                                         double floor = 1e-6) {
  RateTable metric;
  for (const auto& [user, row] : rates) {
    std::vector<double> m(row.size());
    const double denom = std::max(pf.r_ave(user, t - 1), floor);
    for (std::size_t n = 0; n < row.size(); ++n) m[n] = row[n] / denom;
    metric.emplace(user, std::move(m));
  }
  return centralized_max_rate(metric, n_rbs);
}

// p-persistent random access: each user transmits with probability p on a
// uniformly chosen RB. Draws one decision per user in id order.
inline std::map<UserId, TransmissionChoice> random_access_baseline(
    std::span<const UserId> active, int n_rbs, double p, Rng& rng) {
  std::map<UserId, TransmissionChoice> out;
  for (UserId user : active) {
    int choice = 0;
    if (rng.uniform() < p) choice = static_cast<int>(rng.uniform_int(1, n_rbs));
    out[user] = TransmissionChoice{choice};
  }
  return out;
}

}  // namespace mcra
