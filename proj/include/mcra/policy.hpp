#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "mcra/env.hpp"
#include "mcra/errors.hpp"
#include "mcra/rng.hpp"

namespace mcra {

// Schedule of RBs committed at a decision time: entry j is the RB for window
// slot j (0 = idle). A valid schedule has at most min(K, N) nonzero entries.
using ActionVector = std::vector<int>;

// Per-window-slot rewards; indicator mode in {-1, 0, +1}, rate mode in
// (-1, 2] with 0 for idle slots.
using RewardVector = std::vector<double>;

// Fixed-shape table of per-slot, per-sub-action values: entry (a, j) is the
// value of sub-action a (0 = idle) in window slot j. Shape (N+1) x K_max
// regardless of the current window length.
struct QMatrix {
  int n_rbs = 0;
  int k_max = 0;
  std::vector<double> values;  // row-major, (n_rbs + 1) rows x k_max columns

  QMatrix() = default;
  QMatrix(int n, int k)
      : n_rbs(n), k_max(k),
        values(static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(k), 0.0) {}

  double& at(int a, int j) {
    return values[static_cast<std::size_t>(a) * static_cast<std::size_t>(k_max) +
                  static_cast<std::size_t>(j)];
  }
  double at(int a, int j) const {
    return values[static_cast<std::size_t>(a) * static_cast<std::size_t>(k_max) +
                  static_cast<std::size_t>(j)];
  }
};

// What an agent carries into its next decision: its previous window's
// schedule and rewards, plus (rate mode) the latest per-RB rates. Empty
// vectors stand for "no history yet".
struct AgentObservation {
  ActionVector prev_action;
  RewardVector prev_rewards;
  std::vector<double> prev_rates;  // rate mode only; length N, max-normalized
};

// Window boundaries: T[1] = 1, T[i+1] = T[i] + K[i] with
// K[i] = min(active count at T[i], k_max).
inline std::pair<SlotIndex, int> next_decision(SlotIndex current, int active_count,
                                               int k_max) {
  const int k = std::min(active_count, k_max);
  return {current + k, k};
}

struct DecisionSchedule {
  int k_max = 1;
  SlotIndex current = 1;  // T[i] of the window being opened

  // Opens the window at `current` and returns its length.
  int begin_window(int active_count) {
    const auto [next, k] = next_decision(current, active_count, k_max);
    current = next;
    return k;
  }
};

// |A[i]|: vectors in [0:N]^K with at most min(K, N) nonzero entries,
// sum_{m=0}^{min(K,N)} C(K,m) N^m. Throws on uint64 overflow.
inline std::uint64_t action_space_size(int window_k, int n_rbs) {
  const int max_nonzero = std::min(window_k, n_rbs);
  std::uint64_t total = 0;
  for (int m = 0; m <= max_nonzero; ++m) {
    std::uint64_t term = 1;
    auto mul = [&term](std::uint64_t f) {
      if (f != 0 && term > std::numeric_limits<std::uint64_t>::max() / f)
        throw SimError("action_space_size overflow");
      term *= f;
    };
    for (int i = 0; i < m; ++i) {
      mul(static_cast<std::uint64_t>(window_k - i));
      term /= static_cast<std::uint64_t>(i + 1);  // binomial stays integral
      mul(static_cast<std::uint64_t>(n_rbs));
    }
    if (total > std::numeric_limits<std::uint64_t>::max() - term)
      throw SimError("action_space_size overflow");
    total += term;
  }
  return total;
}

// Exact uniform draw over A[i] without enumerating it: pick the nonzero
// count m with weight C(K,m) N^m, then the m slots, then each RB.
inline ActionVector sample_uniform_action(int window_k, int n_rbs, Rng& rng) {
  const int max_nonzero = std::min(window_k, n_rbs);
  std::vector<double> weights(static_cast<std::size_t>(max_nonzero) + 1);
  double binom = 1.0;
  double npow = 1.0;
  double total = 0.0;
  for (int m = 0; m <= max_nonzero; ++m) {
    if (m > 0) {
      binom = binom * (window_k - m + 1) / m;
      npow *= n_rbs;
    }
    weights[static_cast<std::size_t>(m)] = binom * npow;
    total += weights[static_cast<std::size_t>(m)];
  }
  double u = rng.uniform() * total;
  int m = max_nonzero;
  for (int i = 0; i <= max_nonzero; ++i) {
    u -= weights[static_cast<std::size_t>(i)];
    if (u < 0.0) {
      m = i;
      break;
    }
  }

  ActionVector action(static_cast<std::size_t>(window_k), 0);
  // Partial Fisher-Yates: the first m entries of `slots` are the chosen ones.
  std::vector<int> slots(static_cast<std::size_t>(window_k));
  for (int j = 0; j < window_k; ++j) slots[static_cast<std::size_t>(j)] = j;
  for (int i = 0; i < m; ++i) {
    const auto pick = static_cast<std::size_t>(rng.uniform_int(i, window_k - 1));
    std::swap(slots[static_cast<std::size_t>(i)], slots[pick]);
    action[static_cast<std::size_t>(slots[static_cast<std::size_t>(i)])] =
        static_cast<int>(rng.uniform_int(1, n_rbs));
  }
  return action;
}

// Greedy action construction from vectorized Q-values. min(K, N) rounds,
// each taking the best remaining (sub-action, column) pair; ties break on
// the lowest sub-action index, then the lowest column. When the active
// count exceeds N, every entry is independently zeroed with probability
// 1 - max(N, k_max)/active_count (clamped to [0, 1]) so the expected
// offered load stays within the N RBs.
inline ActionVector select_action(const QMatrix& q, int window_k, int n_rbs,
                                  int active_count, int k_max, Rng& rng) {
  if (window_k > k_max)
    throw SimError("window length " + std::to_string(window_k) +
                   " exceeds k_max " + std::to_string(k_max));
  ActionVector action(static_cast<std::size_t>(window_k), 0);
  std::vector<char> open(static_cast<std::size_t>(window_k), 1);
  const int rounds = std::min(window_k, n_rbs);
  for (int round = 0; round < rounds; ++round) {
    int best_a = -1, best_j = -1;
    double best = 0.0;
    for (int a = 0; a <= n_rbs; ++a) {
      for (int j = 0; j < window_k; ++j) {
        if (!open[static_cast<std::size_t>(j)]) continue;
        const double v = q.at(a, j);
        if (best_a < 0 || v > best) {
          best = v;
          best_a = a;
          best_j = j;
        }
      }
    }
    action[static_cast<std::size_t>(best_j)] = best_a;
    open[static_cast<std::size_t>(best_j)] = 0;
  }
  if (n_rbs < active_count) {
    const double p_zero =
        std::max(0.0, 1.0 - static_cast<double>(std::max(n_rbs, k_max)) / active_count);
    for (int j = 0; j < window_k; ++j) {
      if (rng.uniform() < p_zero) action[static_cast<std::size_t>(j)] = 0;
    }
  }
  return action;
}

struct WindowReward {
  RewardVector per_slot;
  double total = 0.0;
};

// Per-slot three-level reward over a completed window. `window_feedback[j]`
// is the AP broadcast for window slot j. In rate mode `own_rates[j]` holds
// the user's N per-RB rates at that slot and the chosen channel's relative
// rate is added on top of the +/-1 level.
inline WindowReward compute_reward(const ActionVector& action,
                                   std::span<const Feedback> window_feedback,
                                   std::span<const std::vector<double>> own_rates = {}) {
  WindowReward out;
  out.per_slot.resize(action.size(), 0.0);
  for (std::size_t j = 0; j < action.size(); ++j) {
    const int a = action[j];
    if (a == 0) continue;
    const bool acked =
        window_feedback[j].per_rb[static_cast<std::size_t>(a - 1)] == Ack::ack;
    double r = acked ? 1.0 : -1.0;
    if (!own_rates.empty()) {
      const auto& rates = own_rates[j];
      const double best = *std::max_element(rates.begin(), rates.end());
      if (best > 0.0) r += rates[static_cast<std::size_t>(a - 1)] / best;
    }
    out.per_slot[j] = r;
  }
  for (double r : out.per_slot) out.total += r;
  return out;
}

// Fixed-size network input: one one-hot group of width N+1 per window slot
// of the previous action, then the reward block, both zero-padded out to
// k_max columns; rate mode appends the N normalized rates.
inline std::vector<double> encode_state(const AgentObservation& obs, int n_rbs,
                                        int k_max, bool rate_mode) {
  const auto k_prev = obs.prev_action.size();
  if (k_prev > static_cast<std::size_t>(k_max) ||
      obs.prev_rewards.size() != k_prev) {
    throw SimError("encode_state: observation does not fit k_max");
  }
  const std::size_t group = static_cast<std::size_t>(n_rbs) + 1;
  std::vector<double> x(group * static_cast<std::size_t>(k_max) +
                            static_cast<std::size_t>(k_max) +
                            (rate_mode ? static_cast<std::size_t>(n_rbs) : 0),
                        0.0);
  for (std::size_t j = 0; j < k_prev; ++j) {
    x[j * group + static_cast<std::size_t>(obs.prev_action[j])] = 1.0;
  }
  const std::size_t reward_base = group * static_cast<std::size_t>(k_max);
  for (std::size_t j = 0; j < k_prev; ++j) {
    x[reward_base + j] = obs.prev_rewards[j];
  }
  if (rate_mode && !obs.prev_rates.empty()) {
    if (obs.prev_rates.size() != static_cast<std::size_t>(n_rbs))
      throw SimError("encode_state: rate vector length mismatch");
    const std::size_t rate_base = reward_base + static_cast<std::size_t>(k_max);
    for (std::size_t n = 0; n < obs.prev_rates.size(); ++n) {
      x[rate_base + n] = obs.prev_rates[n];
    }
  }
  return x;
}

inline std::size_t encoded_size(int n_rbs, int k_max, bool rate_mode) {
  return static_cast<std::size_t>(n_rbs + 1) * static_cast<std::size_t>(k_max) +
         static_cast<std::size_t>(k_max) +
         (rate_mode ? static_cast<std::size_t>(n_rbs) : 0);
}

}  // namespace mcra
