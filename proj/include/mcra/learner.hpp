#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

#include "mcra/nn.hpp"
#include "mcra/policy.hpp"
#include "mcra/rng.hpp"

namespace mcra {

struct TrainingSchedule {
  int t1 = 5;              // decisions between training steps
  int t2 = 10;             // trainings between target syncs
  double epsilon = 0.1;    // current exploration rate
  double decay = 0.995;    // multiplicative, applied after each training
  double floor = 0.001;
  int minibatch = 40;
};

struct BufferEntry {
  std::vector<double> input;
  LstmState carried;  // online-net state before this decision's forward
  QMatrix target;
  std::vector<std::uint8_t> mask;
};

// FIFO replay of (state, updated Q-target, mask) records.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  void push(BufferEntry entry) {
    if (entries_.size() == capacity_) entries_.pop_front();
    entries_.push_back(std::move(entry));
  }

  std::size_t size() const { return entries_.size(); }
  const BufferEntry& at(std::size_t i) const { return entries_[i]; }

  // Uniform minibatch without replacement.
  std::vector<std::size_t> sample_indices(std::size_t count, Rng& rng) const {
    std::vector<std::size_t> idx(entries_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < count; ++i) {
      const auto pick = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(i),
                          static_cast<std::int64_t>(idx.size()) - 1));
      std::swap(idx[i], idx[pick]);
    }
    idx.resize(count);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::deque<BufferEntry> entries_;
};

struct TargetUpdate {
  QMatrix target;
  std::vector<std::uint8_t> mask;
};

// Double-Q target construction for one past decision. Every window column
// updates the entry of its executed sub-action (idle columns update the
// idle row): target = r_j + tau * Q_beta_next(a*, j) with a* the argmax of
// the online net's next-decision column. Untouched entries keep their old
// values and stay outside the mask.
inline TargetUpdate build_targets(const QMatrix& q_alpha_i, const ActionVector& action,
                                  const RewardVector& rewards,
                                  const QMatrix& q_alpha_next,
                                  const QMatrix& q_beta_next, double tau) {
  TargetUpdate out;
  out.target = q_alpha_i;
  out.mask.assign(q_alpha_i.values.size(), 0);
  for (std::size_t j = 0; j < action.size(); ++j) {
    const int col = static_cast<int>(j);
    int best_a = 0;
    double best = q_alpha_next.at(0, col);
    for (int a = 1; a <= q_alpha_next.n_rbs; ++a) {
      if (q_alpha_next.at(a, col) > best) {
        best = q_alpha_next.at(a, col);
        best_a = a;
      }
    }
    const int executed = action[j];
    out.target.at(executed, col) = rewards[j] + tau * q_beta_next.at(best_a, col);
    out.mask[static_cast<std::size_t>(executed) *
                 static_cast<std::size_t>(q_alpha_i.k_max) +
             j] = 1;
  }
  return out;
}

struct AgentConfig {
  NetConfig net;
  TrainingSchedule schedule;
  std::size_t buffer_capacity = 2000;
  double learning_rate = 0.01;
  double tau = 0.95;
  int n_rbs = 0;
  int k_max = 0;
  bool rate_mode = false;
};

// One user's learner: online/target DQN pair, replay buffer, carried
// recurrent states, and the per-decision bookkeeping of Algorithm 2.
class Agent {
 public:
  Agent(const AgentConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(seed), buffer_(cfg.buffer_capacity),
        sched_epsilon_(cfg.schedule.epsilon) {
    Rng init_rng(substream_seed(seed, {kInitStream}));
    online_ = init_net(cfg.net, init_rng);
    target_ = online_;  // start in sync
    alpha_state_ = online_.zero_state();
    beta_state_ = target_.zero_state();
  }

  Agent(const AgentConfig& cfg, std::uint64_t seed, const DqnNet& warm_start)
      : Agent(cfg, seed) {
    online_ = warm_start;
    target_ = warm_start;
  }

  // One decision time: forward both nets, finish the previous decision's
  // target, run the training/sync cadence, then pick an action e-greedily.
  ActionVector decide(const AgentObservation& obs, int window_k, int active_count) {
    auto x = encode_state(obs, cfg_.n_rbs, cfg_.k_max, cfg_.rate_mode);
    const LstmState pre_state = alpha_state_;
    QMatrix q_alpha = forward(online_, x, alpha_state_);
    QMatrix q_beta = forward(target_, x, beta_state_);
    if (!all_finite(q_alpha.values) || !all_finite(q_beta.values))
      throw NumericError("non-finite Q-values");

    if (pending_.valid && pending_.rewards.size() == pending_.action.size()) {
      TargetUpdate upd = build_targets(pending_.q_alpha, pending_.action,
                                       pending_.rewards, q_alpha, q_beta, cfg_.tau);
      buffer_.push(BufferEntry{std::move(pending_.input), pending_.pre_state,
                               std::move(upd.target), std::move(upd.mask)});
      ++decisions_;
      if (decisions_ % cfg_.schedule.t1 == 0) {
        if (train_step().has_value()) {
          sched_epsilon_ = std::max(cfg_.schedule.floor,
                                    sched_epsilon_ * cfg_.schedule.decay);
        }
      }
      if (decisions_ % (cfg_.schedule.t1 * cfg_.schedule.t2) == 0) sync_target();
    }

    ActionVector action;
    if (rng_.uniform() < sched_epsilon_) {
      action = sample_uniform_action(window_k, cfg_.n_rbs, rng_);
    } else {
      action = select_action(q_alpha, window_k, cfg_.n_rbs, active_count,
                             cfg_.k_max, rng_);
    }
    pending_ = Pending{std::move(x), pre_state, std::move(q_alpha), action, {}, true};
    return action;
  }

  // Window rewards, needed before the next decision can build its target.
  void finish_window(RewardVector rewards) { pending_.rewards = std::move(rewards); }

  // One masked-MSE Adam step on a uniform minibatch; nullopt when the
  // buffer cannot fill one yet. Returns the pre-step loss.
  std::optional<double> train_step() {
    const auto batch_size = static_cast<std::size_t>(cfg_.schedule.minibatch);
    if (buffer_.size() < batch_size) return std::nullopt;
    const auto indices = buffer_.sample_indices(batch_size, rng_);

    DqnNet grad = zeros_like(online_);
    double loss_sum = 0.0;
    std::size_t masked_total = 0;
    for (std::size_t i : indices) {
      const BufferEntry& e = buffer_.at(i);
      for (std::uint8_t m : e.mask) masked_total += m;
    }
    for (std::size_t i : indices) {
      const BufferEntry& e = buffer_.at(i);
      ForwardCache cache;
      const QMatrix q = forward_cached(online_, e.input, e.carried, cache);
      QMatrix dq(cfg_.n_rbs, cfg_.k_max);
      for (std::size_t k = 0; k < q.values.size(); ++k) {
        if (!e.mask[k]) continue;
        const double r = q.values[k] - e.target.values[k];
        loss_sum += r * r;
        dq.values[k] = 2.0 * r / static_cast<double>(masked_total);
      }
      backward(online_, cache, dq, grad);
    }
    adam_update(online_, grad, adam_, cfg_.learning_rate);
    ++trainings_;
    return loss_sum / static_cast<double>(masked_total);
  }

  void sync_target() { target_ = online_; }

  double epsilon() const { return sched_epsilon_; }
  long decisions() const { return decisions_; }
  long trainings() const { return trainings_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  ReplayBuffer& buffer() { return buffer_; }
  const DqnNet& online_net() const { return online_; }
  const DqnNet& target_net() const { return target_; }
  DqnNet& online_net() { return online_; }

 private:
  struct Pending {
    std::vector<double> input;
    LstmState pre_state;
    QMatrix q_alpha;
    ActionVector action;
    RewardVector rewards;
    bool valid = false;
  };

  AgentConfig cfg_;
  Rng rng_;
  DqnNet online_, target_;
  AdamState adam_;
  ReplayBuffer buffer_;
  LstmState alpha_state_, beta_state_;
  Pending pending_;
  double sched_epsilon_ = 0.1;
  long decisions_ = 0;
  long trainings_ = 0;
};

}  // namespace mcra
