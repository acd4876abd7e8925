#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mcra/baselines.hpp"
#include "mcra/channel.hpp"
#include "mcra/config.hpp"
#include "mcra/env.hpp"
#include "mcra/fairness.hpp"
#include "mcra/learner.hpp"
#include "mcra/metrics.hpp"
#include "mcra/policy.hpp"
#include "mcra/population.hpp"

namespace mcra {

namespace detail {

struct RawSlot {
  SlotIndex t;
  UserId user;
  int choice;
  double gamma;
  int collided;
};

// Mutable state of one participating agent across a decision window.
struct AgentRuntime {
  Agent agent;
  AgentObservation next_obs;
  ActionVector action;
  std::vector<Feedback> feedback;
  std::vector<std::vector<double>> rates;  // own per-RB rates per window slot

  AgentRuntime(const AgentConfig& cfg, std::uint64_t seed) : agent(cfg, seed) {}
  AgentRuntime(const AgentConfig& cfg, std::uint64_t seed, const DqnNet& warm)
      : agent(cfg, seed, warm) {}
};

class Driver {
 public:
  explicit Driver(const ExperimentConfig& cfg)
      : cfg_(cfg), rate_mode_(cfg.scenario == Scenario::rate),
        population_(make_population(cfg)),
        fading_(substream_seed(cfg.seed, {kFadingStream})),
        baseline_rng_(substream_seed(cfg.seed, {kBaselineStream})),
        pf_(*std::max_element(cfg.t_w.begin(), cfg.t_w.end())), t_w_(cfg.t_w) {
    radio_.bandwidth_hz = cfg.bandwidth_hz;
    radio_.tx_power_w = dbm_to_watts(cfg.tx_power_dbm);
    radio_.noise_psd_w = dbm_to_watts(cfg.noise_psd_dbm);
    radio_.n_rbs = cfg.n_rbs;
    radio_.path_loss_exp = cfg.path_loss_exp;
    radio_.fading_corr = cfg.fading_corr;
    radio_.cell_radius_m = cfg.cell_radius_m;
    horizon_ = cfg.effective_horizon();
    if (cfg.scenario == Scenario::rate)
      horizon_ = std::min<SlotIndex>(horizon_, population_.last_departure());
    if (!cfg.warm_start.empty()) {
      std::ifstream in(cfg.warm_start);
      if (!in) throw ConfigError("cannot open warm_start snapshot " + cfg.warm_start);
      warm_start_ = load_weights(in);
      const NetConfig want = agent_config().net;
      const NetConfig& got = warm_start_->cfg;
      if (got.input != want.input || got.hidden != want.hidden ||
          got.value_hidden != want.value_hidden || got.n_rbs != want.n_rbs ||
          got.k_max != want.k_max) {
        throw ConfigError("warm_start snapshot architecture does not match the run");
      }
    }
    std::sort(t_w_.begin(), t_w_.end());
  }

  MetricsLog run() {
    if (cfg_.baseline == BaselineKind::none) {
      run_rl();
    } else {
      run_baseline();
    }
    return finalize();
  }

 private:
  static Population make_population(const ExperimentConfig& cfg) {
    switch (cfg.scenario) {
      case Scenario::fixed:
        return Population(FixedK{cfg.n_users});
      case Scenario::dynamic:
        return Population(PoissonDynamic{cfg.lambda, cfg.t_min, cfg.t_max}, cfg.seed);
      default:
        return Population(TraceDriven{load_trace(cfg.trace)});
    }
  }

  AgentConfig agent_config() const {
    AgentConfig a;
    a.net.input = static_cast<int>(encoded_size(cfg_.n_rbs, cfg_.k_max, rate_mode_));
    a.net.hidden = cfg_.lstm_size;
    a.net.value_hidden = cfg_.value_hidden;
    a.net.n_rbs = cfg_.n_rbs;
    a.net.k_max = cfg_.k_max;
    a.schedule = TrainingSchedule{cfg_.t1, cfg_.t2, cfg_.epsilon, cfg_.epsilon_decay,
                                  cfg_.epsilon_floor, cfg_.minibatch};
    a.buffer_capacity = static_cast<std::size_t>(cfg_.buffer_capacity);
    a.learning_rate = cfg_.learning_rate;
    a.tau = cfg_.tau;
    a.n_rbs = cfg_.n_rbs;
    a.k_max = cfg_.k_max;
    a.rate_mode = rate_mode_;
    return a;
  }

  // Evolve existing fading streams, then register this slot's arrivals so
  // their initial CN(0,1) draw is the one used at their first slot.
  RateTable slot_rates(const std::vector<UserId>& active, SlotIndex t) {
    fading_.evolve(radio_.fading_corr);
    std::vector<PositionedUser> positioned;
    positioned.reserve(active.size());
    for (UserId user : active) {
      if (!fading_.has_user(user)) fading_.add_user(user, radio_.n_rbs);
      positioned.push_back(PositionedUser{user, population_.find(user)->position(t)});
    }
    return rate_table(positioned, fading_, radio_);
  }

  // Shared per-slot bookkeeping: ledger, raw rows, collision counters,
  // departures. `choices` covers transmit decisions of scheduled users.
  void score_slot(SlotIndex t, const std::vector<UserId>& active,
                  const std::map<UserId, TransmissionChoice>& choices,
                  const SlotOutcome& outcome, const RateTable& rates) {
    ++slots_simulated_;
    const int active_count = static_cast<int>(active.size());
    for (UserId user : active) {
      const auto it = choices.find(user);
      const int choice = it == choices.end() ? 0 : it->second.value;
      const int success = choice == 0 ? 0 : outcome.success.at(user);
      const bool transmitted = choice != 0;
      const int collided = transmitted && !success ? 1 : 0;
      double gamma, target;
      if (rate_mode_) {
        const auto& row = rates.at(user);
        gamma = success ? row[static_cast<std::size_t>(choice - 1)] : 0.0;
        target = rate_target(active_count, cfg_.n_rbs, row);
      } else {
        gamma = success;
        target = gamma_target(active_count, cfg_.n_rbs);
      }
      ledger_.on_slot(user, t, gamma, target);
      raw_slots_.push_back(RawSlot{t, user, choice, gamma, collided});
      if (transmitted) {
        ++attempts_;
        collided_ += collided;
        if (t > horizon_ / 2) {
          ++attempts_2nd_;
          collided_2nd_ += collided;
        }
      }
    }
  }

  void handle_departures(SlotIndex t, const std::vector<UserId>& active) {
    for (UserId user : active) {
      if (population_.find(user)->t_dep != t) continue;
      ledger_.close_user(user, t);
      auto it = agents_.find(user);
      if (it != agents_.end()) {
        maybe_save_weights(user, it->second.agent);
        agents_.erase(it);
      }
      fading_.remove_user(user);
      pf_.remove_user(user);
    }
  }

  void maybe_save_weights(UserId user, const Agent& agent) {
    if (cfg_.weights_out.empty()) return;
    std::filesystem::create_directories(cfg_.weights_out);
    std::ofstream out(cfg_.weights_out + "/agent_" + std::to_string(user) + ".txt");
    save_weights(agent.online_net(), out);
  }

  void run_rl() {
    const AgentConfig agent_cfg = agent_config();
    SlotIndex t = 1;
    while (t <= horizon_) {
      population_.materialize_to(t);
      if (population_.dynamic()) population_.force_nonempty(t);
      std::vector<UserId> boundary_active = population_.active_set(t);
      if (boundary_active.empty()) {
        ++t;  // trace gap: the slot is dropped without metrics
        continue;
      }
      const int window_k = std::min(static_cast<int>(boundary_active.size()), cfg_.k_max);
      log_.windows.push_back(DecisionWindowLog{t, window_k});

      for (UserId user : boundary_active) {
        auto it = agents_.find(user);
        if (it == agents_.end()) {
          const std::uint64_t seed = substream_seed(
              cfg_.seed, {kAgentStream, static_cast<std::uint64_t>(user)});
          it = agents_
                   .emplace(user, warm_start_ ? AgentRuntime(agent_cfg, seed, *warm_start_)
                                              : AgentRuntime(agent_cfg, seed))
                   .first;
        }
        AgentRuntime& rt = it->second;
        try {
          rt.action = rt.agent.decide(rt.next_obs, window_k,
                                      static_cast<int>(boundary_active.size()));
        } catch (const NumericError& e) {
          throw NumericError(std::string(e.what()) + " (user " +
                             std::to_string(user) + ", slot " + std::to_string(t) +
                             ")");
        }
        rt.feedback.clear();
        rt.rates.clear();
      }

      for (int j = 0; j < window_k && t + j <= horizon_; ++j) {
        const SlotIndex slot = t + j;
        population_.materialize_to(slot);
        const std::vector<UserId> active = population_.active_set(slot);
        if (active.empty()) continue;  // all departed mid-window

        RateTable rates;
        if (rate_mode_) rates = slot_rates(active, slot);

        std::map<UserId, TransmissionChoice> choices;
        for (UserId user : boundary_active) {
          auto it = agents_.find(user);
          if (it == agents_.end()) continue;  // departed mid-window
          choices[user] = TransmissionChoice{it->second.action[static_cast<std::size_t>(j)]};
        }
        const SlotOutcome outcome = resolve_slot(choices, cfg_.n_rbs);
        score_slot(slot, active, choices, outcome, rates);

        for (UserId user : boundary_active) {
          auto it = agents_.find(user);
          if (it == agents_.end()) continue;
          it->second.feedback.push_back(outcome.feedback);
          if (rate_mode_) it->second.rates.push_back(rates.at(user));
        }
        handle_departures(slot, active);
      }

      for (UserId user : boundary_active) {
        auto it = agents_.find(user);
        if (it == agents_.end()) continue;
        AgentRuntime& rt = it->second;
        if (rt.feedback.size() != rt.action.size()) continue;  // horizon-cut window
        const WindowReward reward = compute_reward(rt.action, rt.feedback, rt.rates);
        rt.agent.finish_window(reward.per_slot);
        rt.next_obs.prev_action = rt.action;
        rt.next_obs.prev_rewards = reward.per_slot;
        if (rate_mode_) {
          std::vector<double> last = rt.rates.back();
          const double best = *std::max_element(last.begin(), last.end());
          if (best > 0.0)
            for (double& r : last) r /= best;
          rt.next_obs.prev_rates = std::move(last);
        }
      }
      t += window_k;
    }
    for (const auto& [user, rt] : agents_) maybe_save_weights(user, rt.agent);
  }

  void run_baseline() {
    SlotIndex t = 1;
    while (t <= horizon_) {
      population_.materialize_to(t);
      if (population_.dynamic()) population_.force_nonempty(t);
      const std::vector<UserId> active = population_.active_set(t);
      if (active.empty()) {
        ++t;
        continue;
      }
      RateTable rates;
      if (rate_mode_) rates = slot_rates(active, t);

      std::map<UserId, TransmissionChoice> choices;
      switch (cfg_.baseline) {
        case BaselineKind::max_rate:
          choices = centralized_max_rate(rates, cfg_.n_rbs).assignment;
          break;
        case BaselineKind::pf:
          choices = centralized_pf(rates, pf_, t, cfg_.n_rbs).assignment;
          break;
        default: {
          const double p = cfg_.aloha_p >= 0.0
                               ? cfg_.aloha_p
                               : std::min(1.0, static_cast<double>(cfg_.n_rbs) /
                                                   static_cast<double>(active.size()));
          choices = random_access_baseline(active, cfg_.n_rbs, p, baseline_rng_);
          break;
        }
      }
      const SlotOutcome outcome = resolve_slot(choices, cfg_.n_rbs);
      score_slot(t, active, choices, outcome, rates);
      if (cfg_.baseline == BaselineKind::pf) {
        for (UserId user : active) {
          const auto it = choices.find(user);
          const int choice = it == choices.end() ? 0 : it->second.value;
          const double achieved =
              (choice != 0 && outcome.success.at(user))
                  ? (rate_mode_ ? rates.at(user)[static_cast<std::size_t>(choice - 1)]
                                : 1.0)
                  : 0.0;
          pf_.on_slot(user, t, achieved);
        }
      }
      handle_departures(t, active);
      ++t;
    }
  }

  MetricsLog finalize() {
    // Users still active at the end are scored over [t_arr : last slot seen].
    for (UserId user : ledger_.user_ids()) {
      if (!ledger_.closed(user)) {
        const SlotIndex last = ledger_.arrival(user) +
                               static_cast<SlotIndex>(ledger_.series_length(user)) - 1;
        ledger_.close_user(user, last);
      }
    }

    const int primary_t_w = t_w_.back();
    log_.t_w = t_w_;
    log_.slots.reserve(raw_slots_.size());
    double gamma_total = 0.0;
    for (const RawSlot& r : raw_slots_) {
      SlotRow row;
      row.t = r.t;
      row.user = r.user;
      row.choice = r.choice;
      row.gamma = r.gamma;
      row.big_gamma = ledger_.windowed_gamma(r.user, r.t, primary_t_w);
      row.big_gamma_target = ledger_.windowed_target(r.user, r.t, primary_t_w);
      row.collided = r.collided;
      log_.slots.push_back(row);
      gamma_total += r.gamma;
    }
    const ThroughputMode mode =
        rate_mode_ ? ThroughputMode::rate : ThroughputMode::indicator;
    std::map<int, double> delta_sums;
    for (UserId user : ledger_.user_ids()) {
      UserRow row;
      row.user = user;
      row.t_arr = ledger_.arrival(user);
      row.t_dep = ledger_.departure(user);
      row.long_term_throughput = ledger_.long_term_gamma(user);
      row.long_term_target = ledger_.long_term_target(user);
      for (int w : t_w_) {
        const double d = ledger_.throughput_loss(user, w, mode);
        row.deltas.push_back(d);
        delta_sums[w] += d;
      }
      log_.users.push_back(std::move(row));
    }

    RunSummary& s = log_.summary;
    s.seed = cfg_.seed;
    s.slots_simulated = slots_simulated_;
    s.sum_throughput =
        slots_simulated_ > 0 ? gamma_total / static_cast<double>(slots_simulated_) : 0.0;
    s.weighted_objective =
        log_.users.empty() ? 0.0 : ledger_.weighted_objective(primary_t_w, mode);
    s.attempts = attempts_;
    s.collided = collided_;
    s.collision_rate =
        attempts_ > 0 ? static_cast<double>(collided_) / static_cast<double>(attempts_) : 0.0;
    s.second_half_collision_rate =
        attempts_2nd_ > 0
            ? static_cast<double>(collided_2nd_) / static_cast<double>(attempts_2nd_)
            : 0.0;
    if (!log_.users.empty()) {
      for (int w : t_w_)
        s.mean_delta[w] = delta_sums[w] / static_cast<double>(log_.users.size());
    }
    return std::move(log_);
  }

  ExperimentConfig cfg_;
  bool rate_mode_;
  RadioParams radio_;
  Population population_;
  FadingField fading_;
  Rng baseline_rng_;
  FairnessLedger ledger_;
  PfState pf_;
  std::map<UserId, AgentRuntime> agents_;
  std::optional<DqnNet> warm_start_;
  MetricsLog log_;
  std::vector<RawSlot> raw_slots_;
  std::vector<int> t_w_;
  SlotIndex horizon_ = 0;
  long slots_simulated_ = 0;
  long attempts_ = 0, collided_ = 0;
  long attempts_2nd_ = 0, collided_2nd_ = 0;
};

}  // namespace detail

// Drives the configured run end to end and returns the full metrics log
// (summary included). Deterministic for a fixed seed.
inline MetricsLog run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  detail::Driver driver(cfg);
  return driver.run();
}

}  // namespace mcra
