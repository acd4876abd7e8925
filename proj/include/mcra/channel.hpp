#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <span>
#include <vector>

#include "mcra/env.hpp"
#include "mcra/errors.hpp"
#include "mcra/rng.hpp"

namespace mcra {

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct RadioParams {
  double bandwidth_hz = 20e6;                   // W
  double tx_power_w = dbm_to_watts(23.0);       // P
  double noise_psd_w = dbm_to_watts(-174.0);    // N0, watts/Hz
  int n_rbs = 1;                                // N
  double path_loss_exp = 3.38;                  // rho
  double fading_corr = 0.9;                     // xi
  double cell_radius_m = 500.0;
};

// Distance part of the channel gain, ||u||^(-rho). Distances are floored at
// 1 m so the model stays finite near the AP.
inline double path_gain(std::array<double, 2> position, double rho) {
  const double d = std::max(1.0, std::hypot(position[0], position[1]));
  return std::pow(d, -rho);
}

// Per-RB Shannon rate for channel gain g: (W/N) log2(1 + g P / ((W/N) N0)).
inline double shannon_rate(double gain, const RadioParams& p) {
  const double rb_bandwidth = p.bandwidth_hz / p.n_rbs;
  return rb_bandwidth * std::log2(1.0 + gain * p.tx_power_w / (rb_bandwidth * p.noise_psd_w));
}

// First-order autoregressive Rayleigh fading, h(t) = xi h(t-1) + delta with
// delta ~ CN(0, 1 - xi^2), kept per (user, RB). Each pair draws from its own
// substream of the master seed, so evolution order cannot change results.
class FadingField {
 public:
  explicit FadingField(std::uint64_t master_seed) : master_seed_(master_seed) {}

  void add_user(UserId user, int n_rbs) {
    if (users_.count(user)) return;
    PerUser u;
    u.h.reserve(static_cast<std::size_t>(n_rbs));
    u.streams.reserve(static_cast<std::size_t>(n_rbs));
    for (int n = 0; n < n_rbs; ++n) {
      u.streams.emplace_back(substream_seed(
          master_seed_, {kFadingStream, static_cast<std::uint64_t>(user),
                         static_cast<std::uint64_t>(n)}));
      u.h.push_back(draw_cn(u.streams.back(), 1.0));  // h(0) ~ CN(0, 1)
    }
    users_.emplace(user, std::move(u));
  }

  void remove_user(UserId user) { users_.erase(user); }
  bool has_user(UserId user) const { return users_.count(user) > 0; }

  void evolve(double xi) {
    const double innovation_var = 1.0 - xi * xi;
    for (auto& [user, u] : users_) {
      for (std::size_t n = 0; n < u.h.size(); ++n) {
        u.h[n] = xi * u.h[n] + draw_cn(u.streams[n], innovation_var);
      }
    }
  }

  std::complex<double> coefficient(UserId user, int rb) const {
    return users_.at(user).h[static_cast<std::size_t>(rb)];
  }

 private:
  struct PerUser {
    std::vector<std::complex<double>> h;
    std::vector<Rng> streams;
  };

  static std::complex<double> draw_cn(Rng& rng, double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = s * rng.gaussian();
    const double im = s * rng.gaussian();
    return {re, im};
  }

  std::uint64_t master_seed_;
  std::map<UserId, PerUser> users_;
};

// Achievable rates of the active users on every RB at one slot.
using RateTable = std::map<UserId, std::vector<double>>;

struct PositionedUser {
  UserId id;
  std::array<double, 2> position;
};

inline RateTable rate_table(std::span<const PositionedUser> users,
                            const FadingField& fading, const RadioParams& p) {
  RateTable out;
  for (const PositionedUser& u : users) {
    std::vector<double> row(static_cast<std::size_t>(p.n_rbs));
    const double pg = path_gain(u.position, p.path_loss_exp);
    for (int n = 0; n < p.n_rbs; ++n) {
      const double g = pg * std::norm(fading.coefficient(u.id, n));
      row[static_cast<std::size_t>(n)] = shannon_rate(g, p);
    }
    out.emplace(u.id, std::move(row));
  }
  return out;
}

}  // namespace mcra
