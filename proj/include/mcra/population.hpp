#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mcra/env.hpp"
#include "mcra/errors.hpp"
#include "mcra/rng.hpp"

namespace mcra {

struct UserRecord {
  UserId id = 0;
  SlotIndex t_arr = 1;
  SlotIndex t_dep = 1;
  // One (x, y) position per slot of [t_arr : t_dep]; empty when the
  // population carries no mobility.
  std::vector<std::array<double, 2>> trajectory;

  bool has_trajectory() const { return !trajectory.empty(); }
  std::array<double, 2> position(SlotIndex t) const {
    if (trajectory.empty() || t < t_arr || t > t_dep) {
      throw TraceError("no position for user " + std::to_string(id) +
                       " at slot " + std::to_string(t));
    }
    return trajectory[static_cast<std::size_t>(t - t_arr)];
  }
};

struct FixedK {
  int n_users = 1;
};

struct PoissonDynamic {
  double lambda = 0.02;  // arrivals per slot
  int t_min = 900;       // activity duration bounds, slots
  int t_max = 1100;
};

struct TraceDriven {
  std::vector<UserRecord> records;
};

using PopulationModel = std::variant<FixedK, PoissonDynamic, TraceDriven>;

// Draws this slot's Poisson arrival batch; durations are uniform integers
// on [t_min : t_max].
inline std::vector<UserRecord> sample_arrivals(const PoissonDynamic& model,
                                               SlotIndex t, UserId first_id,
                                               Rng& rng) {
  std::vector<UserRecord> out;
  const int n = rng.poisson(model.lambda);
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto duration = rng.uniform_int(model.t_min, model.t_max);
    out.push_back(UserRecord{first_id++, t, t + duration - 1, {}});
  }
  return out;
}

// Trace format: comma-separated `user_id,t,x,y`, one row per (user, slot),
// optional header. Each user's rows must cover every slot of its activity
// interval.
inline std::vector<UserRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file " + path);

  struct Raw {
    std::vector<SlotIndex> slots;
    std::vector<std::array<double, 2>> pos;
  };
  std::map<UserId, Raw> raw;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    std::array<std::string, 4> fields;
    int n_fields = 0;
    while (std::getline(row, field, ',') && n_fields < 4) fields[n_fields++] = field;
    if (line_no == 1 && !fields[0].empty() &&
        fields[0].find_first_not_of("+-0123456789 \t") != std::string::npos) {
      continue;  // header row
    }
    try {
      if (n_fields != 4) throw std::invalid_argument("expected 4 fields");
      std::size_t pos = 0;
      const UserId id = static_cast<UserId>(std::stol(fields[0], &pos));
      const SlotIndex t = std::stoll(fields[1], &pos);
      const double x = std::stod(fields[2], &pos);
      const double y = std::stod(fields[3], &pos);
      raw[id].slots.push_back(t);
      raw[id].pos.push_back({x, y});
    } catch (const std::exception&) {
      throw TraceError("trace parse error at " + path + ":" +
                       std::to_string(line_no) + ": '" + line + "'");
    }
  }

  std::vector<UserRecord> records;
  records.reserve(raw.size());
  for (auto& [id, r] : raw) {
    // Rows may arrive slot-sorted per user or interleaved; order by slot.
    std::vector<std::size_t> order(r.slots.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return r.slots[a] < r.slots[b]; });
    UserRecord rec;
    rec.id = id;
    rec.t_arr = r.slots[order.front()];
    rec.t_dep = r.slots[order.back()];
    SlotIndex expect = rec.t_arr;
    for (std::size_t i : order) {
      if (r.slots[i] != expect) {
        throw TraceError("trace gap for user " + std::to_string(id) +
                         " at slot " + std::to_string(expect));
      }
      rec.trajectory.push_back(r.pos[i]);
      ++expect;
    }
    records.push_back(std::move(rec));
  }
  std::sort(records.begin(), records.end(),
            [](const UserRecord& a, const UserRecord& b) {
              return a.t_arr < b.t_arr || (a.t_arr == b.t_arr && a.id < b.id);
            });
  return records;
}

inline void emit_trace(std::span<const UserRecord> records, std::ostream& out) {
  out << "user_id,t,x,y\n";
  char buf[128];
  for (const UserRecord& r : records) {
    for (SlotIndex t = r.t_arr; t <= r.t_dep; ++t) {
      const auto p = r.position(t);
      std::snprintf(buf, sizeof(buf), "%d,%lld,%.17g,%.17g\n", r.id,
                    static_cast<long long>(t), p[0], p[1]);
      out << buf;
    }
  }
}

// The time-varying active-user set. Fixed and trace populations are fully
// known up front; the Poisson variant materializes arrivals slot by slot
// from its own substream.
class Population {
 public:
  explicit Population(FixedK model) : model_(model) {
    for (int k = 1; k <= model.n_users; ++k) {
      add_record(UserRecord{k, 1, std::numeric_limits<SlotIndex>::max() / 2, {}});
    }
    materialized_to_ = std::numeric_limits<SlotIndex>::max() / 2;
  }

  Population(PoissonDynamic model, std::uint64_t master_seed)
      : model_(model), rng_(substream_seed(master_seed, {kPopulationStream})) {}

  explicit Population(TraceDriven model) : model_(TraceDriven{}) {
    for (auto& r : model.records) add_record(std::move(r));
    materialized_to_ = std::numeric_limits<SlotIndex>::max() / 2;
  }

  bool dynamic() const { return std::holds_alternative<PoissonDynamic>(model_); }

  // Poisson only: draw arrivals for every not-yet-materialized slot <= t.
  void materialize_to(SlotIndex t) {
    if (!dynamic()) return;
    const auto& m = std::get<PoissonDynamic>(model_);
    while (materialized_to_ < t) {
      ++materialized_to_;
      auto batch = sample_arrivals(m, materialized_to_, next_id_, rng_);
      next_id_ += static_cast<UserId>(batch.size());
      for (auto& r : batch) add_record(std::move(r));
    }
  }

  // Poisson only: empty slots are dropped from the timeline; each extra
  // arrival round at slot t stands for one dropped physical slot. Returns
  // the number of rounds drawn.
  int force_nonempty(SlotIndex t) {
    if (!dynamic()) return 0;
    const auto& m = std::get<PoissonDynamic>(model_);
    int rounds = 0;
    while (active_set(t).empty()) {
      ++rounds;
      auto batch = sample_arrivals(m, t, next_id_, rng_);
      next_id_ += static_cast<UserId>(batch.size());
      for (auto& r : batch) add_record(std::move(r));
    }
    return rounds;
  }

  std::vector<UserId> active_set(SlotIndex t) const {
    if (t > materialized_to_) {
      throw HorizonError("active_set query at slot " + std::to_string(t) +
                         " beyond materialized horizon " +
                         std::to_string(materialized_to_));
    }
    std::vector<UserId> out;
    for (const UserRecord& r : records_) {
      if (r.t_arr <= t && t <= r.t_dep) out.push_back(r.id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  const UserRecord* find(UserId id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &records_[it->second];
  }

  const std::vector<UserRecord>& records() const { return records_; }

  // Last departure over all known records; for dynamic populations this
  // reflects what has been materialized so far.
  SlotIndex last_departure() const {
    SlotIndex last = 0;
    for (const UserRecord& r : records_) last = std::max(last, r.t_dep);
    return last;
  }

 private:
  void add_record(UserRecord r) {
    by_id_.emplace(r.id, records_.size());
    records_.push_back(std::move(r));
  }

  PopulationModel model_;
  Rng rng_{0};
  std::vector<UserRecord> records_;
  std::map<UserId, std::size_t> by_id_;
  SlotIndex materialized_to_ = 0;
  UserId next_id_ = 1;
};

}  // namespace mcra
