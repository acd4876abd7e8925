// Synthetic mobility trace generator. Users arrive as a Poisson process,
// live for a uniform number of slots, and traverse the cell on a straight
// chord through a random interior point. Output follows the trace format
// consumed by the simulator (`user_id,t,x,y`).

#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcra/population.hpp"
#include "mcra/rng.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic vehicular trace"};
  double lambda = 0.004;
  int t_min = 800, t_max = 1200;
  int n_users = 60;
  double radius = 500.0;
  std::uint64_t seed = 7;
  std::string out_path = "trace.csv";
  app.add_option("--lambda", lambda, "arrivals per slot");
  app.add_option("--t-min", t_min, "min activity duration, slots");
  app.add_option("--t-max", t_max, "max activity duration, slots");
  app.add_option("--n-users", n_users, "stop after this many users");
  app.add_option("--radius", radius, "cell radius, meters");
  app.add_option("--seed", seed, "rng seed");
  app.add_option("--out", out_path, "output file");
  CLI11_PARSE(app, argc, argv);

  mcra::Rng rng(seed);
  std::vector<mcra::UserRecord> records;
  mcra::UserId next_id = 1;
  mcra::SlotIndex t = 0;
  const mcra::PoissonDynamic model{lambda, t_min, t_max};
  while (static_cast<int>(records.size()) < n_users) {
    ++t;
    auto batch = mcra::sample_arrivals(model, t, next_id, rng);
    next_id += static_cast<mcra::UserId>(batch.size());
    for (auto& r : batch) {
      if (static_cast<int>(records.size()) >= n_users) break;
      // Chord through a random interior point; entry/exit on the cell edge.
      const double theta = 2.0 * M_PI * rng.uniform();
      const double px = 0.7 * radius * (2.0 * rng.uniform() - 1.0);
      const double py = 0.7 * radius * (2.0 * rng.uniform() - 1.0);
      const std::array<double, 2> entry{radius * std::cos(theta),
                                        radius * std::sin(theta)};
      const double dx = px - entry[0], dy = py - entry[1];
      const double len = std::hypot(dx, dy);
      const auto duration = r.t_dep - r.t_arr + 1;
      // traverse twice the entry->waypoint distance over the lifetime
      const double step = 2.0 * len / static_cast<double>(duration);
      for (mcra::SlotIndex s = r.t_arr; s <= r.t_dep; ++s) {
        const double travelled = step * static_cast<double>(s - r.t_arr);
        double x = entry[0] + dx / len * travelled;
        double y = entry[1] + dy / len * travelled;
        const double d = std::hypot(x, y);
        if (d > radius) {  // clamp to the cell edge
          x *= radius / d;
          y *= radius / d;
        }
        r.trajectory.push_back({x, y});
      }
      records.push_back(std::move(r));
    }
  }

  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot write " << out_path << '\n';
    return 1;
  }
  mcra::emit_trace(records, out);
  std::cout << "wrote " << records.size() << " users to " << out_path << '\n';
  return 0;
}
