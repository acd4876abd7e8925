#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcra/errors.hpp"

namespace mcra {

using UserId = std::int32_t;
using SlotIndex = std::int64_t;

enum class Ack : std::uint8_t { nak = 0, ack = 1 };

// Per-RB choice of one user in one slot: 0 = idle, n in [1:N] = transmit on RB n.
struct TransmissionChoice {
  int value = 0;
};

// Per-slot AP broadcast: one ACK/NAK entry per RB.
struct Feedback {
  std::vector<Ack> per_rb;
};

struct SlotOutcome {
  Feedback feedback;
  std::map<UserId, int> success;  // 1 iff the user's packet was decoded
  int collisions = 0;             // RBs hit by >= 2 transmitters
};

// Resolves one slot of the collision channel: an RB acknowledges exactly
// when a single active user picked it. Pure function of its inputs.
inline SlotOutcome resolve_slot(const std::map<UserId, TransmissionChoice>& choices,
                                int n_rbs) {
  SlotOutcome out;
  std::vector<int> transmitters(static_cast<std::size_t>(n_rbs), 0);
  for (const auto& [user, choice] : choices) {
    if (choice.value < 0 || choice.value > n_rbs) {
      throw SimError("invalid choice " + std::to_string(choice.value) +
                     " for user " + std::to_string(user) + " with " +
                     std::to_string(n_rbs) + " RBs");
    }
    if (choice.value > 0) ++transmitters[static_cast<std::size_t>(choice.value - 1)];
  }
  out.feedback.per_rb.resize(static_cast<std::size_t>(n_rbs));
  for (int n = 0; n < n_rbs; ++n) {
    out.feedback.per_rb[static_cast<std::size_t>(n)] =
        transmitters[static_cast<std::size_t>(n)] == 1 ? Ack::ack : Ack::nak;
    if (transmitters[static_cast<std::size_t>(n)] >= 2) ++out.collisions;
  }
  for (const auto& [user, choice] : choices) {
    const bool ok = choice.value > 0 &&
                    out.feedback.per_rb[static_cast<std::size_t>(choice.value - 1)] ==
                        Ack::ack;
    out.success[user] = ok ? 1 : 0;
  }
  return out;
}

// All users observe the same per-RB feedback vector.
inline const Feedback& broadcast_feedback(const SlotOutcome& outcome) {
  return outcome.feedback;
}

}  // namespace mcra
