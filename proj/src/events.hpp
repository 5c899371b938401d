#pragma once

// Shared enumeration of one event's randomness: participants' actions and
// the kernel outcome, once the participants' states are fixed.

#include <span>
#include <vector>

#include "mfmdeg/model.hpp"

namespace mfmdeg::detail {

/// For players[0..k) with states set, enumerates every action combination
/// with positive probability (skipping `fixed`, whose action is preset) and
/// every kernel outcome. Calls visit(players, next, weight * P(actions) * P(outcome)).
template <class Visit>
void expand_event(const ModelSpec& spec, const StrategyProfile& strategies,
                  std::vector<Participant>& players, const Profile& m, double weight, int fixed,
                  OutcomeTable& table, Visit&& visit, std::size_t position = 0) {
  const std::size_t k = players.size();
  if (position == k) {
    table.reset(static_cast<int>(k));
    spec.kernel(players, m, table);
    for (std::size_t o = 0; o < table.size(); ++o) {
      const double p = table.prob(o);
      if (p > 0.0) visit(std::span<const Participant>(players), table.next(o), weight * p);
    }
    return;
  }
  Participant& who = players[position];
  const auto& policy = strategies[who.type].policy[who.state];
  if (static_cast<int>(position) == fixed || policy.size() == 0) {
    if (policy.size() == 0) who.action = -1;
    expand_event(spec, strategies, players, m, weight, fixed, table, visit, position + 1);
    return;
  }
  for (int a = 0; a < policy.size(); ++a) {
    const double p = policy(a);
    if (p <= 0.0) continue;
    who.action = a;
    expand_event(spec, strategies, players, m, weight * p, fixed, table, visit, position + 1);
  }
}

/// Upper estimate of the number of terms of an i.i.d. event enumeration.
inline double event_terms(const ModelSpec& spec, int k, int support) {
  const double per_player = static_cast<double>(support) *
                            static_cast<double>(std::max(1, spec.space.max_action_count())) *
                            static_cast<double>(spec.space.state_count());
  double terms = 1.0;
  for (int i = 0; i < k; ++i) terms *= per_player;
  return terms;
}

}  // namespace mfmdeg::detail
