#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "mfmdeg/model.hpp"
#include "mfmdeg/trajectory.hpp"

namespace mfmdeg::microsim {

/// X^N: every player's (type, internal state) plus the step counter.
struct MicroState {
  std::vector<int> types;
  std::vector<int> states;
  long steps = 0;

  int size() const { return static_cast<int>(states.size()); }
  double time() const { return static_cast<double>(steps) / static_cast<double>(size()); }
};

/// Players laid out type-major in the order of the counts (one per (type, state)).
MicroState make_state(const StateSpace& space, std::span<const long> counts);

std::vector<long> counts_of(const StateSpace& space, const MicroState& state);

struct EventRecord {
  long step = 0;
  std::vector<int> participants;
  std::vector<int> actions;
  std::vector<int> previous;
  std::vector<int> next;
  std::vector<double> gains;
  /// Spontaneous moves applied after the event: (player, new internal state).
  std::vector<std::pair<int, int>> spontaneous;
};

/// Incremental N-player simulator: maintains counts and the profile while
/// applying one event per step of 1/N.
class Simulator {
 public:
  Simulator(const ModelSpec& spec, StrategyProfile strategies, MicroState initial);

  const EventRecord& step(Rng& rng);

  const MicroState& state() const { return state_; }
  const Profile& profile() const { return profile_; }
  std::span<const long> counts() const { return counts_; }
  const EventRecord& last_event() const { return event_; }
  int population() const { return state_.size(); }
  /// Gain of `player` in the last event (0 when not selected).
  double last_gain(int player) const;

 private:
  void move(int player, int new_state);

  const ModelSpec& spec_;
  StrategyProfile strategies_;
  MicroState state_;
  std::vector<long> counts_;
  Profile profile_;
  std::vector<int> order_;
  std::vector<Participant> players_;
  std::vector<int> chosen_next_;
  OutcomeTable table_;
  EventRecord event_;
  int spontaneous_draws_ = 0;
};

/// Pure single step: returns the successor state and the event.
std::pair<MicroState, EventRecord> step(const ModelSpec& spec, const StrategyProfile& strategies,
                                        const MicroState& state, Rng& rng);

struct SimulateOptions {
  /// Steps between recorded profiles; 0 selects ceil(N/100).
  long record_stride = 0;
  bool full_recording = false;
  /// Player whose internal state is recorded alongside the profile (-1: none).
  int tracked_player = -1;
  /// Called for every event when set (EventRecord JSON-lines log).
  std::function<void(const EventRecord&)> on_event;
};

Trajectory simulate(const ModelSpec& spec, const StrategyProfile& strategies,
                    const MicroState& initial, double horizon, std::uint64_t seed,
                    const SimulateOptions& options = {});

struct PayoffEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long replications = 0;
  double truncation_horizon = 0.0;
};

struct PayoffOptions {
  /// Allowed bias from truncating the discounted sum; <= 0 selects 1e-6 * C0 / beta.
  double tail_tolerance = 0.0;
};

/// Smallest horizon T* with e^{-beta T*} C0 / (1 - e^{-beta/N}) <= tail tolerance.
double truncation_horizon(const ModelSpec& spec, long n, const PayoffOptions& options = {});

/// Tagged-player layout: player 0 has type 0 in internal state s0; the N-1
/// others are field players distributed by `field_counts` (length |S|).
MicroState tagged_state(const StateSpace& space, int s0, std::span<const long> field_counts);

/// Field counts for a field profile, requiring it to sit on the 1/(N-1) grid.
std::vector<long> field_counts_on_grid(const Eigen::VectorXd& field, long n);

/// Monte Carlo estimate of R^N(u1, u2; s0, m).
PayoffEstimate estimate_discounted_payoff(const ModelSpec& spec, const StationaryStrategy& u1,
                                          const StationaryStrategy& u2, int s0,
                                          const Eigen::VectorXd& field, long n, long replications,
                                          std::uint64_t seed, const PayoffOptions& options = {});

/// Exact conditional mean of the tagged player's one-slot gain, given the
/// current micro configuration: the finite-N expected instant payoff.
double expected_instant_gain(const ModelSpec& spec, const StrategyProfile& strategies,
                             const Profile& profile, std::span<const long> counts, int player_type,
                             int player_state, long n);

struct EquivalenceReport {
  PayoffEstimate gain_based;
  PayoffEstimate payoff_based;
  double difference = 0.0;
  double combined_std_error = 0.0;
  /// Standard error of the per-replication difference (same paths).
  double paired_std_error = 0.0;
  double z_combined = 0.0;
};

/// Compares the gain-based discounted estimator with the one built from
/// expected instant payoffs along the same simulated paths.
EquivalenceReport check_payoff_equivalence(const ModelSpec& spec, const StationaryStrategy& u1,
                                           const StationaryStrategy& u2, int s0,
                                           const Eigen::VectorXd& field, long n,
                                           long replications, std::uint64_t seed,
                                           const PayoffOptions& options = {});

struct ConvergenceRow {
  long n = 0;
  std::uint64_t seed = 0;
  double sup_deviation = 0.0;
};

struct ConvergenceSummary {
  long n = 0;
  double mean_sup_deviation = 0.0;
  /// Fraction of seeds whose sup deviation exceeds each epsilon of the grid.
  std::vector<double> exceedance;
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  std::vector<ConvergenceSummary> summary;
  std::vector<double> epsilons;
};

/// sup_{t<=T} |M^N(t) - m(t)|_inf for each N and seed, against the RK4 limit.
/// `m0` is a full profile; it must lie on the 1/N grid for every N.
ConvergenceStudy convergence_study(const ModelSpec& spec, const StrategyProfile& strategies,
                                   const Profile& m0, double horizon, std::span<const long> n_list,
                                   std::span<const std::uint64_t> seeds,
                                   std::vector<double> epsilons = {0.01, 0.02, 0.05, 0.1});

}  // namespace mfmdeg::microsim
