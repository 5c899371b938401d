#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mfmdeg/rng.hpp"

namespace mfmdeg {

/// Error raised by every module. `code` is a short machine-readable tag that
/// the CLI forwards in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Mass over (type, internal state) pairs, stored type-major:
/// entry `type * state_count + state`.
using Profile = Eigen::VectorXd;

/// In the tagged-player setting the player of interest has type 0 and the
/// rest of the population has type 1.
inline constexpr int kTaggedType = 0;
inline constexpr int kFieldType = 1;

struct StateSpace {
  int type_count = 1;
  std::vector<std::string> state_names;
  /// actions[type][state] lists the action names available there; may be empty.
  std::vector<std::vector<std::vector<std::string>>> actions;

  /// Same action sets for every type.
  static StateSpace uniform(int type_count, std::vector<std::string> states,
                            std::vector<std::vector<std::string>> actions_per_state);

  int state_count() const { return static_cast<int>(state_names.size()); }
  int size() const { return type_count * state_count(); }
  int index(int type, int state) const { return type * state_count() + state; }
  int type_of(int index) const { return index / state_count(); }
  int state_of(int index) const { return index % state_count(); }
  int action_count(int type, int state) const {
    return static_cast<int>(actions[type][state].size());
  }
  int max_action_count() const;
  /// -1 when the name is unknown.
  int find_state(std::string_view name) const;
  int find_action(int type, int state, std::string_view name) const;
};

/// J_k(m): law of the number of players drawn into one event.
struct InteractionLaw {
  int k_max = 0;
  std::function<Eigen::VectorXd(const Profile&)> size_pmf;

  static InteractionLaw constant(Eigen::VectorXd pmf);
  static InteractionLaw fixed(int k);

  Eigen::VectorXd operator()(const Profile& m) const { return size_pmf(m); }
  bool is_constant() const { return !constant_pmf.empty(); }
  std::span<const double> constant_values() const { return constant_pmf; }

 private:
  std::vector<double> constant_pmf;
};

/// One player taking part in an event. `action` is -1 when the state offers
/// no action.
struct Participant {
  int type = 0;
  int state = 0;
  int action = -1;
};

/// Sparse distribution over joint next internal states of k participants.
/// Kernels append outcomes; rows need not be unique.
class OutcomeTable {
 public:
  void reset(int k) {
    k_ = k;
    next_.clear();
    prob_.clear();
  }
  void add(std::span<const int> next, double prob);
  void add(std::initializer_list<int> next, double prob) {
    add(std::span<const int>(next.begin(), next.size()), prob);
  }

  int arity() const { return k_; }
  std::size_t size() const { return prob_.size(); }
  std::span<const int> next(std::size_t i) const {
    return std::span<const int>(next_).subspan(i * static_cast<std::size_t>(k_), k_);
  }
  double prob(std::size_t i) const { return prob_[i]; }
  std::span<const double> probs() const { return prob_; }

 private:
  int k_ = 0;
  std::vector<int> next_;
  std::vector<double> prob_;
};

using KernelFn =
    std::function<void(std::span<const Participant>, const Profile&, OutcomeTable&)>;

/// Gain of participant `self`, given everybody's state/action before the event
/// and everybody's next internal state.
using GainFn = std::function<double(std::span<const Participant>, std::span<const int> next,
                                    std::size_t self)>;

struct GainFunction {
  GainFn gain;
  double bound = 0.0;  ///< C0 >= sup |gain|
};

struct ModelSpec {
  std::string name;
  StateSpace space;
  InteractionLaw interaction;
  KernelFn kernel;
  GainFunction gain;
  double discount = 1.0;
  /// Declared Lipschitz constant of J and L in m (l1 distance on profiles).
  double lipschitz = 1.0;
  /// Optional per-unit-time spontaneous moves between internal states that
  /// happen outside events (|S| x |S|, off-diagonal rates, same for all
  /// types). Empty when the model has none.
  Eigen::MatrixXd spontaneous;

  bool has_spontaneous() const { return spontaneous.size() > 0; }
};

/// u_theta(a|s) for one type: one action distribution per internal state.
struct StationaryStrategy {
  std::vector<Eigen::VectorXd> policy;

  double prob(int state, int action) const { return policy[state](action); }
  int state_count() const { return static_cast<int>(policy.size()); }

  /// Point mass on `actions[s]` in every state; entries for action-less states are ignored.
  static StationaryStrategy pure(const StateSpace& space, int type, std::span<const int> actions);
  /// Uniform over the available actions in every state.
  static StationaryStrategy uniform(const StateSpace& space, int type);
  double distance(const StationaryStrategy& other) const;
};

/// One strategy per type.
using StrategyProfile = std::vector<StationaryStrategy>;

struct ValidationReport {
  std::vector<std::string> failures;
  bool ok() const { return failures.empty(); }
};

/// Checks the model invariants by enumeration (small models) and sampling.
ValidationReport validate_model(const ModelSpec& spec, std::uint64_t seed = 1, int samples = 32);

/// Throws if `strategy` is not a valid distribution for every state of `type`.
void validate_strategy(const StateSpace& space, int type, const StationaryStrategy& strategy);

int sample_action(const StationaryStrategy& strategy, int state, Rng& rng);

/// M = counts / n. Throws when the counts do not add up to n.
Profile profile_from_counts(const StateSpace& space, std::span<const long> counts, long n);

bool on_simplex(const Profile& m, double tol = 1e-12);

/// Total mass of each type.
Eigen::VectorXd type_masses(const StateSpace& space, const Profile& m);

/// Full profile with all mass on the field type distributed as `field`
/// (length |S|) and zero tagged mass.
Profile embed_field(const StateSpace& space, const Eigen::VectorXd& field);

/// Largest-remainder rounding of `m` (any length) to integer counts summing to n.
std::vector<long> nearest_counts(const Eigen::VectorXd& m, long n);

/// Calls `visit` with every mixed-radix tuple t (0 <= t[i] < radix[i]).
void for_each_tuple(std::span<const int> radix, const std::function<void(std::span<const int>)>& visit);

}  // namespace mfmdeg
