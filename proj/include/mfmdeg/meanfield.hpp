#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mfmdeg/model.hpp"
#include "mfmdeg/trajectory.hpp"

namespace mfmdeg::meanfield {

struct DriftOptions {
  /// Largest number of enumerated event terms before exact mode gives up.
  double enumeration_cap = 1e7;
  /// Estimate event expectations by sampling instead of enumeration.
  bool monte_carlo = false;
  long samples = 100000;
  std::uint64_t seed = 1;
};

/// f(u, m) = sum_k J_k(m) E[change in counts of one event], plus spontaneous flows.
Eigen::VectorXd drift(const ModelSpec& spec, const StrategyProfile& u, const Profile& m,
                      const DriftOptions& options = {});

using DriftField = std::function<Eigen::VectorXd(const Profile&)>;

/// Binds a strategy profile into a drift field.
DriftField drift_field(const ModelSpec& spec, StrategyProfile u, DriftOptions options = {});

/// Classical RK4 step for any Eigen vector type.
template <class Vector, class F>
Vector rk4_step(const F& f, const Vector& y, double h) {
  const Vector k1 = f(y);
  const Vector k2 = f(y + 0.5 * h * k1);
  const Vector k3 = f(y + 0.5 * h * k2);
  const Vector k4 = f(y + h * k3);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct OdeOptions {
  double step = 1e-3;
  /// Record every n-th step (the final time is always recorded).
  long record_every = 1;
  /// Re-run at half step and report max |y_h - y_{h/2}| / 15.
  bool error_estimate = true;
  double simplex_tolerance = 1e-9;
};

struct OdeSolution {
  Trajectory path;
  double error_estimate = 0.0;
  std::vector<std::string> warnings;
};

/// Fixed-step RK4 on [0, T] from m0, keeping the state on the simplex.
OdeSolution integrate_ode(const DriftField& f, const Profile& m0, double horizon,
                          const OdeOptions& options = {});

/// Rate matrix (|S| x |S|, rows sum to zero) of the tagged player (type 0)
/// using u1 while the field (type 1) uses u2 and has profile m (full profile).
Eigen::MatrixXd jump_generator(const ModelSpec& spec, const StationaryStrategy& u1,
                               const StationaryStrategy& u2, const Profile& m,
                               const DriftOptions& options = {});

/// r(u1, u2, s, m): tagged player's expected gain per unit time in each state.
Eigen::VectorXd instant_reward(const ModelSpec& spec, const StationaryStrategy& u1,
                               const StationaryStrategy& u2, const Profile& m,
                               const DriftOptions& options = {});

/// Per-action pieces of the tagged dynamics at one profile. The tagged
/// player's action is drawn independently of everything else, so rates and
/// rewards for a mixed strategy are the u1-weighted sums of these.
struct TaggedComponents {
  /// rates[s][a] is the off-diagonal rate row out of s when playing a
  /// (a single entry when s has no action).
  std::vector<std::vector<Eigen::VectorXd>> rates;
  std::vector<std::vector<double>> rewards;

  Eigen::MatrixXd generator(const StationaryStrategy& u1) const;
  Eigen::VectorXd reward(const StationaryStrategy& u1) const;
};

TaggedComponents tagged_components(const ModelSpec& spec, const StationaryStrategy& u2,
                                   const Profile& m, const DriftOptions& options = {});

/// Forward field path under u2 with the tagged components precomputed at
/// every knot; shared by all tagged strategies evaluated against u2.
struct TaggedPath {
  double step = 1e-3;       ///< knot spacing
  double horizon = 0.0;
  Trajectory field;
  std::vector<TaggedComponents> knots;
  double reward_bound = 0.0;
};

struct ValueOptions {
  double step = 1e-3;
  DriftOptions drift;
};

/// Horizon T with e^{-beta T} sup|r| / beta <= tolerance.
double value_horizon(const ModelSpec& spec, double tolerance);

TaggedPath tagged_path(const ModelSpec& spec, const StationaryStrategy& u2,
                       const Eigen::VectorXd& field_m0, double horizon,
                       const ValueOptions& options = {});

struct ValueTable {
  Eigen::VectorXd values;  ///< V(0, s) for every internal state
  double horizon = 0.0;
  double tail_bound = 0.0;  ///< e^{-beta T} sup|r| / beta
};

/// Backward RK4 for -dV/dt = r - beta V + A V on the stored path, V(T) = 0.
ValueTable solve_value(const ModelSpec& spec, const TaggedPath& path, const StationaryStrategy& u1);

/// R(u1, u2; s, m0) for every s. `field_m0` is the field profile over internal states.
ValueTable tagged_value(const ModelSpec& spec, const StationaryStrategy& u1,
                        const StationaryStrategy& u2, const Eigen::VectorXd& field_m0,
                        double tolerance, const ValueOptions& options = {});

struct AttractorOptions {
  double horizon_cap = 1000.0;
  double step = 1e-2;
  double residual_target = 1e-10;
  /// Residual below which Newton refinement is attempted when the cap is hit.
  double newton_basin = 1e-4;
  double jacobian_step = 1e-6;
};

struct AttractorResult {
  Profile point;
  double residual = 0.0;
  double time = 0.0;
  int newton_iterations = 0;
};

/// Integrates to rest and polishes with damped Newton on the simplex.
/// Throws Error("no_attractor") when no rest point is reached.
AttractorResult attractor(const DriftField& f, const StateSpace& space, const Profile& m0,
                          const AttractorOptions& options = {});

/// Strongly connected classes of the support graph that have no exit.
std::vector<std::vector<int>> closed_classes(const Eigen::MatrixXd& generator);

/// pi A = 0, sum pi = 1. Throws when the generator is reducible.
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& generator);

struct StationaryPayoff {
  Eigen::VectorXd pi;
  double value = 0.0;
  Eigen::VectorXd values;       ///< R(u1, u2; s, m*)
  Eigen::VectorXd field_attractor;
};

/// pi-weighted payoff at the attractor of the field under u2, reached from
/// `field_start` (uniform when empty).
StationaryPayoff stationary_payoff(const ModelSpec& spec, const StationaryStrategy& u1,
                                   const StationaryStrategy& u2, double tolerance,
                                   Eigen::VectorXd field_start = {},
                                   const ValueOptions& options = {});

}  // namespace mfmdeg::meanfield
