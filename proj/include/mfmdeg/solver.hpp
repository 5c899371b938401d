#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfmdeg/meanfield.hpp"
#include "mfmdeg/model.hpp"

namespace mfmdeg::solver {

/// Product over internal states of a resolution-delta grid on each action
/// simplex. Point 0 in every state puts all mass on the first action, so the
/// enumeration order breaks ties toward the first listed action.
class StrategyGrid {
 public:
  StrategyGrid(const StateSpace& space, int type, double delta, std::size_t cap = 200000);

  std::size_t size() const { return size_; }
  double delta() const { return delta_; }
  StationaryStrategy at(std::size_t index) const;
  bool is_pure(std::size_t index) const;
  /// Index of a grid point within `tol` (sup norm) of `u`, if any.
  std::optional<std::size_t> find(const StationaryStrategy& u, double tol) const;

 private:
  std::vector<std::vector<Eigen::VectorXd>> points_;
  std::size_t size_ = 1;
  double delta_ = 0.05;
};

struct SolveOptions {
  /// Tail tolerance of the value horizon.
  double tolerance = 1e-6;
  meanfield::ValueOptions value;
  /// Evaluate only pure grid points (valid when the model is tagged-linear).
  bool pure_shortcut = false;
  double tie_tolerance = 1e-12;
};

struct BestResponse {
  StationaryStrategy strategy;
  std::size_t index = 0;
  double value = 0.0;
  /// Grid indices whose value is within the tie tolerance of the maximum.
  std::vector<std::size_t> ties;
  /// Value of every evaluated grid point (NaN where skipped).
  std::vector<double> values;
};

/// argmax over the grid of R(v, u_field; s0, m0); first maximizer wins.
BestResponse best_response(const ModelSpec& spec, const StationaryStrategy& u_field, int s0,
                           const Eigen::VectorXd& field_m0, const StrategyGrid& grid,
                           const SolveOptions& options = {});

struct Certificate {
  StationaryStrategy strategy;
  double value = 0.0;
  Eigen::VectorXd values;  ///< R(u, u; s, m0) for every s
  double epsilon = 0.0;
  std::string kind = "equilibrium";
  double grid_delta = 0.0;
  int s0 = 0;
  Eigen::VectorXd m0;
  bool converged = true;
  int iterations = 0;
  bool cycle_detected = false;
  std::vector<std::size_t> tie_class;
};

/// Equilibrium certificate of u: epsilon = max(R(v, u), v in grid and v = u) - R(u, u).
Certificate certify(const ModelSpec& spec, const StationaryStrategy& u, int s0,
                    const Eigen::VectorXd& field_m0, const StrategyGrid& grid,
                    const SolveOptions& options = {});

struct FixedPointOptions {
  int max_iters = 200;
  double damping = 0.5;
  double move_tolerance = 1e-6;
  double cycle_tolerance = 1e-9;
  /// Final strategies this close to a grid point are replaced by it.
  double snap = 1e-6;
};

/// Damped best-response iteration u <- (1 - a) u + a BR(u).
Certificate fixed_point_iterate(const ModelSpec& spec, const StationaryStrategy& u_init, int s0,
                                const Eigen::VectorXd& field_m0, const StrategyGrid& grid,
                                const FixedPointOptions& fixed = {},
                                const SolveOptions& options = {});

/// Exhaustive grid maximization of R(u, u; s0, m0).
Certificate optimize_team(const ModelSpec& spec, int s0, const Eigen::VectorXd& field_m0,
                          const StrategyGrid& grid, const SolveOptions& options = {});

/// Symmetric value R(u, u; s, m0) per state.
Eigen::VectorXd symmetric_values(const ModelSpec& spec, const StationaryStrategy& u,
                                 const Eigen::VectorXd& field_m0, const SolveOptions& options = {});

struct GapRow {
  long n = 0;
  Eigen::VectorXd field_m0;  ///< m0 rounded to the 1/(N-1) grid
  double value = 0.0;        ///< R^N(u, u)
  double value_se = 0.0;
  double limit = 0.0;        ///< R(u, u) at the rounded m0
  double epsilon = 0.0;      ///< max over probes of R^N(v, u) - R^N(u, u)
  double epsilon_se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t best_probe = 0;
};

/// Finite-N check of a limit strategy against a probe set (pure strategies
/// when empty). Confidence intervals are 99% normal intervals.
std::vector<GapRow> finite_N_gap(const ModelSpec& spec, const StationaryStrategy& u, int s0,
                                 const Eigen::VectorXd& field_m0, std::span<const long> n_list,
                                 long replications, std::uint64_t seed,
                                 std::vector<StationaryStrategy> probes = {},
                                 const SolveOptions& options = {});

/// All pure strategies of `type`, first action first.
std::vector<StationaryStrategy> pure_strategies(const StateSpace& space, int type);

}  // namespace mfmdeg::solver
