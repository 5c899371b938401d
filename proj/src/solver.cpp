#include "mfmdeg/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfmdeg/microsim.hpp"
#include "mfmdeg/parallel.hpp"

namespace mfmdeg::solver {

namespace {

void compositions(int remaining, int parts, std::vector<int>& prefix, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    prefix.push_back(remaining);
    out.push_back(prefix);
    prefix.pop_back();
    return;
  }
  for (int first = remaining; first >= 0; --first) {
    prefix.push_back(first);
    compositions(remaining - first, parts - 1, prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

StrategyGrid::StrategyGrid(const StateSpace& space, int type, double delta, std::size_t cap)
    : delta_(delta) {
  if (!(delta > 0.0 && delta <= 1.0)) throw Error("grid", "grid delta must lie in (0, 1]");
  const double steps = std::round(1.0 / delta);
  if (std::abs(steps * delta - 1.0) > 1e-9) throw Error("grid", "1/delta must be an integer");
  const int k = static_cast<int>(steps);
  points_.resize(space.state_count());
  double total = 1.0;
  for (int s = 0; s < space.state_count(); ++s) {
    const int n = space.action_count(type, s);
    if (n == 0) {
      points_[s].push_back(Eigen::VectorXd());
      continue;
    }
    std::vector<std::vector<int>> parts;
    std::vector<int> prefix;
    compositions(k, n, prefix, parts);
    total *= static_cast<double>(parts.size());
    if (total > static_cast<double>(cap))
      throw Error("grid_cap", "strategy grid exceeds the cap of " + std::to_string(cap) +
                                  " points; use a coarser delta");
    for (const auto& p : parts) {
      Eigen::VectorXd point(n);
      for (int a = 0; a < n; ++a) point(a) = static_cast<double>(p[a]) / steps;
      points_[s].push_back(point);
    }
  }
  size_ = static_cast<std::size_t>(total);
}

StationaryStrategy StrategyGrid::at(std::size_t index) const {
  StationaryStrategy u;
  u.policy.resize(points_.size());
  for (std::size_t s = points_.size(); s-- > 0;) {
    const std::size_t n = points_[s].size();
    u.policy[s] = points_[s][index % n];
    index /= n;
  }
  return u;
}

bool StrategyGrid::is_pure(std::size_t index) const {
  const StationaryStrategy u = at(index);
  for (const auto& p : u.policy)
    if (p.size() > 0 && p.maxCoeff() < 1.0) return false;
  return true;
}

std::optional<std::size_t> StrategyGrid::find(const StationaryStrategy& u, double tol) const {
  if (u.policy.size() != points_.size()) return std::nullopt;
  std::size_t index = 0;
  for (std::size_t s = 0; s < points_.size(); ++s) {
    std::size_t hit = points_[s].size();
    for (std::size_t i = 0; i < points_[s].size(); ++i) {
      const auto& p = points_[s][i];
      if (p.size() != u.policy[s].size()) return std::nullopt;
      if (p.size() == 0 || (p - u.policy[s]).cwiseAbs().maxCoeff() <= tol) {
        hit = i;
        break;
      }
    }
    if (hit == points_[s].size()) return std::nullopt;
    index = index * points_[s].size() + hit;
  }
  return index;
}

std::vector<StationaryStrategy> pure_strategies(const StateSpace& space, int type) {
  const StrategyGrid grid(space, type, 1.0);
  std::vector<StationaryStrategy> out;
  for (std::size_t i = 0; i < grid.size(); ++i) out.push_back(grid.at(i));
  return out;
}

namespace {

void check_state(const StateSpace& space, int s0) {
  if (s0 < 0 || s0 >= space.state_count()) throw Error("state", "initial state out of range");
}

meanfield::TaggedPath path_for(const ModelSpec& spec, const StationaryStrategy& u_field,
                               const Eigen::VectorXd& field_m0, const SolveOptions& options) {
  return meanfield::tagged_path(spec, u_field, field_m0,
                                meanfield::value_horizon(spec, options.tolerance), options.value);
}

struct Sweep {
  std::vector<double> values;  // NaN for skipped points
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> ties;
};

Sweep sweep(const ModelSpec& spec, const meanfield::TaggedPath& path, const StrategyGrid& grid,
            int s0, const SolveOptions& options) {
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (!options.pure_shortcut || grid.is_pure(i)) candidates.push_back(i);
  const auto values = parallel_map(candidates.size(), [&](std::size_t i) {
    return meanfield::solve_value(spec, path, grid.at(candidates[i])).values(s0);
  });
  Sweep out;
  out.values.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.values[candidates[i]] = values[i];
    out.best_value = std::max(out.best_value, values[i]);
  }
  bool chosen = false;
  for (std::size_t i : candidates) {
    if (out.values[i] < out.best_value - options.tie_tolerance) continue;
    if (!chosen) {
      out.best = i;
      chosen = true;
    }
    out.ties.push_back(i);
  }
  return out;
}

StationaryStrategy mix(const StationaryStrategy& u, const StationaryStrategy& v, double alpha) {
  StationaryStrategy out = u;
  for (std::size_t s = 0; s < out.policy.size(); ++s)
    if (out.policy[s].size() > 0) out.policy[s] = (1.0 - alpha) * u.policy[s] + alpha * v.policy[s];
  return out;
}

}  // namespace

BestResponse best_response(const ModelSpec& spec, const StationaryStrategy& u_field, int s0,
                           const Eigen::VectorXd& field_m0, const StrategyGrid& grid,
                           const SolveOptions& options) {
  check_state(spec.space, s0);
  const auto path = path_for(spec, u_field, field_m0, options);
  Sweep result = sweep(spec, path, grid, s0, options);
  BestResponse out;
  out.index = result.best;
  out.strategy = grid.at(result.best);
  out.value = result.best_value;
  out.ties = std::move(result.ties);
  out.values = std::move(result.values);
  return out;
}

Eigen::VectorXd symmetric_values(const ModelSpec& spec, const StationaryStrategy& u,
                                 const Eigen::VectorXd& field_m0, const SolveOptions& options) {
  return meanfield::solve_value(spec, path_for(spec, u, field_m0, options), u).values;
}

Certificate certify(const ModelSpec& spec, const StationaryStrategy& u, int s0,
                    const Eigen::VectorXd& field_m0, const StrategyGrid& grid,
                    const SolveOptions& options) {
  check_state(spec.space, s0);
  validate_strategy(spec.space, kTaggedType, u);
  const auto path = path_for(spec, u, field_m0, options);
  const Sweep result = sweep(spec, path, grid, s0, options);
  Certificate cert;
  cert.strategy = u;
  cert.values = meanfield::solve_value(spec, path, u).values;
  cert.value = cert.values(s0);
  cert.epsilon = std::max(result.best_value, cert.value) - cert.value;
  cert.kind = "equilibrium";
  cert.grid_delta = grid.delta();
  cert.s0 = s0;
  cert.m0 = field_m0;
  cert.tie_class = result.ties;
  return cert;
}

Certificate fixed_point_iterate(const ModelSpec& spec, const StationaryStrategy& u_init, int s0,
                                const Eigen::VectorXd& field_m0, const StrategyGrid& grid,
                                const FixedPointOptions& fixed, const SolveOptions& options) {
  if (!(fixed.damping > 0.0 && fixed.damping <= 1.0))
    throw Error("damping", "damping must lie in (0, 1]");
  validate_strategy(spec.space, kFieldType, u_init);
  StationaryStrategy u = u_init;
  std::vector<StationaryStrategy> history{u};
  bool converged = false, cycle = false;
  int iterations = 0;
  while (iterations < fixed.max_iters) {
    ++iterations;
    const BestResponse br = best_response(spec, u, s0, field_m0, grid, options);
    const StationaryStrategy next = mix(u, br.strategy, fixed.damping);
    const double moved = next.distance(u);
    u = next;
    if (moved < fixed.move_tolerance) {
      converged = true;
      break;
    }
    for (std::size_t h = 0; h + 1 < history.size(); ++h)
      if (u.distance(history[h]) < fixed.cycle_tolerance) cycle = true;
    if (cycle) break;
    history.push_back(u);
  }
  if (const auto hit = grid.find(u, fixed.snap)) u = grid.at(*hit);
  Certificate cert = certify(spec, u, s0, field_m0, grid, options);
  cert.converged = converged;
  cert.iterations = iterations;
  cert.cycle_detected = cycle;
  return cert;
}

Certificate optimize_team(const ModelSpec& spec, int s0, const Eigen::VectorXd& field_m0,
                          const StrategyGrid& grid, const SolveOptions& options) {
  check_state(spec.space, s0);
  const auto values = parallel_map(grid.size(), [&](std::size_t i) {
    return symmetric_values(spec, grid.at(i), field_m0, options)(s0);
  });
  const double best = *std::max_element(values.begin(), values.end());
  Certificate cert;
  cert.kind = "team-optimal";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < best - options.tie_tolerance) continue;
    if (cert.tie_class.empty()) cert.strategy = grid.at(i);
    cert.tie_class.push_back(i);
  }
  cert.values = symmetric_values(spec, cert.strategy, field_m0, options);
  cert.value = cert.values(s0);
  cert.epsilon = std::max(best, cert.value) - cert.value;
  cert.grid_delta = grid.delta();
  cert.s0 = s0;
  cert.m0 = field_m0;
  return cert;
}

std::vector<GapRow> finite_N_gap(const ModelSpec& spec, const StationaryStrategy& u, int s0,
                                 const Eigen::VectorXd& field_m0, std::span<const long> n_list,
                                 long replications, std::uint64_t seed,
                                 std::vector<StationaryStrategy> probes, const SolveOptions& options) {
  constexpr double kZ99 = 2.5758293035489;
  check_state(spec.space, s0);
  if (probes.empty()) probes = pure_strategies(spec.space, kTaggedType);
  std::vector<GapRow> rows;
  for (long n : n_list) {
    if (n < 2) throw Error("population", "tagged analysis needs N >= 2");
    GapRow row;
    row.n = n;
    const auto counts = nearest_counts(field_m0, n - 1);
    row.field_m0 = Eigen::VectorXd(field_m0.size());
    for (int s = 0; s < field_m0.size(); ++s)
      row.field_m0(s) = static_cast<double>(counts[s]) / static_cast<double>(n - 1);

    const std::uint64_t base = seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(n);
    const auto own = microsim::estimate_discounted_payoff(spec, u, u, s0, row.field_m0, n,
                                                          replications, base);
    row.value = own.mean;
    row.value_se = own.std_error;
    row.limit = meanfield::tagged_value(spec, u, u, row.field_m0, options.tolerance, options.value)
                    .values(s0);
    row.epsilon = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < probes.size(); ++j) {
      const auto dev = microsim::estimate_discounted_payoff(spec, probes[j], u, s0, row.field_m0, n,
                                                            replications, base + j + 1);
      const double gap = dev.mean - own.mean;
      if (gap > row.epsilon) {
        row.epsilon = gap;
        row.epsilon_se = std::hypot(dev.std_error, own.std_error);
        row.best_probe = j;
      }
    }
    row.ci_low = row.epsilon - kZ99 * row.epsilon_se;
    row.ci_high = row.epsilon + kZ99 * row.epsilon_se;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mfmdeg::solver
