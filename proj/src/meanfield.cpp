#include "mfmdeg/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "events.hpp"

namespace mfmdeg {

Profile interpolate(const Trajectory& path, double t) {
  if (path.times.empty()) throw Error("trajectory", "empty trajectory");
  if (t <= path.times.front()) return path.profiles.front();
  if (t >= path.times.back()) return path.profiles.back();
  const auto it = std::upper_bound(path.times.begin(), path.times.end(), t);
  const std::size_t hi = static_cast<std::size_t>(it - path.times.begin());
  const std::size_t lo = hi - 1;
  const double w = (t - path.times[lo]) / (path.times[hi] - path.times[lo]);
  return (1.0 - w) * path.profiles[lo] + w * path.profiles[hi];
}

}  // namespace mfmdeg

namespace mfmdeg::meanfield {

namespace {

std::vector<int> support_of(const Profile& m) {
  std::vector<int> support;
  for (int x = 0; x < m.size(); ++x)
    if (m(x) > 0.0) support.push_back(x);
  return support;
}

void check_profile(const ModelSpec& spec, const Profile& m) {
  if (m.size() != spec.space.size())
    throw Error("profile", "profile has " + std::to_string(m.size()) + " entries, model has " +
                               std::to_string(spec.space.size()));
  if (!on_simplex(m, 1e-9)) throw Error("profile", "profile is not on the simplex");
}

void check_cap(const ModelSpec& spec, int k, int support, const DriftOptions& options) {
  if (detail::event_terms(spec, k, support) > options.enumeration_cap)
    throw Error("enumeration_cap",
                "exact event enumeration for k = " + std::to_string(k) +
                    " exceeds the cap; enable Monte Carlo drift mode (monte_carlo with a sample count)");
}

/// Enumerates events of size k whose participants other than `fixed` are
/// drawn i.i.d. from m over `support`.
template <class Visit>
void enumerate_iid(const ModelSpec& spec, const StrategyProfile& u, const Profile& m,
                   const std::vector<int>& support, std::vector<Participant>& players, int fixed,
                   OutcomeTable& table, Visit&& visit) {
  const int k = static_cast<int>(players.size());
  const int free_slots = fixed >= 0 ? k - 1 : k;
  std::vector<int> radix(free_slots, static_cast<int>(support.size()));
  for_each_tuple(radix, [&](std::span<const int> digits) {
    double weight = 1.0;
    for (int i = 0, d = 0; i < k; ++i) {
      if (i == fixed) continue;
      const int x = support[digits[d++]];
      players[i] = {spec.space.type_of(x), spec.space.state_of(x), -1};
      weight *= m(x);
    }
    detail::expand_event(spec, u, players, m, weight, fixed, table, visit);
  });
  if (free_slots == 0) detail::expand_event(spec, u, players, m, 1.0, fixed, table, visit);
}

Eigen::VectorXd sampled_drift(const ModelSpec& spec, const StrategyProfile& u, const Profile& m,
                              const Eigen::VectorXd& pmf, const DriftOptions& options) {
  const StateSpace& space = spec.space;
  Rng rng = make_stream(options.seed, 0);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(space.size());
  std::vector<Participant> players;
  OutcomeTable table;
  for (long i = 0; i < options.samples; ++i) {
    const int k = sample_discrete(std::span<const double>(pmf.data(), pmf.size()), rng);
    if (k == 0) continue;
    players.resize(k);
    for (auto& p : players) {
      const int x = sample_discrete(std::span<const double>(m.data(), m.size()), rng);
      p = {space.type_of(x), space.state_of(x), -1};
      p.action = sample_action(u[p.type], p.state, rng);
    }
    table.reset(k);
    spec.kernel(players, m, table);
    const auto next = table.next(sample_discrete(table.probs(), rng));
    for (int j = 0; j < k; ++j) {
      f(space.index(players[j].type, players[j].state)) -= 1.0;
      f(space.index(players[j].type, next[j])) += 1.0;
    }
  }
  return f / static_cast<double>(options.samples);
}

void add_spontaneous_flow(const ModelSpec& spec, const Profile& m, Eigen::VectorXd& f) {
  if (!spec.has_spontaneous()) return;
  const StateSpace& space = spec.space;
  for (int type = 0; type < space.type_count; ++type)
    for (int s = 0; s < space.state_count(); ++s)
      for (int t = 0; t < space.state_count(); ++t) {
        if (s == t) continue;
        const double flow = m(space.index(type, s)) * spec.spontaneous(s, t);
        f(space.index(type, s)) -= flow;
        f(space.index(type, t)) += flow;
      }
}

}  // namespace

Eigen::VectorXd drift(const ModelSpec& spec, const StrategyProfile& u, const Profile& m,
                      const DriftOptions& options) {
  check_profile(spec, m);
  if (static_cast<int>(u.size()) != spec.space.type_count)
    throw Error("strategy", "need one strategy per type");
  const StateSpace& space = spec.space;
  const Eigen::VectorXd pmf = spec.interaction(m);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(space.size());
  if (options.monte_carlo) {
    f = sampled_drift(spec, u, m, pmf, options);
  } else {
    const auto support = support_of(m);
    OutcomeTable table;
    for (int k = 1; k <= spec.interaction.k_max; ++k) {
      if (pmf(k) <= 0.0) continue;
      check_cap(spec, k, static_cast<int>(support.size()), options);
      std::vector<Participant> players(k);
      const double jk = pmf(k);
      enumerate_iid(spec, u, m, support, players, -1, table,
                    [&](std::span<const Participant> who, std::span<const int> next, double w) {
                      for (int i = 0; i < k; ++i) {
                        if (next[i] == who[i].state) continue;
                        f(space.index(who[i].type, who[i].state)) -= jk * w;
                        f(space.index(who[i].type, next[i])) += jk * w;
                      }
                    });
    }
  }
  add_spontaneous_flow(spec, m, f);
  return f;
}

DriftField drift_field(const ModelSpec& spec, StrategyProfile u, DriftOptions options) {
  return [&spec, u = std::move(u), options](const Profile& m) { return drift(spec, u, m, options); };
}

namespace {

struct Projection {
  long clipped = 0;
  double worst = 0.0;
};

/// Keeps y on the simplex: roundoff exits up to `tol` are removed, larger
/// exits mean the drift does not conserve mass.
void project(Profile& y, double tol, Projection& log) {
  const double low = y.minCoeff();
  const double excess = std::abs(y.sum() - 1.0);
  if (low < -tol || excess > tol || !y.allFinite())
    throw Error("simplex", "drift inconsistent with mass conservation");
  const double exit = std::max(-low, excess);
  if (exit > 1e-12) {
    ++log.clipped;
    log.worst = std::max(log.worst, exit);
  }
  if (low < 0.0) y = y.cwiseMax(0.0);
  y /= y.sum();
}

Trajectory run_rk4(const DriftField& f, const Profile& m0, double horizon, long steps,
                   long record_every, double tol, Projection& log) {
  const double h = horizon / static_cast<double>(steps);
  Trajectory path;
  Profile y = m0;
  path.push(0.0, y);
  for (long i = 1; i <= steps; ++i) {
    y = rk4_step(f, y, h);
    project(y, tol, log);
    if (i % record_every == 0 || i == steps) path.push(static_cast<double>(i) * h, y);
  }
  return path;
}

}  // namespace

OdeSolution integrate_ode(const DriftField& f, const Profile& m0, double horizon,
                          const OdeOptions& options) {
  if (!(horizon > 0.0)) throw Error("horizon", "horizon must be positive");
  if (!(options.step > 0.0)) throw Error("step", "step must be positive");
  if (!on_simplex(m0, 1e-9)) throw Error("profile", "initial profile is not on the simplex");
  const long steps = std::max(1L, static_cast<long>(std::ceil(horizon / options.step - 1e-9)));
  const long every = std::max(1L, options.record_every);

  OdeSolution out;
  Projection log;
  out.path = run_rk4(f, m0, horizon, steps, every, options.simplex_tolerance, log);
  if (options.error_estimate) {
    Projection fine_log;
    const Trajectory fine =
        run_rk4(f, m0, horizon, 2 * steps, 2 * every, options.simplex_tolerance, fine_log);
    for (std::size_t i = 0; i < out.path.size() && i < fine.size(); ++i)
      out.error_estimate = std::max(
          out.error_estimate, (out.path.profiles[i] - fine.profiles[i]).cwiseAbs().maxCoeff() / 15.0);
  }
  if (log.clipped > 0) {
    std::ostringstream msg;
    msg << "renormalized onto the simplex at " << log.clipped << " steps (largest exit "
        << log.worst << ")";
    out.warnings.push_back(msg.str());
  }
  return out;
}

Eigen::MatrixXd TaggedComponents::generator(const StationaryStrategy& u1) const {
  const int n = static_cast<int>(rates.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    const auto& policy = u1.policy[s];
    if (policy.size() == 0) {
      a.row(s) = rates[s][0].transpose();
    } else {
      for (int act = 0; act < policy.size(); ++act)
        a.row(s) += policy(act) * rates[s][act].transpose();
    }
    a(s, s) = 0.0;
    a(s, s) = -a.row(s).sum();
  }
  return a;
}

Eigen::VectorXd TaggedComponents::reward(const StationaryStrategy& u1) const {
  const int n = static_cast<int>(rewards.size());
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    const auto& policy = u1.policy[s];
    if (policy.size() == 0) {
      r(s) = rewards[s][0];
    } else {
      for (int act = 0; act < policy.size(); ++act) r(s) += policy(act) * rewards[s][act];
    }
  }
  return r;
}

TaggedComponents tagged_components(const ModelSpec& spec, const StationaryStrategy& u2,
                                   const Profile& m, const DriftOptions& options) {
  check_profile(spec, m);
  const StateSpace& space = spec.space;
  if (space.type_count < 2) throw Error("profile", "tagged analysis needs a model with two types");
  validate_strategy(space, kFieldType, u2);
  // The tagged position's action is fixed per call, so only the field
  // strategy is consulted; the tagged slot in this profile is a placeholder.
  StrategyProfile u(space.type_count, u2);
  u[kTaggedType] = StationaryStrategy::uniform(space, kTaggedType);

  const Eigen::VectorXd pmf = spec.interaction(m);
  const auto support = support_of(m);
  OutcomeTable table;
  TaggedComponents out;
  const int n_states = space.state_count();
  out.rates.resize(n_states);
  out.rewards.resize(n_states);
  for (int s = 0; s < n_states; ++s) {
    const int n_actions = std::max(1, space.action_count(kTaggedType, s));
    for (int a = 0; a < n_actions; ++a) {
      const int action = space.action_count(kTaggedType, s) == 0 ? -1 : a;
      Eigen::VectorXd row = Eigen::VectorXd::Zero(n_states);
      double reward = 0.0;
      for (int k = 1; k <= spec.interaction.k_max; ++k) {
        if (pmf(k) <= 0.0) continue;
        check_cap(spec, k - 1, static_cast<int>(support.size()), options);
        const double jk = pmf(k);
        std::vector<Participant> players(k);
        // Selected at rate k per unit time, at a uniform position: rate k * (1/k) per position.
        for (int p = 0; p < k; ++p) {
          players[p] = {kTaggedType, s, action};
          enumerate_iid(spec, u, m, support, players, p, table,
                        [&](std::span<const Participant> who, std::span<const int> next, double w) {
                          if (next[p] != s) row(next[p]) += jk * w;
                          reward += jk * w * spec.gain.gain(who, next, p);
                        });
        }
      }
      if (spec.has_spontaneous())
        for (int t = 0; t < n_states; ++t)
          if (t != s) row(t) += spec.spontaneous(s, t);
      row(s) = 0.0;
      out.rates[s].push_back(std::move(row));
      out.rewards[s].push_back(reward);
    }
  }
  return out;
}

Eigen::MatrixXd jump_generator(const ModelSpec& spec, const StationaryStrategy& u1,
                               const StationaryStrategy& u2, const Profile& m,
                               const DriftOptions& options) {
  validate_strategy(spec.space, kTaggedType, u1);
  return tagged_components(spec, u2, m, options).generator(u1);
}

Eigen::VectorXd instant_reward(const ModelSpec& spec, const StationaryStrategy& u1,
                               const StationaryStrategy& u2, const Profile& m,
                               const DriftOptions& options) {
  validate_strategy(spec.space, kTaggedType, u1);
  return tagged_components(spec, u2, m, options).reward(u1);
}

double value_horizon(const ModelSpec& spec, double tolerance) {
  if (!(tolerance > 0.0)) throw Error("tolerance", "tolerance must be positive");
  const double reward_bound = spec.gain.bound * spec.interaction.k_max;
  if (reward_bound <= 0.0) return 0.0;
  return std::max(0.0, std::log(reward_bound / (spec.discount * tolerance)) / spec.discount);
}

TaggedPath tagged_path(const ModelSpec& spec, const StationaryStrategy& u2,
                       const Eigen::VectorXd& field_m0, double horizon, const ValueOptions& options) {
  const StateSpace& space = spec.space;
  const Profile m0 = embed_field(space, field_m0);
  check_profile(spec, m0);
  validate_strategy(space, kFieldType, u2);
  TaggedPath path;
  const long steps = std::max(1L, static_cast<long>(std::ceil(horizon / options.step - 1e-9)));
  path.horizon = std::max(horizon, options.step);
  path.step = path.horizon / static_cast<double>(steps);

  // The field moves under u2 alone; the tagged player has no mass in the limit.
  OdeOptions ode;
  ode.step = path.step / 2.0;
  ode.error_estimate = false;
  path.field = integrate_ode(drift_field(spec, StrategyProfile(space.type_count, u2), options.drift),
                             m0, path.horizon, ode)
                   .path;
  path.knots.reserve(path.field.size());
  for (const auto& m : path.field.profiles) {
    path.knots.push_back(tagged_components(spec, u2, m, options.drift));
    for (const auto& per_state : path.knots.back().rewards)
      for (double r : per_state) path.reward_bound = std::max(path.reward_bound, std::abs(r));
  }
  return path;
}

ValueTable solve_value(const ModelSpec& spec, const TaggedPath& path, const StationaryStrategy& u1) {
  validate_strategy(spec.space, kTaggedType, u1);
  const double beta = spec.discount;
  const std::size_t n_knots = path.knots.size();
  std::vector<Eigen::MatrixXd> generators;
  std::vector<Eigen::VectorXd> rewards;
  generators.reserve(n_knots);
  rewards.reserve(n_knots);
  for (const auto& knot : path.knots) {
    generators.push_back(knot.generator(u1));
    rewards.push_back(knot.reward(u1));
  }
  // dV/dt = beta V - r - A V, integrated backward from V(T) = 0.
  auto slope = [&](std::size_t knot, const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return beta * v - rewards[knot] - generators[knot] * v;
  };
  const double h = path.step;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(spec.space.state_count());
  for (std::size_t j = (n_knots - 1) / 2; j >= 1; --j) {
    const std::size_t end = 2 * j, mid = 2 * j - 1, start = 2 * j - 2;
    const Eigen::VectorXd k1 = slope(end, v);
    const Eigen::VectorXd k2 = slope(mid, v - 0.5 * h * k1);
    const Eigen::VectorXd k3 = slope(mid, v - 0.5 * h * k2);
    const Eigen::VectorXd k4 = slope(start, v - h * k3);
    v -= (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  ValueTable table;
  table.values = v;
  table.horizon = path.horizon;
  const double bound = spec.gain.bound * spec.interaction.k_max;
  table.tail_bound = std::exp(-beta * path.horizon) * bound / beta;
  return table;
}

ValueTable tagged_value(const ModelSpec& spec, const StationaryStrategy& u1,
                        const StationaryStrategy& u2, const Eigen::VectorXd& field_m0,
                        double tolerance, const ValueOptions& options) {
  const double horizon = value_horizon(spec, tolerance);
  return solve_value(spec, tagged_path(spec, u2, field_m0, horizon, options), u1);
}

namespace {

/// Directions e_j - e_ref inside each type's simplex, ref being the type's
/// heaviest state; types without mass are left out.
Eigen::MatrixXd tangent_basis(const StateSpace& space, const Profile& y) {
  std::vector<Eigen::VectorXd> columns;
  for (int type = 0; type < space.type_count; ++type) {
    const auto block = y.segment(space.index(type, 0), space.state_count());
    if (block.sum() <= 0.0) continue;
    int ref = 0;
    block.maxCoeff(&ref);
    for (int s = 0; s < space.state_count(); ++s) {
      if (s == ref) continue;
      Eigen::VectorXd d = Eigen::VectorXd::Zero(y.size());
      d(space.index(type, s)) = 1.0;
      d(space.index(type, ref)) = -1.0;
      columns.push_back(d);
    }
  }
  Eigen::MatrixXd basis(y.size(), columns.size());
  for (std::size_t i = 0; i < columns.size(); ++i) basis.col(i) = columns[i];
  return basis;
}

}  // namespace

AttractorResult attractor(const DriftField& f, const StateSpace& space, const Profile& m0,
                          const AttractorOptions& options) {
  if (m0.size() != space.size() || !on_simplex(m0, 1e-9))
    throw Error("profile", "initial profile is not on the simplex");
  AttractorResult out;
  Profile y = m0;
  Projection log;
  double residual = f(y).cwiseAbs().maxCoeff();
  double t = 0.0;
  while (residual > options.residual_target && t < options.horizon_cap) {
    y = rk4_step(f, y, options.step);
    project(y, 1e-9, log);
    t += options.step;
    residual = f(y).cwiseAbs().maxCoeff();
  }
  out.time = t;

  if (residual <= options.newton_basin) {
    for (int it = 0; it < 50 && residual > 1e-14; ++it) {
      const Eigen::MatrixXd basis = tangent_basis(space, y);
      const Eigen::VectorXd fy = f(y);
      Eigen::MatrixXd jacobian(y.size(), basis.cols());
      for (int j = 0; j < basis.cols(); ++j)
        jacobian.col(j) = (f(y + options.jacobian_step * basis.col(j)) - fy) / options.jacobian_step;
      const Eigen::VectorXd delta = basis * jacobian.completeOrthogonalDecomposition().solve(-fy);
      bool accepted = false;
      for (double alpha = 1.0; alpha > 1e-4; alpha *= 0.5) {
        Profile candidate = y + alpha * delta;
        if (candidate.minCoeff() < -1e-12) continue;
        candidate = candidate.cwiseMax(0.0);
        const double r = f(candidate).cwiseAbs().maxCoeff();
        if (r < residual) {
          y = candidate;
          residual = r;
          accepted = true;
          break;
        }
      }
      ++out.newton_iterations;
      if (!accepted) break;
    }
  }
  if (residual > options.residual_target) {
    std::ostringstream msg;
    msg << "no attractor detected from m0 (residual " << residual << " after t = " << t << ")";
    throw Error("no_attractor", msg.str());
  }
  out.point = y;
  out.residual = residual;
  return out;
}

std::vector<std::vector<int>> closed_classes(const Eigen::MatrixXd& generator) {
  const int n = static_cast<int>(generator.rows());
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (int i = 0; i < n; ++i) {
    reach[i][i] = true;
    for (int j = 0; j < n; ++j)
      if (i != j && generator(i, j) > 0.0) reach[i][j] = true;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      if (reach[i][k])
        for (int j = 0; j < n; ++j)
          if (reach[k][j]) reach[i][j] = true;
  std::vector<std::vector<int>> classes;
  std::vector<bool> seen(n, false);
  for (int i = 0; i < n; ++i) {
    if (seen[i]) continue;
    std::vector<int> members;
    for (int j = 0; j < n; ++j)
      if (reach[i][j] && reach[j][i]) {
        members.push_back(j);
        seen[j] = true;
      }
    bool closed = true;
    for (int a : members)
      for (int b = 0; b < n; ++b)
        if (reach[a][b] && !reach[b][a]) closed = false;
    if (closed) classes.push_back(std::move(members));
  }
  return classes;
}

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& generator) {
  const int n = static_cast<int>(generator.rows());
  if (n == 1) return Eigen::VectorXd::Ones(1);
  const auto classes = closed_classes(generator);
  const bool irreducible = classes.size() == 1 && static_cast<int>(classes[0].size()) == n;
  if (!irreducible) {
    std::ostringstream msg;
    msg << "generator is reducible; closed classes:";
    for (const auto& c : classes) {
      msg << " {";
      for (std::size_t i = 0; i < c.size(); ++i) msg << (i ? "," : "") << c[i];
      msg << "}";
    }
    throw Error("reducible", msg.str());
  }
  Eigen::MatrixXd system = generator.transpose();
  system.row(n - 1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs(n - 1) = 1.0;
  return system.fullPivLu().solve(rhs);
}

StationaryPayoff stationary_payoff(const ModelSpec& spec, const StationaryStrategy& u1,
                                   const StationaryStrategy& u2, double tolerance,
                                   Eigen::VectorXd field_start, const ValueOptions& options) {
  const StateSpace& space = spec.space;
  if (field_start.size() == 0)
    field_start = Eigen::VectorXd::Constant(space.state_count(), 1.0 / space.state_count());
  const auto rest = attractor(drift_field(spec, StrategyProfile(space.type_count, u2), options.drift),
                              space, embed_field(space, field_start));
  StationaryPayoff out;
  out.field_attractor = rest.point.segment(space.index(kFieldType, 0), space.state_count());
  out.pi = stationary_distribution(jump_generator(spec, u1, u2, rest.point, options.drift));
  out.values = tagged_value(spec, u1, u2, out.field_attractor, tolerance, options).values;
  out.value = out.pi.dot(out.values);
  return out;
}

}  // namespace mfmdeg::meanfield
