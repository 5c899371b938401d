#include "mfmdeg/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "events.hpp"
#include "mfmdeg/meanfield.hpp"
#include "mfmdeg/parallel.hpp"

namespace mfmdeg::microsim {

MicroState make_state(const StateSpace& space, std::span<const long> counts) {
  if (static_cast<int>(counts.size()) != space.size())
    throw Error("counts", "expected one count per (type, state)");
  MicroState state;
  for (int x = 0; x < space.size(); ++x) {
    if (counts[x] < 0) throw Error("counts", "negative count");
    for (long j = 0; j < counts[x]; ++j) {
      state.types.push_back(space.type_of(x));
      state.states.push_back(space.state_of(x));
    }
  }
  if (state.states.empty()) throw Error("counts", "population is empty");
  return state;
}

std::vector<long> counts_of(const StateSpace& space, const MicroState& state) {
  std::vector<long> counts(space.size(), 0);
  for (int j = 0; j < state.size(); ++j) ++counts[space.index(state.types[j], state.states[j])];
  return counts;
}

Simulator::Simulator(const ModelSpec& spec, StrategyProfile strategies, MicroState initial)
    : spec_(spec), strategies_(std::move(strategies)), state_(std::move(initial)) {
  if (static_cast<int>(strategies_.size()) != spec_.space.type_count)
    throw Error("strategy", "need one strategy per type");
  for (int t = 0; t < spec_.space.type_count; ++t) validate_strategy(spec_.space, t, strategies_[t]);
  counts_ = counts_of(spec_.space, state_);
  profile_ = profile_from_counts(spec_.space, counts_, state_.size());
  order_.resize(state_.size());
  std::iota(order_.begin(), order_.end(), 0);
  if (spec_.has_spontaneous()) {
    double max_exit = 0.0;
    for (int s = 0; s < spec_.spontaneous.rows(); ++s) {
      double exit = 0.0;
      for (int t = 0; t < spec_.spontaneous.cols(); ++t)
        if (t != s) exit += spec_.spontaneous(s, t);
      max_exit = std::max(max_exit, exit);
    }
    spontaneous_draws_ = static_cast<int>(std::ceil(max_exit));
  }
}

void Simulator::move(int player, int new_state) {
  const int n = state_.size();
  const int from = spec_.space.index(state_.types[player], state_.states[player]);
  const int to = spec_.space.index(state_.types[player], new_state);
  if (from == to) return;
  state_.states[player] = new_state;
  --counts_[from];
  ++counts_[to];
  profile_(from) = static_cast<double>(counts_[from]) / n;
  profile_(to) = static_cast<double>(counts_[to]) / n;
}

double Simulator::last_gain(int player) const {
  for (std::size_t i = 0; i < event_.participants.size(); ++i)
    if (event_.participants[i] == player) return event_.gains[i];
  return 0.0;
}

const EventRecord& Simulator::step(Rng& rng) {
  const int n = state_.size();
  const auto& law = spec_.interaction;
  int k = 0;
  if (law.is_constant()) {
    k = sample_discrete(law.constant_values(), rng);
  } else {
    const Eigen::VectorXd pmf = law(profile_);
    k = sample_discrete(std::span<const double>(pmf.data(), pmf.size()), rng);
  }
  if (k > n) throw Error("interaction", "interaction larger than population");

  event_.step = state_.steps;
  event_.spontaneous.clear();
  // Partial Fisher-Yates: the first k entries are a uniform ordered k-tuple.
  int swapped[8];
  for (int i = 0; i < k; ++i) {
    const int j = i + uniform_index(rng, n - i);
    if (i < 8) swapped[i] = j;
    std::swap(order_[i], order_[j]);
  }
  event_.participants.assign(order_.begin(), order_.begin() + k);
  // Undo the swaps so each step depends only on the state and the stream.
  if (k <= 8)
    for (int i = k - 1; i >= 0; --i) std::swap(order_[i], order_[swapped[i]]);
  else
    std::iota(order_.begin(), order_.end(), 0);
  players_.resize(k);
  event_.actions.resize(k);
  event_.previous.resize(k);
  for (int i = 0; i < k; ++i) {
    const int who = event_.participants[i];
    const int type = state_.types[who];
    const int s = state_.states[who];
    players_[i] = {type, s, sample_action(strategies_[type], s, rng)};
    event_.actions[i] = players_[i].action;
    event_.previous[i] = s;
  }
  event_.next.clear();
  event_.gains.assign(k, 0.0);
  if (k > 0) {
    table_.reset(k);
    spec_.kernel(players_, profile_, table_);
    const int o = sample_discrete(table_.probs(), rng);
    const auto next = table_.next(o);
    event_.next.assign(next.begin(), next.end());
    for (int i = 0; i < k; ++i) event_.gains[i] = spec_.gain.gain(players_, next, i);
    for (int i = 0; i < k; ++i) move(event_.participants[i], event_.next[i]);
  }

  for (int d = 0; d < spontaneous_draws_; ++d) {
    const int who = uniform_index(rng, n);
    const int s = state_.states[who];
    double u = uniform01(rng) * spontaneous_draws_;
    for (int t = 0; t < spec_.spontaneous.cols(); ++t) {
      if (t == s) continue;
      const double rate = spec_.spontaneous(s, t);
      if (u < rate) {
        move(who, t);
        event_.spontaneous.emplace_back(who, t);
        break;
      }
      u -= rate;
    }
  }
  ++state_.steps;
  return event_;
}

std::pair<MicroState, EventRecord> step(const ModelSpec& spec, const StrategyProfile& strategies,
                                        const MicroState& state, Rng& rng) {
  Simulator sim(spec, strategies, state);
  EventRecord event = sim.step(rng);
  return {sim.state(), std::move(event)};
}

Trajectory simulate(const ModelSpec& spec, const StrategyProfile& strategies,
                    const MicroState& initial, double horizon, std::uint64_t seed,
                    const SimulateOptions& options) {
  if (!(horizon > 0.0)) throw Error("horizon", "horizon must be positive");
  Simulator sim(spec, strategies, initial);
  const long n = sim.population();
  const long steps = static_cast<long>(std::ceil(static_cast<double>(n) * horizon - 1e-9));
  const long stride = options.full_recording ? 1
                      : options.record_stride > 0
                          ? options.record_stride
                          : std::max<long>(1, (n + 99) / 100);
  Rng rng = make_stream(seed, 0);
  Trajectory path;
  path.population = std::to_string(n);
  path.seed = seed;
  auto record = [&] {
    path.push(sim.state().time(), sim.profile());
    if (options.tracked_player >= 0)
      path.tracked_states.push_back(sim.state().states[options.tracked_player]);
  };
  record();
  for (long i = 1; i <= steps; ++i) {
    const EventRecord& event = sim.step(rng);
    if (options.on_event) options.on_event(event);
    if (i % stride == 0 || i == steps) record();
  }
  return path;
}

double truncation_horizon(const ModelSpec& spec, long n, const PayoffOptions& options) {
  const double beta = spec.discount;
  const double c0 = spec.gain.bound;
  if (c0 <= 0.0) return 0.0;
  const double tol = options.tail_tolerance > 0.0 ? options.tail_tolerance : 1e-6 * c0 / beta;
  const double slot_sum = c0 / (1.0 - std::exp(-beta / static_cast<double>(n)));
  return std::max(0.0, std::log(slot_sum / tol) / beta);
}

MicroState tagged_state(const StateSpace& space, int s0, std::span<const long> field_counts) {
  if (space.type_count < 2) throw Error("profile", "tagged analysis needs a model with two types");
  if (s0 < 0 || s0 >= space.state_count()) throw Error("state", "tagged initial state out of range");
  std::vector<long> counts(space.size(), 0);
  counts[space.index(kTaggedType, s0)] = 1;
  for (int s = 0; s < space.state_count(); ++s) counts[space.index(kFieldType, s)] = field_counts[s];
  return make_state(space, counts);
}

std::vector<long> field_counts_on_grid(const Eigen::VectorXd& field, long n) {
  if (n < 2) throw Error("population", "tagged analysis needs N >= 2");
  if (field.minCoeff() < -1e-12 || std::abs(field.sum() - 1.0) > 1e-9)
    throw Error("profile", "field profile is not on the simplex");
  const double others = static_cast<double>(n - 1);
  std::vector<long> counts(field.size());
  for (int s = 0; s < field.size(); ++s) {
    const double exact = field(s) * others;
    counts[s] = std::lround(exact);
    if (std::abs(exact - static_cast<double>(counts[s])) > 1e-6) {
      const auto nearest = nearest_counts(field, n - 1);
      std::string hint;
      for (std::size_t i = 0; i < nearest.size(); ++i)
        hint += (i ? ", " : "") + std::to_string(nearest[i]) + "/" + std::to_string(n - 1);
      throw Error("grid", "field profile is not on the 1/(N-1) grid; nearest grid point is (" +
                              hint + ")");
    }
  }
  return counts;
}

namespace {

struct Sample {
  double gain_sum = 0.0;
  double payoff_sum = 0.0;
};

PayoffEstimate summarize(const std::vector<double>& xs, double horizon) {
  PayoffEstimate e;
  e.replications = static_cast<long>(xs.size());
  e.truncation_horizon = horizon;
  const double n = static_cast<double>(xs.size());
  e.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  e.std_error = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return e;
}

void check_tagged_inputs(const ModelSpec& spec, const StationaryStrategy& u1,
                         const StationaryStrategy& u2, long replications) {
  if (replications < 2) throw Error("replications", "need at least 2 replications for a variance estimate");
  validate_strategy(spec.space, kTaggedType, u1);
  validate_strategy(spec.space, kFieldType, u2);
}

/// Runs the tagged-player replications; `with_payoff` also accumulates the
/// expected-instant-payoff estimator along the same paths.
std::vector<Sample> run_tagged(const ModelSpec& spec, const StationaryStrategy& u1,
                               const StationaryStrategy& u2, int s0, const Eigen::VectorXd& field,
                               long n, long replications, std::uint64_t seed, double horizon,
                               bool with_payoff) {
  const auto field_counts = field_counts_on_grid(field, n);
  const MicroState initial = tagged_state(spec.space, s0, field_counts);
  StrategyProfile strategies(spec.space.type_count, u2);
  strategies[kTaggedType] = u1;
  const long steps = static_cast<long>(std::ceil(static_cast<double>(n) * horizon));
  const double factor = std::exp(-spec.discount / static_cast<double>(n));

  return parallel_map(static_cast<std::size_t>(replications), [&](std::size_t r) {
    Rng rng = make_stream(seed, r);
    Simulator sim(spec, strategies, initial);
    std::map<std::vector<long>, double> cache;
    std::vector<long> key;
    Sample out;
    double discount = 1.0;
    for (long i = 0; i < steps; ++i) {
      if (with_payoff) {
        const int tagged_state = sim.state().states[0];
        key.assign(sim.counts().begin(), sim.counts().end());
        key.push_back(tagged_state);
        auto it = cache.find(key);
        if (it == cache.end())
          it = cache.emplace(key, expected_instant_gain(spec, strategies, sim.profile(), sim.counts(),
                                                        kTaggedType, tagged_state, n))
                   .first;
        out.payoff_sum += discount * it->second;
      }
      sim.step(rng);
      out.gain_sum += discount * sim.last_gain(0);
      discount *= factor;
    }
    return out;
  });
}

}  // namespace

PayoffEstimate estimate_discounted_payoff(const ModelSpec& spec, const StationaryStrategy& u1,
                                          const StationaryStrategy& u2, int s0,
                                          const Eigen::VectorXd& field, long n, long replications,
                                          std::uint64_t seed, const PayoffOptions& options) {
  check_tagged_inputs(spec, u1, u2, replications);
  const double horizon = truncation_horizon(spec, n, options);
  const auto samples = run_tagged(spec, u1, u2, s0, field, n, replications, seed, horizon, false);
  std::vector<double> xs;
  for (const auto& s : samples) xs.push_back(s.gain_sum);
  return summarize(xs, horizon);
}

namespace {

/// Ordered draws without replacement of `remaining` players from `counts`
/// (indexed by profile entry), filling players[positions...].
template <class Visit>
void draw_others(const StateSpace& space, std::vector<long>& counts, long pool,
                 std::vector<Participant>& players, int skip, std::size_t position, double weight,
                 Visit&& visit) {
  if (position == players.size()) {
    visit(weight);
    return;
  }
  if (static_cast<int>(position) == skip) {
    draw_others(space, counts, pool, players, skip, position + 1, weight, visit);
    return;
  }
  for (int x = 0; x < space.size(); ++x) {
    if (counts[x] <= 0) continue;
    const double p = static_cast<double>(counts[x]) / static_cast<double>(pool);
    players[position] = {space.type_of(x), space.state_of(x), -1};
    --counts[x];
    draw_others(space, counts, pool - 1, players, skip, position + 1, weight * p, visit);
    ++counts[x];
  }
}

constexpr double kExactEnumerationLimit = 1e6;
constexpr int kNestedSamples = 4096;

/// Nested-sampling estimate of the gain of a selected player (uniform
/// position, others drawn without replacement) for events too large to enumerate.
double sampled_gain(const ModelSpec& spec, const StrategyProfile& strategies, const Profile& profile,
                    const std::vector<long>& others, int player_type, int player_state, long n, int k) {
  const StateSpace& space = spec.space;
  Rng rng = make_stream(0x6d66, static_cast<std::uint64_t>(k));
  std::vector<Participant> players(k);
  std::vector<long> pool;
  OutcomeTable table;
  double sum = 0.0;
  for (int draw = 0; draw < kNestedSamples; ++draw) {
    pool = others;
    long remaining = n - 1;
    const int p = uniform_index(rng, k);
    for (int i = 0; i < k; ++i) {
      if (i == p) {
        players[i] = {player_type, player_state, -1};
      } else {
        std::vector<double> w(pool.begin(), pool.end());
        const int x = sample_discrete(w, rng);
        --pool[x];
        --remaining;
        players[i] = {space.type_of(x), space.state_of(x), -1};
      }
      players[i].action = sample_action(strategies[players[i].type], players[i].state, rng);
    }
    table.reset(k);
    spec.kernel(players, profile, table);
    const int o = sample_discrete(table.probs(), rng);
    sum += spec.gain.gain(players, table.next(o), p);
  }
  return sum / kNestedSamples;
}

}  // namespace

double expected_instant_gain(const ModelSpec& spec, const StrategyProfile& strategies,
                             const Profile& profile, std::span<const long> counts, int player_type,
                             int player_state, long n) {
  const StateSpace& space = spec.space;
  const Eigen::VectorXd pmf = spec.interaction(profile);
  std::vector<long> others(counts.begin(), counts.end());
  --others[space.index(player_type, player_state)];
  OutcomeTable table;
  double total = 0.0;
  for (int k = 1; k <= spec.interaction.k_max && k <= n; ++k) {
    if (pmf(k) <= 0.0) continue;
    std::vector<Participant> players(k);
    double per_position = 0.0;
    if (detail::event_terms(spec, k, space.size()) > kExactEnumerationLimit) {
      per_position = sampled_gain(spec, strategies, profile, others, player_type, player_state, n, k);
      total += pmf(k) * (static_cast<double>(k) / static_cast<double>(n)) * per_position;
      continue;
    }
    for (int p = 0; p < k; ++p) {
      draw_others(space, others, n - 1, players, p, 0, 1.0, [&](double weight) {
        players[p] = {player_type, player_state, -1};
        detail::expand_event(spec, strategies, players, profile, weight, -1, table,
                             [&](std::span<const Participant> who, std::span<const int> next, double w) {
                               per_position += w * spec.gain.gain(who, next, p);
                             });
      });
    }
    // Selected with probability k/n, at a uniform position.
    total += pmf(k) * (static_cast<double>(k) / static_cast<double>(n)) * per_position /
             static_cast<double>(k);
  }
  return total;
}

EquivalenceReport check_payoff_equivalence(const ModelSpec& spec, const StationaryStrategy& u1,
                                           const StationaryStrategy& u2, int s0,
                                           const Eigen::VectorXd& field, long n,
                                           long replications, std::uint64_t seed,
                                           const PayoffOptions& options) {
  check_tagged_inputs(spec, u1, u2, replications);
  const double horizon = truncation_horizon(spec, n, options);
  const auto samples = run_tagged(spec, u1, u2, s0, field, n, replications, seed, horizon, true);
  std::vector<double> gains, payoffs, diffs;
  for (const auto& s : samples) {
    gains.push_back(s.gain_sum);
    payoffs.push_back(s.payoff_sum);
    diffs.push_back(s.gain_sum - s.payoff_sum);
  }
  EquivalenceReport report;
  report.gain_based = summarize(gains, horizon);
  report.payoff_based = summarize(payoffs, horizon);
  report.difference = report.gain_based.mean - report.payoff_based.mean;
  report.combined_std_error = std::hypot(report.gain_based.std_error, report.payoff_based.std_error);
  report.paired_std_error = summarize(diffs, horizon).std_error;
  report.z_combined =
      report.combined_std_error > 0.0 ? report.difference / report.combined_std_error : 0.0;
  return report;
}

ConvergenceStudy convergence_study(const ModelSpec& spec, const StrategyProfile& strategies,
                                   const Profile& m0, double horizon, std::span<const long> n_list,
                                   std::span<const std::uint64_t> seeds, std::vector<double> epsilons) {
  if (!(horizon > 0.0)) throw Error("horizon", "horizon must be positive");
  const StateSpace& space = spec.space;
  std::vector<std::vector<long>> initial_counts;
  for (long n : n_list) {
    std::vector<long> counts(space.size());
    for (int x = 0; x < space.size(); ++x) {
      const double exact = m0(x) * static_cast<double>(n);
      counts[x] = std::lround(exact);
      if (std::abs(exact - static_cast<double>(counts[x])) > 1e-6) {
        const auto nearest = nearest_counts(m0, n);
        std::string hint;
        for (std::size_t i = 0; i < nearest.size(); ++i)
          hint += (i ? ", " : "") + std::to_string(nearest[i]) + "/" + std::to_string(n);
        throw Error("grid", "m0 is not on the 1/N grid for N = " + std::to_string(n) +
                                "; nearest grid point is (" + hint + ")");
      }
    }
    initial_counts.push_back(std::move(counts));
  }

  meanfield::OdeOptions ode;
  ode.error_estimate = false;
  const auto limit = meanfield::integrate_ode(meanfield::drift_field(spec, strategies), m0, horizon, ode);

  ConvergenceStudy study;
  study.epsilons = epsilons;
  const std::size_t tasks = n_list.size() * seeds.size();
  const auto deviations = parallel_map(tasks, [&](std::size_t task) {
    const std::size_t ni = task / seeds.size();
    const long n = n_list[ni];
    Simulator sim(spec, strategies, make_state(space, initial_counts[ni]));
    Rng rng = make_stream(seeds[task % seeds.size()], 0);
    const long steps = static_cast<long>(std::ceil(static_cast<double>(n) * horizon - 1e-9));
    double sup = (sim.profile() - limit.path.profiles.front()).cwiseAbs().maxCoeff();
    for (long i = 1; i <= steps; ++i) {
      sim.step(rng);
      const double t = static_cast<double>(i) / static_cast<double>(n);
      sup = std::max(sup, (sim.profile() - interpolate(limit.path, t)).cwiseAbs().maxCoeff());
    }
    return sup;
  });
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    ConvergenceSummary summary;
    summary.n = n_list[ni];
    summary.exceedance.assign(epsilons.size(), 0.0);
    for (std::size_t si = 0; si < seeds.size(); ++si) {
      const double d = deviations[ni * seeds.size() + si];
      study.rows.push_back({n_list[ni], seeds[si], d});
      summary.mean_sup_deviation += d / static_cast<double>(seeds.size());
      for (std::size_t e = 0; e < epsilons.size(); ++e)
        if (d > epsilons[e]) summary.exceedance[e] += 1.0 / static_cast<double>(seeds.size());
    }
    study.summary.push_back(std::move(summary));
  }
  return study;
}

}  // namespace mfmdeg::microsim
