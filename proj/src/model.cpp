#include "mfmdeg/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace mfmdeg {

StateSpace StateSpace::uniform(int type_count, std::vector<std::string> states,
                               std::vector<std::vector<std::string>> actions_per_state) {
  StateSpace space;
  space.type_count = type_count;
  space.state_names = std::move(states);
  space.actions.assign(type_count, actions_per_state);
  return space;
}

int StateSpace::max_action_count() const {
  int best = 0;
  for (const auto& per_type : actions)
    for (const auto& set : per_type) best = std::max(best, static_cast<int>(set.size()));
  return best;
}

int StateSpace::find_state(std::string_view name) const {
  for (int s = 0; s < state_count(); ++s)
    if (state_names[s] == name) return s;
  return -1;
}

int StateSpace::find_action(int type, int state, std::string_view name) const {
  const auto& set = actions[type][state];
  for (std::size_t a = 0; a < set.size(); ++a)
    if (set[a] == name) return static_cast<int>(a);
  return -1;
}

InteractionLaw InteractionLaw::constant(Eigen::VectorXd pmf) {
  InteractionLaw law;
  law.k_max = static_cast<int>(pmf.size()) - 1;
  law.constant_pmf.assign(pmf.data(), pmf.data() + pmf.size());
  law.size_pmf = [pmf](const Profile&) { return pmf; };
  return law;
}

InteractionLaw InteractionLaw::fixed(int k) {
  Eigen::VectorXd pmf = Eigen::VectorXd::Zero(k + 1);
  pmf(k) = 1.0;
  return constant(std::move(pmf));
}

void OutcomeTable::add(std::span<const int> next, double prob) {
  if (static_cast<int>(next.size()) != k_)
    throw Error("kernel", "outcome arity does not match the event size");
  next_.insert(next_.end(), next.begin(), next.end());
  prob_.push_back(prob);
}

StationaryStrategy StationaryStrategy::pure(const StateSpace& space, int type,
                                            std::span<const int> actions) {
  StationaryStrategy u;
  for (int s = 0; s < space.state_count(); ++s) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(space.action_count(type, s));
    if (p.size() > 0) p(actions[s]) = 1.0;
    u.policy.push_back(std::move(p));
  }
  return u;
}

StationaryStrategy StationaryStrategy::uniform(const StateSpace& space, int type) {
  StationaryStrategy u;
  for (int s = 0; s < space.state_count(); ++s) {
    const int n = space.action_count(type, s);
    u.policy.push_back(n > 0 ? Eigen::VectorXd::Constant(n, 1.0 / n) : Eigen::VectorXd());
  }
  return u;
}

double StationaryStrategy::distance(const StationaryStrategy& other) const {
  double d = 0.0;
  for (std::size_t s = 0; s < policy.size(); ++s)
    if (policy[s].size() > 0)
      d = std::max(d, (policy[s] - other.policy[s]).cwiseAbs().maxCoeff());
  return d;
}

void validate_strategy(const StateSpace& space, int type, const StationaryStrategy& strategy) {
  if (strategy.state_count() != space.state_count())
    throw Error("strategy", "strategy has " + std::to_string(strategy.state_count()) +
                                " states, model has " + std::to_string(space.state_count()));
  for (int s = 0; s < space.state_count(); ++s) {
    const auto& p = strategy.policy[s];
    const int n = space.action_count(type, s);
    if (p.size() != n)
      throw Error("strategy", "state " + space.state_names[s] + " expects " + std::to_string(n) +
                                  " action probabilities");
    if (n == 0) continue;
    if (p.minCoeff() < 0.0 || std::abs(p.sum() - 1.0) > 1e-9)
      throw Error("strategy", "action probabilities in state " + space.state_names[s] +
                                  " are not a distribution");
  }
}

int sample_action(const StationaryStrategy& strategy, int state, Rng& rng) {
  const auto& p = strategy.policy[state];
  if (p.size() == 0) return -1;
  if (p.size() == 1) return 0;
  return sample_discrete(std::span<const double>(p.data(), p.size()), rng);
}

Profile profile_from_counts(const StateSpace& space, std::span<const long> counts, long n) {
  if (static_cast<int>(counts.size()) != space.size())
    throw Error("counts", "expected " + std::to_string(space.size()) + " counts, got " +
                              std::to_string(counts.size()));
  if (n <= 0) throw Error("counts", "population size must be positive");
  const long total = std::accumulate(counts.begin(), counts.end(), 0L);
  if (total != n)
    throw Error("counts", "counts sum to " + std::to_string(total) + " but N = " + std::to_string(n));
  Profile m(space.size());
  for (int i = 0; i < space.size(); ++i) {
    if (counts[i] < 0) throw Error("counts", "negative count");
    m(i) = static_cast<double>(counts[i]) / static_cast<double>(n);
  }
  return m;
}

bool on_simplex(const Profile& m, double tol) {
  return m.size() > 0 && m.minCoeff() >= -tol && std::abs(m.sum() - 1.0) <= tol;
}

Eigen::VectorXd type_masses(const StateSpace& space, const Profile& m) {
  return m.reshaped(space.state_count(), space.type_count).colwise().sum().transpose();
}

Profile embed_field(const StateSpace& space, const Eigen::VectorXd& field) {
  if (space.type_count < 2) throw Error("profile", "tagged analysis needs a model with two types");
  if (field.size() != space.state_count())
    throw Error("profile", "field profile must have one entry per internal state");
  Profile m = Profile::Zero(space.size());
  m.segment(space.index(kFieldType, 0), space.state_count()) = field;
  return m;
}

std::vector<long> nearest_counts(const Eigen::VectorXd& m, long n) {
  std::vector<long> counts(m.size());
  std::vector<std::pair<double, int>> remainders;
  long assigned = 0;
  for (int i = 0; i < m.size(); ++i) {
    const double exact = std::max(0.0, m(i)) * static_cast<double>(n);
    counts[i] = static_cast<long>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < n; ++j, ++assigned) ++counts[remainders[j % remainders.size()].second];
  for (std::size_t j = remainders.size(); assigned > n; ++j) {
    const int i = remainders[remainders.size() - 1 - (j % remainders.size())].second;
    if (counts[i] > 0) {
      --counts[i];
      --assigned;
    }
  }
  return counts;
}

void for_each_tuple(std::span<const int> radix,
                    const std::function<void(std::span<const int>)>& visit) {
  for (int r : radix)
    if (r <= 0) return;
  std::vector<int> digits(radix.size(), 0);
  while (true) {
    visit(digits);
    std::size_t i = 0;
    for (; i < digits.size(); ++i) {
      if (++digits[i] < radix[i]) break;
      digits[i] = 0;
    }
    if (i == digits.size()) return;
  }
}

namespace {

/// Random point of the simplex over `dim` entries (flat Dirichlet).
Profile random_simplex_point(int dim, Rng& rng) {
  Profile m(dim);
  for (int i = 0; i < dim; ++i) m(i) = -std::log(1.0 - uniform01(rng));
  return m / m.sum();
}

std::vector<Profile> probe_profiles(int dim, int samples, Rng& rng) {
  std::vector<Profile> points;
  for (int i = 0; i < dim; ++i) points.push_back(Profile::Unit(dim, i));
  for (int i = 0; i < samples; ++i) points.push_back(random_simplex_point(dim, rng));
  return points;
}

/// Small perturbation of m that stays on the simplex.
Profile nudge(const Profile& m, Rng& rng) {
  const Profile target = random_simplex_point(static_cast<int>(m.size()), rng);
  return (1.0 - 1e-4) * m + 1e-4 * target;
}

std::map<std::vector<int>, double> as_distribution(const OutcomeTable& table) {
  std::map<std::vector<int>, double> dist;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto next = table.next(i);
    dist[std::vector<int>(next.begin(), next.end())] += table.prob(i);
  }
  return dist;
}

double total_variation(const std::map<std::vector<int>, double>& a,
                       const std::map<std::vector<int>, double>& b) {
  double d = 0.0;
  for (const auto& [key, p] : a) {
    const auto it = b.find(key);
    d += std::abs(p - (it == b.end() ? 0.0 : it->second));
  }
  for (const auto& [key, p] : b)
    if (!a.contains(key)) d += std::abs(p);
  return d;
}

void add_failure(ValidationReport& report, const std::string& what) {
  if (std::find(report.failures.begin(), report.failures.end(), what) == report.failures.end())
    report.failures.push_back(what);
}

}  // namespace

ValidationReport validate_model(const ModelSpec& spec, std::uint64_t seed, int samples) {
  ValidationReport report;
  const StateSpace& space = spec.space;
  if (space.type_count < 1) add_failure(report, "type_count must be at least 1");
  if (space.state_count() < 1) add_failure(report, "internal state set is empty");
  if (static_cast<int>(space.actions.size()) != space.type_count)
    add_failure(report, "action sets missing for some type");
  for (const auto& per_type : space.actions)
    if (static_cast<int>(per_type.size()) != space.state_count())
      add_failure(report, "action sets missing for some internal state");
  if (!(spec.discount > 0.0)) add_failure(report, "discount must be positive");
  if (spec.gain.bound < 0.0) add_failure(report, "gain bound must be nonnegative");
  if (!spec.interaction.size_pmf || !spec.kernel || !spec.gain.gain)
    add_failure(report, "model callables are missing");
  if (spec.has_spontaneous()) {
    if (spec.spontaneous.rows() != space.state_count() || spec.spontaneous.cols() != space.state_count())
      add_failure(report, "spontaneous rate matrix has wrong shape");
    for (int i = 0; i < spec.spontaneous.rows(); ++i)
      for (int j = 0; j < spec.spontaneous.cols(); ++j)
        if (i != j && spec.spontaneous(i, j) < 0.0) add_failure(report, "negative spontaneous rate");
  }
  if (!report.ok()) return report;

  Rng rng = make_stream(seed, 0);
  const auto points = probe_profiles(space.size(), samples, rng);
  const int k_max = spec.interaction.k_max;

  for (const auto& m : points) {
    const Eigen::VectorXd pmf = spec.interaction(m);
    if (pmf.size() != k_max + 1) {
      add_failure(report, "size_pmf has wrong length");
      continue;
    }
    if (pmf.minCoeff() < -1e-15 || std::abs(pmf.sum() - 1.0) > 1e-12)
      add_failure(report, "size_pmf not normalized");
    double mean = 0.0;
    for (int k = 0; k <= k_max; ++k) mean += k * pmf(k);
    if (!(mean > 0.0)) add_failure(report, "mean interaction size is zero");

    const Profile moved = nudge(m, rng);
    const double dist = (moved - m).lpNorm<1>();
    if ((spec.interaction(moved) - pmf).lpNorm<1>() > spec.lipschitz * dist + 1e-12)
      add_failure(report, "size_pmf Lipschitz check failed");
  }

  // Kernel and gain: every (type, state, action) tuple for small events,
  // a random subset otherwise, at a few profiles.
  constexpr std::size_t kEnumerationLimit = 200000;
  OutcomeTable table, moved_table;
  const int per_player = space.size() * std::max(1, space.max_action_count());
  for (int k = 1; k <= k_max; ++k) {
    const double tuples = std::pow(static_cast<double>(per_player), k);
    std::vector<int> radix(k, per_player);
    std::vector<Participant> players(k);
    auto check = [&](std::span<const int> digits, const Profile& m) {
      for (int i = 0; i < k; ++i) {
        const int x = digits[i] % space.size();
        const int a = digits[i] / space.size();
        players[i] = {space.type_of(x), space.state_of(x), -1};
        const int n_actions = space.action_count(players[i].type, players[i].state);
        if (n_actions == 0) {
          if (a != 0) return;
        } else {
          if (a >= n_actions) return;
          players[i].action = a;
        }
      }
      table.reset(k);
      spec.kernel(players, m, table);
      double total = 0.0;
      for (std::size_t o = 0; o < table.size(); ++o) {
        const double p = table.prob(o);
        if (p < 0.0) add_failure(report, "kernel not normalized");
        total += p;
        const auto next = table.next(o);
        for (int s : next)
          if (s < 0 || s >= space.state_count()) add_failure(report, "kernel outcome out of range");
        for (int i = 0; i < k; ++i)
          if (std::abs(spec.gain.gain(players, next, i)) > spec.gain.bound * (1.0 + 1e-12) + 1e-15)
            add_failure(report, "gain bound violated");
      }
      if (std::abs(total - 1.0) > 1e-12) add_failure(report, "kernel not normalized");

      const Profile moved = nudge(m, rng);
      moved_table.reset(k);
      spec.kernel(players, moved, moved_table);
      if (total_variation(as_distribution(table), as_distribution(moved_table)) >
          spec.lipschitz * (moved - m).lpNorm<1>() + 1e-12)
        add_failure(report, "kernel Lipschitz check failed");
    };
    const std::size_t profiles_to_use = std::min<std::size_t>(points.size(), 4 + space.size());
    for (std::size_t p = 0; p < profiles_to_use; ++p) {
      const Profile& m = points[points.size() - 1 - p];
      if (spec.interaction(m)(k) <= 0.0) continue;
      if (tuples <= static_cast<double>(kEnumerationLimit)) {
        for_each_tuple(radix, [&](std::span<const int> digits) { check(digits, m); });
      } else {
        std::vector<int> digits(k);
        for (std::size_t draw = 0; draw < kEnumerationLimit / 10; ++draw) {
          for (auto& d : digits) d = uniform_index(rng, per_player);
          check(digits, m);
        }
      }
    }
  }
  return report;
}

}  // namespace mfmdeg
