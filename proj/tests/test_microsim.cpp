#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mfmdeg/hawkdove.hpp"
#include "mfmdeg/meanfield.hpp"
#include "mfmdeg/microsim.hpp"
#include "oracles.hpp"

using namespace mfmdeg;
using namespace mfmdeg::microsim;

namespace {

ModelSpec hd(double v_bar = 1.5, double c = 1.0, int levels = 2) {
  hawkdove::HawkDoveParams p;
  p.v_bar = v_bar;
  p.c = c;
  p.levels = levels;
  p.mu1 = 0.4;
  p.mu2 = 0.3;
  return hawkdove::build_model(p);
}

/// Enumerates every ordered pair of distinct players and every action pair.
double brute_force_gain(const ModelSpec& spec, const StrategyProfile& u, const MicroState& x, int who) {
  const int n = x.size();
  double total = 0.0;
  OutcomeTable table;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j || (i != who && j != who)) continue;
      const std::size_t self = i == who ? 0 : 1;
      const auto& pi = u[x.types[i]].policy[x.states[i]];
      const auto& pj = u[x.types[j]].policy[x.states[j]];
      const int ni = std::max<int>(1, pi.size()), nj = std::max<int>(1, pj.size());
      for (int a = 0; a < ni; ++a)
        for (int b = 0; b < nj; ++b) {
          const double w = (pi.size() ? pi(a) : 1.0) * (pj.size() ? pj(b) : 1.0);
          if (w == 0.0) continue;
          const std::vector<Participant> ps{{x.types[i], x.states[i], pi.size() ? a : -1},
                                            {x.types[j], x.states[j], pj.size() ? b : -1}};
          table.reset(2);
          spec.kernel(ps, Profile(), table);
          for (std::size_t r = 0; r < table.size(); ++r)
            total += w * table.prob(r) * spec.gain.gain(ps, table.next(r), self) /
                     (static_cast<double>(n) * (n - 1));
        }
    }
  return total;
}

}  // namespace

TEST_CASE("simulator keeps counts and profile consistent") {
  const auto spec = hd(1.5, 1.0, 3);
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0.5, 0.8);
  const std::vector<long> counts{1, 0, 0, 10, 20, 19};
  Simulator sim(spec, StrategyProfile(2, u), make_state(spec.space, counts));
  Rng rng = make_stream(1, 0);
  for (int i = 0; i < 2000; ++i) {
    sim.step(rng);
    const auto recount = counts_of(spec.space, sim.state());
    CHECK(std::equal(recount.begin(), recount.end(), sim.counts().begin()));
    const Profile m = profile_from_counts(spec.space, recount, 50);
    CHECK((m - sim.profile()).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(sim.state().steps == 2000);
  CHECK(sim.state().time() == doctest::Approx(40.0));
  // Types never change.
  CHECK(sim.counts()[0] + sim.counts()[1] + sim.counts()[2] == 1);
}

TEST_CASE("pure step agrees with the incremental simulator") {
  const auto spec = hd(1.5, 1.0, 3);
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0.3, 0.6);
  const StrategyProfile profile(2, u);
  const MicroState x0 = make_state(spec.space, std::vector<long>{0, 0, 0, 5, 5, 10});
  Simulator sim(spec, profile, x0);
  Rng a = make_stream(7, 0), b = make_stream(7, 0);
  MicroState x = x0;
  for (int i = 0; i < 300; ++i) {
    sim.step(a);
    auto [next, event] = step(spec, profile, x, b);
    x = std::move(next);
    REQUIRE(x.states == sim.state().states);
    CHECK(event.participants == sim.last_event().participants);
  }
}

TEST_CASE("simulate is reproducible per seed") {
  const auto spec = hd();
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0.0, 0.5);
  const MicroState x0 = make_state(spec.space, std::vector<long>{0, 0, 100, 100});
  const auto p1 = simulate(spec, StrategyProfile(2, u), x0, 2.0, 5);
  const auto p2 = simulate(spec, StrategyProfile(2, u), x0, 2.0, 5);
  const auto p3 = simulate(spec, StrategyProfile(2, u), x0, 2.0, 6);
  REQUIRE(p1.size() == p2.size());
  bool differs = false;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1.profiles[i] == p2.profiles[i]);
    differs |= p1.profiles[i] != p3.profiles[i];
  }
  CHECK(differs);
  CHECK(p1.population == "200");
  CHECK(p1.times.back() == doctest::Approx(2.0));
}

TEST_CASE("mean one-step change matches the drift") {
  const auto spec = hd(1.5, 1.0, 3);
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0.4, 0.7);
  const long n = 1000;
  const std::vector<long> counts{0, 0, 0, 200, 300, 500};
  const MicroState x0 = make_state(spec.space, counts);
  const Profile m = profile_from_counts(spec.space, counts, n);
  const Eigen::VectorXd f = meanfield::drift(spec, StrategyProfile(2, u), m);
  const long reps = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m.size()), sq = sum;
  Rng rng = make_stream(13, 0);
  for (long r = 0; r < reps; ++r) {
    const auto next = step(spec, StrategyProfile(2, u), x0, rng).first;
    const auto c = counts_of(spec.space, next);
    for (int i = 0; i < m.size(); ++i) {
      const double d = static_cast<double>(c[i] - counts[i]);
      sum(i) += d;
      sq(i) += d * d;
    }
  }
  for (int i = 3; i < 6; ++i) {
    const double mean = sum(i) / reps;
    const double se = std::sqrt((sq(i) / reps - mean * mean) / reps);
    CHECK(std::abs(mean - f(i)) < 4 * se + 0.01);
  }
}

TEST_CASE("tagged player occupies level 2 about two thirds of the time") {
  const auto spec = hd();
  const auto hawk = hawkdove::strategy(spec.space, kFieldType, 0.0, 1.0);
  const long n = 999;
  const std::vector<long> field{333, 666};
  const MicroState x0 = tagged_state(spec.space, 1, field);
  SimulateOptions opts;
  opts.record_stride = n / 4;
  opts.tracked_player = 0;
  const auto path = simulate(spec, StrategyProfile(2, hawk), x0, 2000.0, 17, opts);
  REQUIRE(path.tracked_states.size() == path.size());
  double top = 0;
  for (int s : path.tracked_states) top += s == 1;
  CHECK(top / path.tracked_states.size() == doctest::Approx(2.0 / 3.0).epsilon(0.05 / (2.0 / 3.0)));
}

TEST_CASE("truncation horizon satisfies its tail inequality") {
  const auto spec = hd();
  for (long n : {10L, 100L, 1000L}) {
    const double t = truncation_horizon(spec, n);
    const double tail = std::exp(-spec.discount * t) * spec.gain.bound /
                        (1.0 - std::exp(-spec.discount / static_cast<double>(n)));
    CHECK(tail <= 1e-6 * spec.gain.bound / spec.discount * (1 + 1e-9));
  }
}

TEST_CASE("field counts must lie on the tagged grid") {
  CHECK(field_counts_on_grid(Eigen::Vector2d(1.0 / 3.0, 2.0 / 3.0), 100) == std::vector<long>{33, 66});
  try {
    field_counts_on_grid(Eigen::Vector2d(0.5, 0.5), 100);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "grid");
    CHECK(std::string(e.what()).find("49/99") != std::string::npos);
  }
}

TEST_CASE("constant gain payoff equals the discounted participation sum") {
  const double g = 0.7;
  auto spec = oracle::constant_gain_model(g);
  spec.discount = 1.3;
  const auto u = StationaryStrategy::uniform(spec.space, 1);
  const long n = 20;
  const auto est = estimate_discounted_payoff(spec, u, u, 0, Eigen::VectorXd::Ones(1), n, 4000, 3);
  const long steps = static_cast<long>(std::ceil(n * est.truncation_horizon));
  double expect = 0;
  for (long i = 0; i < steps; ++i) expect += std::exp(-spec.discount * i / n);
  expect *= g * 2.0 / n;
  CHECK(std::abs(est.mean - expect) < 5 * est.std_error);
  CHECK(est.mean == doctest::Approx(g * 2.0 / spec.discount).epsilon(0.05));
}

TEST_CASE("expected instant gain matches brute-force enumeration") {
  for (int levels : {2, 3}) {
    const auto spec = hd(1.3, 0.9, levels);
    const int ns = spec.space.state_count();
    Rng rng = make_stream(31, levels);
    for (int trial = 0; trial < 30; ++trial) {
      const auto u1 = hawkdove::strategy(spec.space, kTaggedType, uniform01(rng), uniform01(rng));
      const auto u2 = hawkdove::strategy(spec.space, kFieldType, uniform01(rng), uniform01(rng));
      StrategyProfile profile(2, u2);
      profile[kTaggedType] = u1;
      std::vector<long> field(ns, 0);
      for (int i = 0; i < 4; ++i) ++field[uniform_index(rng, ns)];
      const int s0 = static_cast<int>(uniform_index(rng, ns));
      const MicroState x = tagged_state(spec.space, s0, field);
      const auto counts = counts_of(spec.space, x);
      const Profile m = profile_from_counts(spec.space, counts, 5);
      const double lib = expected_instant_gain(spec, profile, m, counts, kTaggedType, s0, 5);
      CHECK(lib == doctest::Approx(brute_force_gain(spec, profile, x, 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gain-based and payoff-based estimators agree") {
  const auto spec = hd(1.5, 1.0, 2);
  const auto field = hawkdove::strategy(spec.space, kFieldType, 0.0, 0.6);
  const auto tagged = hawkdove::strategy(spec.space, kTaggedType, 0.0, 0.3);
  const auto rep = check_payoff_equivalence(spec, tagged, field, 1, Eigen::Vector2d(0.5, 0.5), 11, 400, 9);
  CHECK(std::abs(rep.difference) < 4 * rep.paired_std_error);
  CHECK(std::abs(rep.z_combined) < 4);
}

TEST_CASE("convergence study requires m0 on every grid") {
  const auto spec = hd();
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0.0, 1.0);
  const Profile m0 = embed_field(spec.space, Eigen::Vector2d(2.0 / 3.0, 1.0 / 3.0));
  const std::vector<long> ns{100};
  const std::vector<std::uint64_t> seeds{1};
  CHECK_THROWS_AS(convergence_study(spec, StrategyProfile(2, u), m0, 1.0, ns, seeds), Error);
  const Profile ok = embed_field(spec.space, Eigen::Vector2d(1.0, 0.0));
  const std::vector<long> two{100, 400};
  const auto study = convergence_study(spec, StrategyProfile(2, u), ok, 1.0, two, seeds);
  CHECK(study.rows.size() == 2);
  CHECK(study.summary.size() == 2);
  CHECK(study.summary[0].exceedance.size() == 4);
}
