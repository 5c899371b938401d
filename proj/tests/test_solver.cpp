#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mfmdeg/hawkdove.hpp"
#include "mfmdeg/meanfield.hpp"
#include "mfmdeg/solver.hpp"
#include "oracles.hpp"

using namespace mfmdeg;
using namespace mfmdeg::solver;

namespace {

ModelSpec hd(double v_bar, double c, int levels = 2, double beta = 1.0) {
  hawkdove::HawkDoveParams p;
  p.v_bar = v_bar;
  p.c = c;
  p.levels = levels;
  p.beta = beta;
  p.mu1 = 0.5;
  p.mu2 = 0.25;
  return hawkdove::build_model(p);
}

SolveOptions fast() {
  SolveOptions o;
  o.value.step = 1e-2;
  return o;
}

double hawk2(const StationaryStrategy& u) { return u.prob(1, hawkdove::kHawk); }

const Eigen::VectorXd half = Eigen::Vector2d(0.5, 0.5);
const Eigen::VectorXd rest = Eigen::Vector2d(1.0 / 3.0, 2.0 / 3.0);

}  // namespace

TEST_CASE("grid sizes, purity and errors") {
  const auto two = hd(1, 1);
  const StrategyGrid g2(two.space, kTaggedType, 0.05);
  CHECK(g2.size() == 21);
  CHECK(g2.is_pure(0));
  CHECK(g2.is_pure(20));
  CHECK_FALSE(g2.is_pure(7));
  CHECK(hawk2(g2.at(0)) == 0.0);
  for (std::size_t i = 0; i < g2.size(); ++i) validate_strategy(two.space, kTaggedType, g2.at(i));
  CHECK(g2.find(hawkdove::strategy(two.space, kTaggedType, 0, 0.35), 1e-9) == std::size_t{7});
  CHECK_FALSE(g2.find(hawkdove::strategy(two.space, kTaggedType, 0, 0.33), 1e-6).has_value());

  const auto three = hd(1, 1, 3);
  CHECK(StrategyGrid(three.space, kTaggedType, 0.25).size() == 25);
  CHECK(pure_strategies(three.space, kTaggedType).size() == 4);

  CHECK_THROWS_WITH(StrategyGrid(two.space, kTaggedType, 0.0), "grid delta must lie in (0, 1]");
  CHECK_THROWS_WITH(StrategyGrid(two.space, kTaggedType, 0.3), "1/delta must be an integer");
  try {
    StrategyGrid(three.space, kTaggedType, 0.01, 1000);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == "grid_cap");
    CHECK(std::string(e.what()).find("coarser delta") != std::string::npos);
  }
}

TEST_CASE("best response is exhaustive over the grid") {
  const auto spec = hd(1.2, 0.9, 3);
  const StrategyGrid grid(spec.space, kTaggedType, 0.25);
  const auto field = hawkdove::strategy(spec.space, kFieldType, 0.3, 0.6);
  const Eigen::VectorXd m0 = Eigen::Vector3d(0.2, 0.3, 0.5);
  const auto br = best_response(spec, field, 2, m0, grid, fast());
  REQUIRE(br.values.size() == grid.size());
  for (double v : br.values) CHECK(br.value >= v);
  CHECK(br.values[br.index] == br.value);
  // Independent evaluation of two grid points.
  for (std::size_t i : {std::size_t{3}, std::size_t{17}}) {
    auto opts = fast().value;
    const auto table = meanfield::tagged_value(spec, grid.at(i), field, m0, 1e-6, opts);
    CHECK(table.values(2) == doctest::Approx(br.values[i]).epsilon(1e-12));
  }
  CHECK(std::find(br.ties.begin(), br.ties.end(), br.index) != br.ties.end());
}

TEST_CASE("best response examples") {
  const auto eq = hd(1.5, 1.0);
  const StrategyGrid grid(eq.space, kTaggedType, 0.05);
  const auto dh = hawkdove::strategy(eq.space, kFieldType, 0, 1);
  CHECK(hawk2(best_response(eq, dh, 1, rest, grid, fast()).strategy) == 1.0);
  const auto dove = hd(0.5, 1.0);
  CHECK(hawk2(best_response(dove, dh, 1, rest, grid, fast()).strategy) == 0.0);
  CHECK(hawkdove::beta2({0.5, 1.0}, 1.0, 2.0 / 3.0) < 0);
  // Single-action model: the grid has one point.
  const auto one = oracle::quadrature_model(1.0);
  const StrategyGrid trivial(one.space, kTaggedType, 0.05);
  CHECK(trivial.size() == 1);
  CHECK(best_response(one, StationaryStrategy::uniform(one.space, 1), 0, Eigen::Vector2d(1, 0), trivial)
            .index == 0);
}

TEST_CASE("pure shortcut equals the full grid on tagged-linear Hawk-Dove") {
  Rng rng = make_stream(77, 0);
  SolveOptions pure = fast();
  pure.pure_shortcut = true;
  for (int i = 0; i < 20; ++i) {
    const int levels = 2 + i % 2;
    const auto spec = hd(0.2 + 2 * uniform01(rng), 0.2 + 2 * uniform01(rng), levels, 0.5 + uniform01(rng));
    const StrategyGrid grid(spec.space, kTaggedType, 0.25);
    const auto field = hawkdove::strategy(spec.space, kFieldType, uniform01(rng), uniform01(rng));
    Eigen::VectorXd m0 = Eigen::VectorXd::Zero(levels);
    for (int s = 0; s < levels; ++s) m0(s) = 0.05 + uniform01(rng);
    m0 /= m0.sum();
    const int s0 = static_cast<int>(uniform_index(rng, levels));
    const auto full = best_response(spec, field, s0, m0, grid, fast());
    const auto shortcut = best_response(spec, field, s0, m0, grid, pure);
    CHECK(grid.is_pure(shortcut.index));
    CHECK(shortcut.value == doctest::Approx(full.value).epsilon(1e-9));
  }
}

TEST_CASE("constant payoff game: every strategy ties") {
  auto spec = oracle::constant_gain_model(0.4);
  const StrategyGrid grid(spec.space, kTaggedType, 0.1);
  const Eigen::VectorXd m0 = Eigen::VectorXd::Ones(1);
  const auto start = grid.at(4);
  const auto cert = fixed_point_iterate(spec, start, 0, m0, grid, {}, fast());
  CHECK(cert.epsilon == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cert.epsilon >= -1e-9);
  CHECK(cert.tie_class.size() == grid.size());
  CHECK(cert.value == doctest::Approx(2 * 0.4).epsilon(1e-5));
  const auto team = optimize_team(spec, 0, m0, grid, fast());
  CHECK(team.kind == "team-optimal");
  CHECK(team.epsilon == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fixed point from both corners and grid uniqueness") {
  const auto spec = hd(1.5, 1.0);
  const StrategyGrid grid(spec.space, kTaggedType, 0.05);
  for (double start : {0.0, 1.0}) {
    const auto cert =
        fixed_point_iterate(spec, hawkdove::strategy(spec.space, kFieldType, 0, start), 1, half, grid, {}, fast());
    CHECK(cert.converged);
    CHECK(hawk2(cert.strategy) == 1.0);
    CHECK(cert.epsilon < 1e-3);
    CHECK(cert.epsilon >= -1e-9);
  }
  int equilibria = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto cert = certify(spec, grid.at(i), 1, half, grid, fast());
    CHECK(cert.epsilon >= -1e-9);
    if (cert.epsilon < 1e-3) {
      ++equilibria;
      CHECK(i == grid.size() - 1);
    }
  }
  CHECK(equilibria == 1);
}

TEST_CASE("costly fights: the team is more Dove-ish than the equilibrium") {
  const auto spec = hd(1.0, 2.0);
  const StrategyGrid grid(spec.space, kTaggedType, 0.05);
  const auto eq = fixed_point_iterate(spec, hawkdove::strategy(spec.space, kFieldType, 0, 0.5), 1, half, grid,
                                      {}, fast());
  const auto team = optimize_team(spec, 1, half, grid, fast());
  CHECK(hawk2(team.strategy) <= hawk2(eq.strategy));
  CHECK(team.value >= eq.value - 1e-12);
  CHECK(team.epsilon == 0.0);

  const StrategyGrid coarse(spec.space, kTaggedType, 0.25);
  CHECK(optimize_team(spec, 1, half, coarse, fast()).value <= team.value + 1e-12);
}

TEST_CASE("finite-N gap: degenerate model") {
  const auto spec = oracle::constant_gain_model(0.0);
  const auto u = StationaryStrategy::uniform(spec.space, kTaggedType);
  const std::vector<long> ns{10, 40};
  const auto rows = finite_N_gap(spec, u, 0, Eigen::VectorXd::Ones(1), ns, 20, 1);
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.epsilon == 0.0);
    CHECK(r.value == 0.0);
    CHECK(r.ci_low <= 0.0);
    CHECK(r.ci_high >= 0.0);
  }
}

TEST_CASE("finite-N gap: Hawk-Dove equilibrium is not significantly beaten") {
  const auto spec = hd(1.5, 1.0);
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0, 1);
  const std::vector<long> ns{100, 500};
  const auto rows = finite_N_gap(spec, u, 1, half, ns, 300, 5, {}, fast());
  REQUIRE(rows.size() == 2);
  for (const auto& r : rows) {
    CHECK(r.ci_low <= 0.0);
    CHECK(std::abs(r.value - r.limit) < 4 * r.value_se + 0.02);
  }
  CHECK(rows[0].field_m0(1) == doctest::Approx(49.0 / 99.0).epsilon(1e-12));
}

TEST_CASE("symmetric values agree with the tagged value of u against itself") {
  const auto spec = hd(1.5, 1.0);
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0, 0.4);
  const auto v = symmetric_values(spec, u, half, fast());
  const auto table = meanfield::tagged_value(spec, u, u, half, 1e-6, fast().value);
  CHECK((v - table.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("finite-N value approaches the limit within an O(1/N) envelope") {
  const auto spec = hd(1.5, 1.0);
  const auto u = hawkdove::strategy(spec.space, kFieldType, 0, 1);
  const std::vector<long> ns{50, 200, 1000};
  const auto rows = finite_N_gap(spec, u, 1, rest, ns, 1000, 11, {u}, fast());
  for (const auto& r : rows) CHECK(std::abs(r.value - r.limit) <= 3.5 * r.value_se + 2.0 / r.n);
}
