#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <stdexcept>

#include "mfmdeg/hawkdove.hpp"
#include "mfmdeg/model.hpp"
#include "mfmdeg/parallel.hpp"
#include "mfmdeg/rng.hpp"
#include "oracles.hpp"

using namespace mfmdeg;

TEST_CASE("state space indexing round-trips") {
  const auto space = StateSpace::uniform(2, {"0", "1", "2"}, {{}, {"D", "H"}, {"D", "H"}});
  CHECK(space.size() == 6);
  for (int x = 0; x < space.size(); ++x) CHECK(space.index(space.type_of(x), space.state_of(x)) == x);
  CHECK(space.find_state("2") == 2);
  CHECK(space.find_state("7") == -1);
  CHECK(space.find_action(1, 1, "H") == 1);
  CHECK(space.find_action(1, 0, "H") == -1);
  CHECK(space.max_action_count() == 2);
}

TEST_CASE("interaction laws") {
  const auto law = InteractionLaw::fixed(2);
  const Eigen::VectorXd pmf = law(Eigen::VectorXd::Ones(2) / 2);
  CHECK(law.k_max == 2);
  CHECK(pmf.size() == 3);
  CHECK(pmf(2) == 1.0);
  CHECK(law.is_constant());
  Eigen::VectorXd mixed(4);
  mixed << 0.0, 0.2, 0.5, 0.3;
  CHECK(InteractionLaw::constant(mixed).k_max == 3);
}

TEST_CASE("outcome table stores rows") {
  OutcomeTable table;
  table.reset(2);
  table.add({1, 0}, 0.25);
  table.add({0, 1}, 0.75);
  REQUIRE(table.size() == 2);
  CHECK(table.next(1)[1] == 1);
  CHECK(table.prob(0) == 0.25);
  CHECK_THROWS_AS(table.add({1, 0, 1}, 0.1), Error);
}

TEST_CASE("built Hawk-Dove models validate") {
  for (int levels : {2, 3}) {
    hawkdove::HawkDoveParams p;
    p.v_bar = 1.5;
    p.levels = levels;
    p.mu1 = 0.3;
    p.mu2 = 0.2;
    const auto report = validate_model(hawkdove::build_model(p));
    CHECK(report.ok());
  }
  CHECK(validate_model(oracle::quadrature_model(1.0)).ok());
  CHECK(validate_model(oracle::rock_paper_scissors()).ok());
}

TEST_CASE("validation catches broken kernels and gains") {
  auto spec = oracle::constant_gain_model(1.0);
  spec.kernel = [](std::span<const Participant>, const Profile&, OutcomeTable& t) { t.add({0, 0}, 0.9); };
  auto report = validate_model(spec);
  REQUIRE_FALSE(report.ok());
  CHECK(report.failures.front().find("kernel not normalized") != std::string::npos);

  spec = oracle::constant_gain_model(2.0);
  spec.gain.bound = 1.0;
  report = validate_model(spec);
  REQUIRE_FALSE(report.ok());
  bool found = false;
  for (const auto& f : report.failures) found |= f.find("gain bound violated") != std::string::npos;
  CHECK(found);
}

TEST_CASE("strategies") {
  const auto space = StateSpace::uniform(2, {"1", "2"}, {{"D"}, {"D", "H"}});
  const std::vector<int> hawk_top{0, 1};
  const auto pure = StationaryStrategy::pure(space, 1, hawk_top);
  CHECK(pure.prob(1, 1) == 1.0);
  const auto uniform = StationaryStrategy::uniform(space, 1);
  CHECK(uniform.prob(1, 0) == 0.5);
  CHECK(pure.distance(uniform) == doctest::Approx(0.5));
  validate_strategy(space, 1, uniform);
  auto bad = uniform;
  bad.policy[1](0) = 0.7;
  CHECK_THROWS_AS(validate_strategy(space, 1, bad), Error);
  bad.policy.pop_back();
  CHECK_THROWS_AS(validate_strategy(space, 1, bad), Error);
}

TEST_CASE("profiles from counts") {
  const auto space = StateSpace::uniform(2, {"1", "2"}, {{"D"}, {"D", "H"}});
  const std::vector<long> counts{0, 1, 3, 6};
  const Profile m = profile_from_counts(space, counts, 10);
  CHECK(m(3) == doctest::Approx(0.6));
  CHECK(on_simplex(m));
  CHECK(type_masses(space, m)(1) == doctest::Approx(0.9));
  try {
    profile_from_counts(space, counts, 11);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "counts sum to 10 but N = 11");
  }
  Eigen::VectorXd field(2);
  field << 0.25, 0.75;
  const Profile full = embed_field(space, field);
  CHECK(full(0) == 0.0);
  CHECK(full(3) == 0.75);
}

TEST_CASE("nearest counts: largest remainder rounding") {
  Rng rng = make_stream(5, 0);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd m(4);
    for (int i = 0; i < 4; ++i) m(i) = uniform01(rng);
    m /= m.sum();
    const long n = 1 + uniform_index(rng, 500);
    const auto counts = nearest_counts(m, n);
    long total = 0;
    for (int i = 0; i < 4; ++i) {
      total += counts[i];
      CHECK(std::abs(static_cast<double>(counts[i]) - m(i) * n) < 1.0);
    }
    CHECK(total == n);
  }
}

TEST_CASE("mixed-radix enumeration visits every tuple once") {
  const std::vector<int> radix{2, 3, 4};
  std::set<std::vector<int>> seen;
  for_each_tuple(radix, [&](std::span<const int> t) { seen.insert({t.begin(), t.end()}); });
  CHECK(seen.size() == 24);
}

TEST_CASE("random streams are reproducible and distinct") {
  Rng a = make_stream(42, 3), b = make_stream(42, 3), c = make_stream(42, 4), d = make_stream(43, 3);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
  Rng e = make_stream(1, 0);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(e);
    CHECK((u >= 0.0 && u < 1.0));
  }
}

TEST_CASE("sample_discrete matches its weights") {
  Rng rng = make_stream(9, 0);
  const std::vector<double> w{1.0, 0.0, 3.0};
  std::vector<int> hits(3, 0);
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++hits[sample_discrete(w, rng)];
  CHECK(hits[1] == 0);
  // Binomial(n, 1/4): 5 standard deviations is about 433.
  CHECK(std::abs(hits[0] - n / 4) < 433);
}

TEST_CASE("parallel_map keeps order and rethrows") {
  const auto squares = parallel_map(100, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < 100; ++i) CHECK(squares[i] == static_cast<int>(i * i));
  CHECK_THROWS_AS(parallel_map(10,
                               [](std::size_t i) -> int {
                                 if (i == 7) throw std::runtime_error("boom");
                                 return 0;
                               }),
                  std::runtime_error);
}

TEST_CASE("sample_action follows the policy") {
  const auto space = StateSpace::uniform(2, {"1", "2"}, {{"D"}, {"D", "H"}});
  auto u = StationaryStrategy::uniform(space, 1);
  u.policy[1] = Eigen::Vector2d(0.2, 0.8);
  Rng rng = make_stream(2, 0);
  int hawks = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) hawks += sample_action(u, 1, rng);
  // Binomial(n, 0.8) standard deviation is about 57.
  CHECK(std::abs(hawks - 16000) < 285);
  CHECK(sample_action(u, 0, rng) == 0);
}
