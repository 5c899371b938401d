#include "mfmdeg/hawkdove.hpp"

#include <cmath>
#include <limits>

#include "mfmdeg/meanfield.hpp"

namespace mfmdeg::hawkdove {

void HawkDoveParams::validate() const {
  if (!(v_bar > 0.0)) throw Error("params", "v_bar must be positive");
  if (!(c > 0.0)) throw Error("params", "c must be positive");
  if (!(beta > 0.0)) throw Error("params", "beta must be positive");
  if (!(mu1 >= 0.0) || !(mu2 >= 0.0)) throw Error("params", "mu1 and mu2 must be non-negative");
  if (levels != 2 && levels != 3) throw Error("params", "levels must be 2 or 3");
}

namespace {

double gain_of(double v_bar, double c, int own_action, int other_action) {
  if (own_action == kDove && other_action == kDove) return v_bar / 2.0;
  if (own_action == kHawk && other_action == kHawk) return v_bar / 2.0 - c;
  return own_action == kHawk ? v_bar : 0.0;
}

// States 0 = level 1, 1 = level 2. Level 1 always plays Dove.
void two_level_kernel(std::span<const Participant> p, OutcomeTable& table) {
  const int s0 = p[0].state, s1 = p[1].state;
  const int a0 = s0 == 0 ? kDove : p[0].action;
  const int a1 = s1 == 0 ? kDove : p[1].action;
  if (s0 == 0 && s1 == 0) {
    table.add({1, 0}, 0.5);
    table.add({0, 1}, 0.5);
  } else if (s0 == 1 && s1 == 1) {
    if (a0 == a1) {
      table.add({1, 1}, 0.5);
      table.add({0, 1}, 0.25);
      table.add({1, 0}, 0.25);
    } else if (a0 == kDove) {
      table.add({0, 1}, 0.5);
      table.add({1, 1}, 0.5);
    } else {
      table.add({1, 0}, 0.5);
      table.add({1, 1}, 0.5);
    }
  } else {
    const bool low_first = s0 == 0;
    const int high_action = low_first ? a1 : a0;
    auto pair = [&](int low, int high) {
      return low_first ? std::array<int, 2>{low, high} : std::array<int, 2>{high, low};
    };
    const auto stay = pair(0, 1);
    if (high_action == kDove) {
      const auto swapped = pair(1, 0);
      table.add(swapped, 0.5);
      table.add(stay, 0.5);
    } else {
      const auto up = pair(1, 1);
      table.add(up, 0.25);
      table.add(stay, 0.75);
    }
  }
}

// States 0, 1, 2; level 0 has no action.
void three_level_kernel(std::span<const Participant> p, OutcomeTable& table) {
  auto up = [](int s) { return std::min(s + 1, 2); };
  auto down = [](int s) { return std::max(s - 1, 0); };
  const int s0 = p[0].state, s1 = p[1].state;
  if (s0 == 0 && s1 == 0) {
    table.add({0, 0}, 1.0);
  } else if (s0 == 0) {
    table.add({0, up(s1)}, 1.0);
  } else if (s1 == 0) {
    table.add({up(s0), 0}, 1.0);
  } else if (p[0].action == p[1].action) {
    table.add({up(s0), down(s1)}, 0.5);
    table.add({down(s0), up(s1)}, 0.5);
  } else if (p[0].action == kHawk) {
    table.add({up(s0), down(s1)}, 1.0);
  } else {
    table.add({down(s0), up(s1)}, 1.0);
  }
}

}  // namespace

ModelSpec build_model(const HawkDoveParams& params) {
  params.validate();
  ModelSpec spec;
  const bool two = params.levels == 2;
  spec.name = two ? "hawk-dove-2" : "hawk-dove-3";
  if (two)
    spec.space = StateSpace::uniform(2, {"1", "2"}, {{"D"}, {"D", "H"}});
  else
    spec.space = StateSpace::uniform(2, {"0", "1", "2"}, {{}, {"D", "H"}, {"D", "H"}});
  spec.interaction = InteractionLaw::fixed(2);
  spec.discount = params.beta;
  spec.lipschitz = 1.0;
  if (two)
    spec.kernel = [](std::span<const Participant> p, const Profile&, OutcomeTable& t) {
      two_level_kernel(p, t);
    };
  else
    spec.kernel = [](std::span<const Participant> p, const Profile&, OutcomeTable& t) {
      three_level_kernel(p, t);
    };

  const double v_bar = params.v_bar, c = params.c;
  spec.gain.bound = std::max(v_bar, std::abs(v_bar / 2.0 - c));
  spec.gain.gain = [two, v_bar, c](std::span<const Participant> p, std::span<const int>,
                                   std::size_t self) {
    const Participant& me = p[self];
    const Participant& other = p[1 - self];
    if (two) {
      const int mine = me.state == 0 ? kDove : me.action;
      const int theirs = other.state == 0 ? kDove : other.action;
      return gain_of(v_bar, c, mine, theirs);
    }
    if (me.state == 0) return 0.0;
    if (other.state == 0) return v_bar;
    return gain_of(v_bar, c, me.action, other.action);
  };

  if (!two) {
    spec.spontaneous = Eigen::MatrixXd::Zero(3, 3);
    spec.spontaneous(0, 1) = params.mu1;
    spec.spontaneous(0, 2) = params.mu2;
  }
  return spec;
}

int level_index(const StateSpace& space, int level) {
  const int index = space.find_state(std::to_string(level));
  if (index < 0) throw Error("state", "model has no energy level " + std::to_string(level));
  return index;
}

StationaryStrategy strategy(const StateSpace& space, int type, double hawk_at_1, double hawk_at_2) {
  StationaryStrategy u = StationaryStrategy::pure(space, type, std::vector<int>(space.state_count(), 0));
  const double hawk[] = {hawk_at_1, hawk_at_2};
  for (int level = 1; level <= 2; ++level) {
    const int s = level_index(space, level);
    if (space.action_count(type, s) < 2) continue;
    const double h = hawk[level - 1];
    if (!(h >= 0.0 && h <= 1.0)) throw Error("strategy", "Hawk probability must lie in [0, 1]");
    u.policy[s] = Eigen::Vector2d(1.0 - h, h);
  }
  return u;
}

ClosedFormConstants closed_form_constants(double u2, double m0) {
  if (!(u2 >= 0.0 && u2 <= 1.0)) throw Error("domain", "u2 must lie in [0, 1]");
  if (!(m0 >= 0.0 && m0 <= 1.0)) throw Error("domain", "m0 must lie in [0, 1]");
  ClosedFormConstants k;
  const double root = std::sqrt(2.0 + u2 * u2 / 4.0);
  k.lambda = root;
  k.gamma_minus = 2.0 / (2.0 - u2 / 2.0 + root);
  if (u2 == 1.0) {
    k.fully_aggressive = true;
    k.c1 = 1.0 - 1.5 * m0;
    k.gamma_plus = std::numeric_limits<double>::infinity();
    return k;
  }
  k.gamma_plus = (2.0 - u2 / 2.0 + root) / (1.0 - u2);
  k.w0 = m0 == k.gamma_minus ? -std::numeric_limits<double>::infinity()
                             : (m0 - k.gamma_plus) / (m0 - k.gamma_minus);
  return k;
}

double closed_form_m2(double u2, double m0, double t) {
  const ClosedFormConstants k = closed_form_constants(u2, m0);
  if (!(t >= 0.0)) throw Error("domain", "t must be non-negative");
  if (k.fully_aggressive) return 2.0 / 3.0 * (1.0 - k.c1 * std::exp(-1.5 * t));
  // gamma- + (m0 - gamma-)(gamma+ - gamma-) e / ((m0 - gamma-) e + gamma+ - m0), divided through by gamma+.
  const double inv_plus = (1.0 - u2) / (2.0 - u2 / 2.0 + k.lambda);
  const double d = m0 - k.gamma_minus;
  const double e = std::exp(-k.lambda * t);
  return k.gamma_minus + d * (1.0 - k.gamma_minus * inv_plus) * e / (d * inv_plus * e + 1.0 - m0 * inv_plus);
}

double printed_m2(double u2, double m0, double t) {
  const ClosedFormConstants k = closed_form_constants(u2, m0);
  if (k.fully_aggressive) throw Error("domain", "the printed u2 != 1 form needs u2 < 1");
  const double spread = k.gamma_plus - k.gamma_minus;
  const double c2 = 1.0 + spread / (m0 - k.gamma_minus);
  const double a2 = u2 / 2.0 - 2.0;
  return k.gamma_minus + spread / (1.0 - c2 * std::exp(spread * a2 * t));
}

double two_level_drift(double u2, double m2) {
  return 1.0 + (u2 / 2.0 - 2.0) * m2 + (1.0 - u2) / 2.0 * m2 * m2;
}

Eigen::Vector3d printed_three_level_drift(const HawkDoveParams& params, double v1, double v2,
                                          const Eigen::Vector3d& m) {
  const double m0 = m(0), m1 = m(1), m2 = m(2);
  const double l12 = m0 + v1 * (v1 * m1 / 2 + (1 - v1) * m1 + v2 * m2 / 2 + (1 - v2) * m2) +
                     (1 - v1) * ((1 - v1) * m1 / 2 + (1 - v2) * m2 / 2);
  const double l21 = v2 * (v1 * m1 / 2 + v2 * m2 / 2) +
                     (1 - v2) * ((1 - v1) * m1 / 2 + v2 * m2 + (1 - v2) * m2 / 2);
  const double l10 = v1 * (v1 * m1 / 2 + v2 * m2 / 2) +
                     (1 - v1) * (v1 * m1 + (1 - v1) * m1 / 2 + v2 * m2 + (1 - v2) * m2 / 2);
  Eigen::Vector3d f;
  f(2) = m0 * params.mu2 + m1 * l12 - m2 * l21;
  f(1) = m0 * params.mu1 + m2 * l21 - m1 * l12 - m1 * l10;
  f(0) = m1 * l10 - (params.mu1 + params.mu2) * m0;
  return f;
}

InstantPayoffs instant_payoffs(const HawkDoveParams& params, std::array<double, 2> v, double u2,
                               double m2) {
  for (double p : {v[0], v[1], u2, m2})
    if (!(p >= 0.0 && p <= 1.0)) throw Error("domain", "probabilities must lie in [0, 1]");
  InstantPayoffs r;
  r.level1 = 0.5 * (1.0 - m2 * u2) * params.v_bar;
  r.level2 = v[1] * (params.v_bar - params.c * m2 * u2) + (1.0 - v[1]) * r.level1;
  return r;
}

double beta2(const HawkDoveParams& params, double u2, double m2) {
  return params.v_bar / 2.0 + m2 * u2 * (params.v_bar / 2.0 - params.c);
}

std::string to_string(Recommendation r) {
  switch (r) {
    case Recommendation::Hawk: return "hawk";
    case Recommendation::Dove: return "dove";
    case Recommendation::Indifferent: return "indifferent";
  }
  return "indifferent";
}

Beta2Result beta2_and_best_response(const HawkDoveParams& params, double u2, double m0, double t) {
  params.validate();
  Beta2Result out;
  out.m2 = closed_form_m2(u2, m0, t);
  out.beta2 = beta2(params, u2, out.m2);
  out.action = out.beta2 > 0.0   ? Recommendation::Hawk
               : out.beta2 < 0.0 ? Recommendation::Dove
                                 : Recommendation::Indifferent;

  const auto at = [&](double time) { return beta2(params, u2, closed_form_m2(u2, m0, time)); };
  const double start = at(0.0);
  const double limit = beta2(params, u2, closed_form_constants(u2, m0).gamma_minus);
  if (start == 0.0) {
    out.crossing_time = 0.0;
  } else if (start * limit < 0.0) {
    double lo = 0.0, hi = 1.0;
    while (at(hi) * start > 0.0 && hi < 1e6) hi *= 2.0;
    if (at(hi) * start <= 0.0) {
      for (int i = 0; i < 200 && hi - lo > 1e-14 * (1.0 + hi); ++i) {
        const double mid = 0.5 * (lo + hi);
        (at(mid) * start > 0.0 ? lo : hi) = mid;
      }
      out.crossing_time = 0.5 * (lo + hi);
    }
  }
  return out;
}

ThresholdReport equilibrium_threshold_check(const HawkDoveParams& params, double grid_delta,
                                            const solver::SolveOptions& options) {
  HawkDoveParams two = params;
  two.levels = 2;
  const ModelSpec spec = build_model(two);
  const StateSpace& space = spec.space;

  ThresholdReport report;
  report.ratio = two.v_bar / (2.0 * two.c);
  report.threshold_holds = report.ratio > 2.0 / 3.0;
  report.numerically_sensitive = std::abs(report.ratio - 2.0 / 3.0) < 1e-4;
  if (!report.threshold_holds)
    report.verdict = "not guaranteed by threshold";
  else if (report.numerically_sensitive)
    report.verdict = "threshold holds; numerically sensitive (ratio within 1e-4 of 2/3)";
  else
    report.verdict = "equilibrium by threshold";

  const StationaryStrategy u = strategy(space, kFieldType, 0.0, 1.0);
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(space.state_count(), 0.5);
  const auto rest = meanfield::attractor(
      meanfield::drift_field(spec, StrategyProfile(space.type_count, u), options.value.drift), space,
      embed_field(space, start));
  const Eigen::VectorXd field = rest.point.segment(space.index(kFieldType, 0), space.state_count());
  report.attractor_m2 = field(level_index(space, 2));

  const solver::StrategyGrid grid(space, kTaggedType, grid_delta);
  report.certificate = solver::certify(spec, u, level_index(space, 2), field, grid, options);
  report.agrees = !report.threshold_holds || report.certificate.epsilon < 1e-3;
  return report;
}

}  // namespace mfmdeg::hawkdove
