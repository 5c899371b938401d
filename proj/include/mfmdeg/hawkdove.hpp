#pragma once

#include <array>
#include <optional>
#include <string>

#include "mfmdeg/model.hpp"
#include "mfmdeg/solver.hpp"

namespace mfmdeg::hawkdove {

/// Action indices in every state that offers a choice.
inline constexpr int kDove = 0;
inline constexpr int kHawk = 1;

struct HawkDoveParams {
  double v_bar = 1.0;  ///< food value
  double c = 1.0;      ///< fight cost
  double beta = 1.0;   ///< discount rate
  double mu1 = 0.0;    ///< regeneration 0 -> 1 (3 levels)
  double mu2 = 0.0;    ///< regeneration 0 -> 2 (3 levels)
  int levels = 2;

  void validate() const;
};

/// Two types (tagged, field) sharing one kernel. With 2 levels the states are
/// "1", "2" and level 1 offers only Dove; with 3 levels the states are "0",
/// "1", "2" and level 0 offers no action.
ModelSpec build_model(const HawkDoveParams& params);

/// Hawk probability per energy level (entries for levels without a choice are ignored).
StationaryStrategy strategy(const StateSpace& space, int type, double hawk_at_1, double hawk_at_2);

/// Index of energy level `level` in the model's state list.
int level_index(const StateSpace& space, int level);

struct ClosedFormConstants {
  bool fully_aggressive = false;  ///< u2 == 1
  double c1 = 0.0;
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;  ///< infinity when u2 == 1
  double w0 = 0.0;
  double lambda = 0.0;
};

ClosedFormConstants closed_form_constants(double u2, double m0);

/// m2(t) of the 2-level limit when the field plays Hawk at level 2 with probability u2.
double closed_form_m2(double u2, double m0, double t);

/// The printed u2 != 1 form with its constant c2 and exponent (gamma+ - gamma-) a2.
double printed_m2(double u2, double m0, double t);

/// dm2/dt = 1 + (u2/2 - 2) m2 + ((1 - u2)/2) m2^2.
double two_level_drift(double u2, double m2);

/// The printed 3-level right-hand side (dm0, dm1, dm2) with v1 = u(H|1), v2 = u(H|2).
Eigen::Vector3d printed_three_level_drift(const HawkDoveParams& params, double v1, double v2,
                                          const Eigen::Vector3d& m);

struct InstantPayoffs {
  double level1 = 0.0;
  double level2 = 0.0;
};

/// r(v, u, 1) = (1 - m2 u2) v_bar / 2 and r(v, u, 2) = v[2] (v_bar - c m2 u2) + (1 - v[2]) r(v, u, 1).
/// `v` holds the tagged Hawk probability at levels 1 and 2.
InstantPayoffs instant_payoffs(const HawkDoveParams& params, std::array<double, 2> v, double u2,
                               double m2);

/// beta_2 = v_bar / 2 + m2 u2 (v_bar / 2 - c).
double beta2(const HawkDoveParams& params, double u2, double m2);

enum class Recommendation { Hawk, Dove, Indifferent };
std::string to_string(Recommendation r);

struct Beta2Result {
  double beta2 = 0.0;
  double m2 = 0.0;
  Recommendation action = Recommendation::Indifferent;
  /// The single time at which beta_2 changes sign along the trajectory, if any.
  std::optional<double> crossing_time;
};

Beta2Result beta2_and_best_response(const HawkDoveParams& params, double u2, double m0, double t);

struct ThresholdReport {
  double ratio = 0.0;  ///< v_bar / (2c)
  bool threshold_holds = false;
  bool numerically_sensitive = false;
  std::string verdict;
  double attractor_m2 = 0.0;
  solver::Certificate certificate;
  bool agrees = false;
};

/// Threshold v_bar / (2c) > 2/3 against the grid certificate of (D@1, H@2)
/// at the 2-level attractor, tagged player starting at level 2.
ThresholdReport equilibrium_threshold_check(const HawkDoveParams& params, double grid_delta = 0.05,
                                            const solver::SolveOptions& options = {});

}  // namespace mfmdeg::hawkdove
