#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mfmdeg/model.hpp"

namespace mfmdeg {

/// Time-indexed profiles. `population` is the decimal N for microscopic runs
/// and "inf" for the mean-field limit.
struct Trajectory {
  std::string population = "inf";
  std::vector<double> times;
  std::vector<Profile> profiles;
  /// Internal state of one tracked player at each recorded time (may be empty).
  std::vector<int> tracked_states;
  std::uint64_t seed = 0;
  std::string strategy_label;

  std::size_t size() const { return times.size(); }
  void push(double t, const Profile& m) {
    times.push_back(t);
    profiles.push_back(m);
  }
};

/// Linear interpolation between recorded profiles; clamps outside the range.
Profile interpolate(const Trajectory& path, double t);

}  // namespace mfmdeg
