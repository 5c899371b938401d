#include "mfmdeg/io.hpp"

#include <charconv>
#include <cmath>

namespace mfmdeg::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buffer[32];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, x);
  return std::string(buffer, result.ptr);
}

void write_trajectory_csv(std::ostream& out, const StateSpace& space, const Trajectory& path,
                          bool header) {
  if (header) out << "t,theta,s,mass,N\n";
  for (std::size_t i = 0; i < path.size(); ++i) {
    const std::string t = format_double(path.times[i]);
    for (int type = 0; type < space.type_count; ++type)
      for (int s = 0; s < space.state_count(); ++s)
        out << t << ',' << type + 1 << ',' << space.state_names[s] << ','
            << format_double(path.profiles[i](space.index(type, s))) << ',' << path.population
            << '\n';
  }
}

nlohmann::json strategy_json(const StateSpace& space, int type, const StationaryStrategy& u) {
  nlohmann::json out = nlohmann::json::object();
  for (int s = 0; s < space.state_count(); ++s) {
    nlohmann::json row = nlohmann::json::object();
    for (int a = 0; a < space.action_count(type, s); ++a)
      row[space.actions[type][s][a]] = u.policy[s](a);
    out[space.state_names[s]] = row;
  }
  return out;
}

nlohmann::json state_vector_json(const StateSpace& space, const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::object();
  for (int s = 0; s < space.state_count() && s < v.size(); ++s) out[space.state_names[s]] = v(s);
  return out;
}

nlohmann::json certificate_json(const StateSpace& space, const solver::Certificate& cert) {
  return {
      {"strategy", strategy_json(space, kTaggedType, cert.strategy)},
      {"value", cert.value},
      {"values", state_vector_json(space, cert.values)},
      {"epsilon", cert.epsilon},
      {"kind", cert.kind},
      {"grid_delta", cert.grid_delta},
      {"s0", space.state_names[cert.s0]},
      {"m0", state_vector_json(space, cert.m0)},
      {"converged", cert.converged},
      {"iterations", cert.iterations},
      {"cycle_detected", cert.cycle_detected},
      {"tie_class", cert.tie_class},
  };
}

nlohmann::json payoff_json(const microsim::PayoffEstimate& estimate) {
  return {{"mean", estimate.mean},
          {"std_error", estimate.std_error},
          {"replications", estimate.replications},
          {"truncation_horizon", estimate.truncation_horizon}};
}

}  // namespace mfmdeg::io
