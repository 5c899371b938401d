#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "mfmdeg/microsim.hpp"
#include "mfmdeg/model.hpp"
#include "mfmdeg/solver.hpp"
#include "mfmdeg/trajectory.hpp"

namespace mfmdeg::io {

/// Shortest decimal that reads back to the same double.
std::string format_double(double x);

/// Long format `t,theta,s,mass,N`: theta is 1-based, s is the state name,
/// N is the population or `inf`.
void write_trajectory_csv(std::ostream& out, const StateSpace& space, const Trajectory& path,
                          bool header = true);

nlohmann::json strategy_json(const StateSpace& space, int type, const StationaryStrategy& u);
nlohmann::json state_vector_json(const StateSpace& space, const Eigen::VectorXd& v);
nlohmann::json certificate_json(const StateSpace& space, const solver::Certificate& cert);
nlohmann::json payoff_json(const microsim::PayoffEstimate& estimate);

}  // namespace mfmdeg::io
