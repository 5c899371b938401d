#pragma once

#include <string>
#include <vector>

#include "mfmdeg/hawkdove.hpp"
#include "mfmdeg/model.hpp"

namespace mfmdeg {

/// Names accepted by make_model.
std::vector<std::string> model_names();

/// Builds a registered model. The parameter block is shared by all entries.
ModelSpec make_model(const std::string& name, const hawkdove::HawkDoveParams& params);

}  // namespace mfmdeg
