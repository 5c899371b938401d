#include "mfmdeg/registry.hpp"

namespace mfmdeg {

std::vector<std::string> model_names() { return {"hawk-dove-2", "hawk-dove-3"}; }

ModelSpec make_model(const std::string& name, const hawkdove::HawkDoveParams& params) {
  hawkdove::HawkDoveParams p = params;
  if (name == "hawk-dove-2")
    p.levels = 2;
  else if (name == "hawk-dove-3")
    p.levels = 3;
  else
    throw Error("model", "unknown model " + name + " (known: hawk-dove-2, hawk-dove-3)");
  return hawkdove::build_model(p);
}

}  // namespace mfmdeg
