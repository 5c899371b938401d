#include <algorithm>
#include <set>

#include "mfmdeg/cli.hpp"
#include "mfmdeg/registry.hpp"

namespace mfmdeg::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& message) { throw Error("config", message); }

[[noreturn]] void mismatch(const std::string& path, const char* expected) {
  fail("type mismatch at " + path + ": expected " + expected);
}

void check_keys(const json& object, const std::string& prefix, const std::set<std::string>& allowed) {
  for (const auto& item : object.items())
    if (!allowed.count(item.key())) fail("unknown field " + prefix + item.key());
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) mismatch(path, "number");
  return j.get<double>();
}

long integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) mismatch(path, "integer");
  return j.get<long>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) mismatch(path, "string");
  return j.get<std::string>();
}

bool boolean(const json& j, const std::string& path) {
  if (!j.is_boolean()) mismatch(path, "boolean");
  return j.get<bool>();
}

const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) mismatch(path, "array");
  return j;
}

void check_probability(double p, const std::string& path) {
  if (!(p >= 0.0 && p <= 1.0)) fail(path + " must lie in [0, 1]");
}

StrategySpec strategy_spec(const json& j, const std::string& path) {
  if (j.is_number()) {
    check_probability(j.get<double>(), path);
  } else if (j.is_string()) {
    const std::string name = j.get<std::string>();
    if (name != "all-dove" && name != "all-hawk" && name != "dove1-hawk2")
      fail("unknown strategy name " + name + " at " + path);
  } else if (j.is_object()) {
    for (const auto& item : j.items()) {
      const std::string sub = path + "." + item.key();
      if (item.value().is_number()) {
        check_probability(item.value().get<double>(), sub);
      } else if (item.value().is_object()) {
        for (const auto& action : item.value().items())
          check_probability(number(action.value(), sub + "." + action.key()), sub + "." + action.key());
      } else {
        mismatch(sub, "number or object");
      }
    }
  } else {
    mismatch(path, "number, string or object");
  }
  return j;
}

}  // namespace

ExperimentConfig parse_config(std::string_view source) {
  json root;
  try {
    root = json::parse(source);
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) mismatch("(root)", "object");
  check_keys(root, "", {"model", "params", "command", "u2", "v2", "field_strategy", "tagged_strategy",
                        "init_strategy", "m0", "s0", "N", "N_list", "horizon", "seeds",
                        "replications", "grid_delta", "tolerance", "step", "record_every",
                        "record_stride", "epsilons", "objective", "max_iters", "damping",
                        "pure_shortcut", "events", "out"});

  ExperimentConfig config;
  if (!root.contains("model")) fail("missing field model");
  config.model = text(root["model"], "model");
  const auto names = model_names();
  if (std::find(names.begin(), names.end(), config.model) == names.end())
    fail("unknown model " + config.model);

  if (!root.contains("params")) fail("missing field params");
  const json& params = root["params"];
  if (!params.is_object()) mismatch("params", "object");
  check_keys(params, "params.", {"v_bar", "c", "beta", "mu1", "mu2"});
  if (!params.contains("v_bar")) fail("missing field params.v_bar");
  if (!params.contains("c")) fail("missing field params.c");
  config.params.v_bar = number(params["v_bar"], "params.v_bar");
  config.params.c = number(params["c"], "params.c");
  if (params.contains("beta")) config.params.beta = number(params["beta"], "params.beta");
  if (params.contains("mu1")) config.params.mu1 = number(params["mu1"], "params.mu1");
  if (params.contains("mu2")) config.params.mu2 = number(params["mu2"], "params.mu2");
  config.params.levels = config.model == "hawk-dove-3" ? 3 : 2;
  try {
    config.params.validate();
  } catch (const Error& e) {
    fail(e.what());
  }

  if (root.contains("command")) {
    config.command = text(root["command"], "command");
    const auto& known = commands();
    if (std::find(known.begin(), known.end(), config.command) == known.end())
      fail("unknown command " + config.command);
  }

  if (root.contains("u2") && root.contains("field_strategy"))
    fail("give either u2 or field_strategy, not both");
  if (root.contains("v2") && root.contains("tagged_strategy"))
    fail("give either v2 or tagged_strategy, not both");
  if (root.contains("u2")) config.field_strategy = strategy_spec(root["u2"], "u2");
  if (root.contains("field_strategy"))
    config.field_strategy = strategy_spec(root["field_strategy"], "field_strategy");
  if (root.contains("v2")) config.tagged_strategy = strategy_spec(root["v2"], "v2");
  if (root.contains("tagged_strategy"))
    config.tagged_strategy = strategy_spec(root["tagged_strategy"], "tagged_strategy");
  if (root.contains("init_strategy"))
    config.init_strategy = strategy_spec(root["init_strategy"], "init_strategy");

  if (root.contains("m0")) {
    const json& m0 = root["m0"];
    if (m0.is_number()) {
      check_probability(m0.get<double>(), "m0");
    } else if (m0.is_array()) {
      for (std::size_t i = 0; i < m0.size(); ++i) number(m0[i], "m0[" + std::to_string(i) + "]");
    } else if (m0.is_object()) {
      for (const auto& item : m0.items()) number(item.value(), "m0." + item.key());
    } else {
      mismatch("m0", "number, array or object");
    }
    config.m0 = m0;
  }
  if (root.contains("s0")) {
    const json& s0 = root["s0"];
    if (s0.is_number_integer())
      config.s0 = std::to_string(s0.get<long>());
    else
      config.s0 = text(s0, "s0");
  }

  if (root.contains("N")) {
    const json& n = root["N"];
    if (n.is_string()) {
      if (n.get<std::string>() != "limit") fail("N must be an integer or \"limit\"");
    } else {
      config.n = integer(n, "N");
      if (*config.n < 2) fail("N must be at least 2");
    }
  }
  if (root.contains("N_list")) {
    const json& list = array(root["N_list"], "N_list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const long n = integer(list[i], "N_list[" + std::to_string(i) + "]");
      if (n < 2) fail("N_list entries must be at least 2");
      config.n_list.push_back(n);
    }
  }
  if (root.contains("horizon")) {
    config.horizon = number(root["horizon"], "horizon");
    if (!(*config.horizon > 0.0)) fail("horizon must be positive");
  }
  if (root.contains("seeds")) {
    const json& list = array(root["seeds"], "seeds");
    config.seeds.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const long s = integer(list[i], "seeds[" + std::to_string(i) + "]");
      if (s < 0) fail("seeds must be non-negative");
      config.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (config.seeds.empty()) fail("seeds must not be empty");
  }
  if (root.contains("replications")) {
    config.replications = integer(root["replications"], "replications");
    if (config.replications < 2) fail("replications must be at least 2");
  }
  if (root.contains("grid_delta")) {
    config.grid_delta = number(root["grid_delta"], "grid_delta");
    if (!(config.grid_delta > 0.0 && config.grid_delta <= 1.0)) fail("grid_delta must lie in (0, 1]");
  }
  if (root.contains("tolerance")) {
    config.tolerance = number(root["tolerance"], "tolerance");
    if (!(config.tolerance > 0.0)) fail("tolerance must be positive");
  }
  if (root.contains("step")) {
    config.step = number(root["step"], "step");
    if (!(config.step > 0.0)) fail("step must be positive");
  }
  if (root.contains("record_every")) {
    config.record_every = integer(root["record_every"], "record_every");
    if (config.record_every < 1) fail("record_every must be at least 1");
  }
  if (root.contains("record_stride")) {
    config.record_stride = integer(root["record_stride"], "record_stride");
    if (config.record_stride < 0) fail("record_stride must be non-negative");
  }
  if (root.contains("epsilons")) {
    const json& list = array(root["epsilons"], "epsilons");
    config.epsilons.clear();
    for (std::size_t i = 0; i < list.size(); ++i)
      config.epsilons.push_back(number(list[i], "epsilons[" + std::to_string(i) + "]"));
  }
  if (root.contains("objective")) {
    config.objective = text(root["objective"], "objective");
    if (config.objective != "equilibrium" && config.objective != "team")
      fail("objective must be \"equilibrium\" or \"team\"");
  }
  if (root.contains("max_iters")) {
    config.max_iters = static_cast<int>(integer(root["max_iters"], "max_iters"));
    if (config.max_iters < 1) fail("max_iters must be at least 1");
  }
  if (root.contains("damping")) {
    config.damping = number(root["damping"], "damping");
    if (!(config.damping > 0.0 && config.damping <= 1.0)) fail("damping must lie in (0, 1]");
  }
  if (root.contains("pure_shortcut"))
    config.pure_shortcut = boolean(root["pure_shortcut"], "pure_shortcut");
  if (root.contains("events")) config.events = boolean(root["events"], "events");
  if (root.contains("out")) config.out = text(root["out"], "out");
  return config;
}

nlohmann::json to_json(const ExperimentConfig& config) {
  json out = {
      {"model", config.model},
      {"params",
       {{"v_bar", config.params.v_bar},
        {"c", config.params.c},
        {"beta", config.params.beta},
        {"mu1", config.params.mu1},
        {"mu2", config.params.mu2}}},
      {"command", config.command},
      {"seeds", config.seeds},
      {"replications", config.replications},
      {"grid_delta", config.grid_delta},
      {"tolerance", config.tolerance},
      {"step", config.step},
      {"record_every", config.record_every},
      {"record_stride", config.record_stride},
      {"epsilons", config.epsilons},
      {"objective", config.objective},
      {"max_iters", config.max_iters},
      {"damping", config.damping},
      {"pure_shortcut", config.pure_shortcut},
      {"events", config.events},
      {"out", config.out},
  };
  out["N"] = config.n ? json(*config.n) : json("limit");
  if (!config.n_list.empty()) out["N_list"] = config.n_list;
  if (config.horizon) out["horizon"] = *config.horizon;
  if (config.field_strategy) out["field_strategy"] = *config.field_strategy;
  if (config.tagged_strategy) out["tagged_strategy"] = *config.tagged_strategy;
  if (config.init_strategy) out["init_strategy"] = *config.init_strategy;
  if (config.m0) out["m0"] = *config.m0;
  if (config.s0) out["s0"] = *config.s0;
  return out;
}

std::string error_line(const std::string& code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}}.dump();
}

}  // namespace mfmdeg::cli
