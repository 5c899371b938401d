#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mfmdeg/cli.hpp"
#include "mfmdeg/io.hpp"
#include "mfmdeg/meanfield.hpp"
#include "mfmdeg/microsim.hpp"
#include "mfmdeg/registry.hpp"
#include "mfmdeg/solver.hpp"

#ifndef MFMDEG_VERSION
#define MFMDEG_VERSION "0.0.0"
#endif

namespace mfmdeg::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

StationaryStrategy resolve_strategy(const StateSpace& space, int type, const StrategySpec& spec,
                                    const std::string& where) {
  if (spec.is_number()) return hawkdove::strategy(space, type, 0.0, spec.get<double>());
  if (spec.is_string()) {
    const std::string name = spec.get<std::string>();
    if (name == "all-dove") return hawkdove::strategy(space, type, 0.0, 0.0);
    if (name == "all-hawk") return hawkdove::strategy(space, type, 1.0, 1.0);
    return hawkdove::strategy(space, type, 0.0, 1.0);
  }
  StationaryStrategy u = hawkdove::strategy(space, type, 0.0, 0.0);
  for (const auto& item : spec.items()) {
    const int s = space.find_state(item.key());
    if (s < 0) throw Error("config", "unknown state " + item.key() + " in " + where);
    const int n = space.action_count(type, s);
    if (item.value().is_number()) {
      const int hawk = space.find_action(type, s, "H");
      if (hawk < 0) throw Error("config", "state " + item.key() + " has no Hawk action (" + where + ")");
      const double p = item.value().get<double>();
      u.policy[s] = Eigen::VectorXd::Zero(n);
      u.policy[s](hawk) = p;
      u.policy[s](space.find_action(type, s, "D")) = 1.0 - p;
    } else {
      u.policy[s] = Eigen::VectorXd::Zero(n);
      for (const auto& action : item.value().items()) {
        const int a = space.find_action(type, s, action.key());
        if (a < 0)
          throw Error("config", "unknown action " + action.key() + " in state " + item.key() + " (" + where + ")");
        u.policy[s](a) = action.value().get<double>();
      }
    }
  }
  try {
    validate_strategy(space, type, u);
  } catch (const Error& e) {
    throw Error("config", where + ": " + e.what());
  }
  return u;
}

Eigen::VectorXd resolve_m0(const StateSpace& space, const json& m0) {
  Eigen::VectorXd field = Eigen::VectorXd::Zero(space.state_count());
  if (m0.is_number()) {
    const double top = m0.get<double>();
    field(hawkdove::level_index(space, 2)) = top;
    field(hawkdove::level_index(space, 1)) = 1.0 - top;
  } else if (m0.is_array()) {
    if (static_cast<int>(m0.size()) != space.state_count())
      throw Error("config", "m0 needs " + std::to_string(space.state_count()) + " entries");
    for (int s = 0; s < space.state_count(); ++s) field(s) = m0[s].get<double>();
  } else {
    for (const auto& item : m0.items()) {
      const int s = space.find_state(item.key());
      if (s < 0) throw Error("config", "unknown state " + item.key() + " in m0");
      field(s) = item.value().get<double>();
    }
  }
  if (!on_simplex(field, 1e-9)) throw Error("config", "m0 must be a probability vector");
  return field;
}

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream file(dir_ / name, std::ios::binary);
    if (!file) throw Error("io", "cannot write " + (dir_ / name).string());
    file << content;
    names_.push_back(name);
  }
  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

struct Context {
  const ExperimentConfig& config;
  ModelSpec spec;
  Outputs& out;
  json summary = json::object();

  const StateSpace& space() const { return spec.space; }

  StationaryStrategy field() const {
    if (!config.field_strategy) throw Error("config", "missing field strategy (u2 or field_strategy)");
    return resolve_strategy(space(), kFieldType, *config.field_strategy, "field_strategy");
  }
  StationaryStrategy tagged() const {
    if (!config.tagged_strategy) return field();
    return resolve_strategy(space(), kTaggedType, *config.tagged_strategy, "tagged_strategy");
  }
  Eigen::VectorXd m0() const {
    if (!config.m0) throw Error("config", "missing field m0");
    return resolve_m0(space(), *config.m0);
  }
  int s0() const {
    const std::string name = config.s0.value_or("2");
    const int s = space().find_state(name);
    if (s < 0) throw Error("config", "unknown state " + name + " in s0");
    return s;
  }
  double horizon() const {
    if (!config.horizon) throw Error("config", "missing field horizon");
    return *config.horizon;
  }
  long population() const {
    if (!config.n) throw Error("config", "command " + config.command + " needs an integer N");
    return *config.n;
  }
  meanfield::ValueOptions value_options() const {
    meanfield::ValueOptions v;
    v.step = config.step;
    return v;
  }
  solver::SolveOptions solve_options() const {
    solver::SolveOptions s;
    s.tolerance = config.tolerance;
    s.value = value_options();
    s.pure_shortcut = config.pure_shortcut;
    return s;
  }
};

json event_json(const microsim::EventRecord& e) {
  json spontaneous = json::array();
  for (const auto& [player, state] : e.spontaneous) spontaneous.push_back({player, state});
  return {{"step", e.step},         {"participants", e.participants}, {"actions", e.actions},
          {"previous", e.previous}, {"next", e.next},                 {"gains", e.gains},
          {"spontaneous", spontaneous}};
}

void run_simulate(Context& ctx) {
  const long n = ctx.population();
  const StationaryStrategy u = ctx.field();
  const Eigen::VectorXd m0 = ctx.m0();
  const auto field_counts = nearest_counts(m0, n);
  std::vector<long> counts(ctx.space().size(), 0);
  for (int s = 0; s < ctx.space().state_count(); ++s)
    counts[ctx.space().index(kFieldType, s)] = field_counts[s];
  const auto initial = microsim::make_state(ctx.space(), counts);
  Eigen::VectorXd used(m0.size());
  for (int s = 0; s < m0.size(); ++s) used(s) = static_cast<double>(field_counts[s]) / n;
  ctx.summary["m0_used"] = io::state_vector_json(ctx.space(), used);

  for (std::uint64_t seed : ctx.config.seeds) {
    microsim::SimulateOptions options;
    options.record_stride = ctx.config.record_stride;
    std::ostringstream events;
    if (ctx.config.events)
      options.on_event = [&events](const microsim::EventRecord& e) { events << event_json(e).dump() << '\n'; };
    const Trajectory path = microsim::simulate(ctx.spec, StrategyProfile(2, u), initial,
                                               ctx.horizon(), seed, options);
    std::ostringstream csv;
    io::write_trajectory_csv(csv, ctx.space(), path);
    ctx.out.write("trajectory_seed" + std::to_string(seed) + ".csv", csv.str());
    if (ctx.config.events) ctx.out.write("events_seed" + std::to_string(seed) + ".jsonl", events.str());
  }
}

void run_ode(Context& ctx) {
  if (ctx.config.n) throw Error("config", "ode runs in the limit; set N to \"limit\" or omit it");
  meanfield::OdeOptions options;
  options.step = ctx.config.step;
  options.record_every = ctx.config.record_every;
  const auto solution = meanfield::integrate_ode(
      meanfield::drift_field(ctx.spec, StrategyProfile(2, ctx.field())),
      embed_field(ctx.space(), ctx.m0()), ctx.horizon(), options);
  std::ostringstream csv;
  io::write_trajectory_csv(csv, ctx.space(), solution.path);
  ctx.out.write("trajectory.csv", csv.str());
  ctx.out.write_json("ode.json", {{"error_estimate", solution.error_estimate},
                                  {"warnings", solution.warnings},
                                  {"steps", std::lround(ctx.horizon() / ctx.config.step)}});
}

void run_value(Context& ctx) {
  const StationaryStrategy u1 = ctx.tagged(), u2 = ctx.field();
  const Eigen::VectorXd m0 = ctx.m0();
  const auto table = meanfield::tagged_value(ctx.spec, u1, u2, m0, ctx.config.tolerance, ctx.value_options());
  json report = {{"values", io::state_vector_json(ctx.space(), table.values)},
                 {"s0", ctx.space().state_names[ctx.s0()]},
                 {"value", table.values(ctx.s0())},
                 {"horizon", table.horizon},
                 {"tail_bound", table.tail_bound},
                 {"tagged_strategy", io::strategy_json(ctx.space(), kTaggedType, u1)},
                 {"field_strategy", io::strategy_json(ctx.space(), kFieldType, u2)},
                 {"m0", io::state_vector_json(ctx.space(), m0)}};
  try {
    const auto st = meanfield::stationary_payoff(ctx.spec, u1, u2, ctx.config.tolerance, m0, ctx.value_options());
    report["stationary"] = {{"value", st.value},
                            {"pi", io::state_vector_json(ctx.space(), st.pi)},
                            {"attractor", io::state_vector_json(ctx.space(), st.field_attractor)}};
  } catch (const Error& e) {
    report["stationary"] = {{"error", {{"code", e.code()}, {"message", e.what()}}}};
  }
  ctx.out.write_json("value.json", report);
}

void run_payoff_n(Context& ctx) {
  const long n = ctx.population();
  const StationaryStrategy u1 = ctx.tagged(), u2 = ctx.field();
  const Eigen::VectorXd m0 = ctx.m0();
  const auto estimate = microsim::estimate_discounted_payoff(ctx.spec, u1, u2, ctx.s0(), m0, n,
                                                             ctx.config.replications,
                                                             ctx.config.seeds.front());
  const double limit =
      meanfield::tagged_value(ctx.spec, u1, u2, m0, ctx.config.tolerance, ctx.value_options()).values(ctx.s0());
  json report = io::payoff_json(estimate);
  report["N"] = n;
  report["seed"] = ctx.config.seeds.front();
  report["s0"] = ctx.space().state_names[ctx.s0()];
  report["limit_value"] = limit;
  report["z_vs_limit"] = (estimate.mean - limit) / estimate.std_error;
  ctx.out.write_json("payoff_n.json", report);
}

void run_solve(Context& ctx) {
  const solver::StrategyGrid grid(ctx.space(), kTaggedType, ctx.config.grid_delta);
  const Eigen::VectorXd m0 = ctx.m0();
  solver::Certificate cert;
  if (ctx.config.objective == "team") {
    cert = solver::optimize_team(ctx.spec, ctx.s0(), m0, grid, ctx.solve_options());
  } else {
    const StationaryStrategy init =
        ctx.config.init_strategy
            ? resolve_strategy(ctx.space(), kFieldType, *ctx.config.init_strategy, "init_strategy")
            : hawkdove::strategy(ctx.space(), kFieldType, 0.0, 0.0);
    solver::FixedPointOptions fixed;
    fixed.max_iters = ctx.config.max_iters;
    fixed.damping = ctx.config.damping;
    cert = solver::fixed_point_iterate(ctx.spec, init, ctx.s0(), m0, grid, fixed, ctx.solve_options());
  }
  ctx.out.write_json("certificate.json", io::certificate_json(ctx.space(), cert));
}

void run_converge(Context& ctx) {
  if (ctx.config.n_list.empty()) throw Error("config", "converge needs N_list");
  const StationaryStrategy u = ctx.field();
  const auto study = microsim::convergence_study(
      ctx.spec, StrategyProfile(2, u), embed_field(ctx.space(), ctx.m0()), ctx.horizon(),
      ctx.config.n_list, ctx.config.seeds, ctx.config.epsilons);
  std::ostringstream rows;
  rows << "N,seed,sup_dev\n";
  for (const auto& row : study.rows)
    rows << row.n << ',' << row.seed << ',' << io::format_double(row.sup_deviation) << '\n';
  ctx.out.write("converge.csv", rows.str());
  std::ostringstream summary;
  summary << "N,mean_sup_dev";
  for (double eps : study.epsilons) summary << ",exceed_" << io::format_double(eps);
  summary << '\n';
  for (const auto& s : study.summary) {
    summary << s.n << ',' << io::format_double(s.mean_sup_deviation);
    for (double f : s.exceedance) summary << ',' << io::format_double(f);
    summary << '\n';
  }
  ctx.out.write("converge_summary.csv", summary.str());
}

void run_hawkdove_report(Context& ctx) {
  const StateSpace& space = ctx.space();
  const StationaryStrategy u =
      ctx.config.field_strategy ? ctx.field() : hawkdove::strategy(space, kFieldType, 0.0, 1.0);
  const Eigen::VectorXd m0 =
      ctx.config.m0 ? ctx.m0() : resolve_m0(space, json(0.0));
  const int top = hawkdove::level_index(space, 2);
  const double u2 = u.policy[top](hawkdove::kHawk);
  json report = {{"model", ctx.spec.name}, {"u2", u2}, {"m0", io::state_vector_json(space, m0)}};

  if (ctx.config.params.levels == 2) {
    meanfield::OdeOptions options;
    options.step = ctx.config.step;
    options.record_every = ctx.config.record_every;
    options.error_estimate = false;
    const double horizon = ctx.config.horizon.value_or(10.0);
    const auto solution = meanfield::integrate_ode(
        meanfield::drift_field(ctx.spec, StrategyProfile(2, u)), embed_field(space, m0), horizon, options);
    std::ostringstream csv;
    csv << "t,closed_form,rk4,abs_diff\n";
    double worst = 0.0;
    const int column = space.index(kFieldType, top);
    for (std::size_t i = 0; i < solution.path.size(); ++i) {
      const double t = solution.path.times[i];
      const double closed = hawkdove::closed_form_m2(u2, m0(top), t);
      const double rk4 = solution.path.profiles[i](column);
      worst = std::max(worst, std::abs(closed - rk4));
      csv << io::format_double(t) << ',' << io::format_double(closed) << ',' << io::format_double(rk4)
          << ',' << io::format_double(std::abs(closed - rk4)) << '\n';
    }
    ctx.out.write("closed_form.csv", csv.str());
    const auto k = hawkdove::closed_form_constants(u2, m0(top));
    report["closed_form"] = {{"max_abs_diff", worst},
                             {"horizon", horizon},
                             {"gamma_minus", k.gamma_minus},
                             {"lambda", k.lambda},
                             {"limit", k.gamma_minus}};
    if (!k.fully_aggressive) report["closed_form"]["gamma_plus"] = k.gamma_plus;
    if (!k.fully_aggressive) report["closed_form"]["printed_m2_at_0"] = hawkdove::printed_m2(u2, m0(top), 0.0);
    const auto b = hawkdove::beta2_and_best_response(ctx.config.params, u2, m0(top), 0.0);
    report["beta2"] = {{"at_t0", b.beta2}, {"recommendation_at_t0", hawkdove::to_string(b.action)}};
    report["beta2"]["crossing_time"] = b.crossing_time ? json(*b.crossing_time) : json(nullptr);
  } else {
    const Profile full = embed_field(space, m0);
    const Eigen::VectorXd f = meanfield::drift(ctx.spec, StrategyProfile(2, u), full);
    const int low = hawkdove::level_index(space, 1);
    const double v1 = u.policy[low](hawkdove::kHawk);
    const Eigen::Vector3d printed = hawkdove::printed_three_level_drift(
        ctx.config.params, v1, u2, Eigen::Vector3d(m0(0), m0(1), m0(2)));
    report["drift"] = {
        {"mechanistic", io::state_vector_json(space, f.segment(space.index(kFieldType, 0), 3))},
        {"printed", io::state_vector_json(space, printed)}};
  }

  const auto threshold = hawkdove::equilibrium_threshold_check(ctx.config.params, ctx.config.grid_delta,
                                                               ctx.solve_options());
  hawkdove::HawkDoveParams two = ctx.config.params;
  two.levels = 2;
  report["threshold"] = {{"ratio", threshold.ratio},
                         {"holds", threshold.threshold_holds},
                         {"numerically_sensitive", threshold.numerically_sensitive},
                         {"verdict", threshold.verdict},
                         {"attractor_m2", threshold.attractor_m2},
                         {"agrees", threshold.agrees},
                         {"certificate", io::certificate_json(hawkdove::build_model(two).space,
                                                              threshold.certificate)}};
  ctx.out.write_json("hawkdove_report.json", report);
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw Error("io", "cannot read " + path.string());
  const std::string data((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw Error("io", "sha256 failed");
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

std::vector<std::string> verify_manifest(const fs::path& manifest_path) {
  std::ifstream file(manifest_path);
  if (!file) throw Error("io", "cannot read " + manifest_path.string());
  const json manifest = json::parse(file);
  std::vector<std::string> bad;
  for (const auto& entry : manifest.at("files")) {
    const fs::path path = manifest_path.parent_path() / entry.at("path").get<std::string>();
    if (!fs::exists(path) || sha256_file(path) != entry.at("sha256").get<std::string>())
      bad.push_back(entry.at("path").get<std::string>());
  }
  return bad;
}

RunManifest run(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  Outputs out(config.out);
  Context ctx{config, make_model(config.model, config.params), out};
  const std::string& c = config.command;
  if (c == "simulate") run_simulate(ctx);
  else if (c == "ode") run_ode(ctx);
  else if (c == "value") run_value(ctx);
  else if (c == "payoff-n") run_payoff_n(ctx);
  else if (c == "solve") run_solve(ctx);
  else if (c == "converge") run_converge(ctx);
  else if (c == "hawkdove-report") run_hawkdove_report(ctx);
  else throw Error("config", "unknown command " + c);

  RunManifest manifest;
  manifest.config = to_json(config);
  manifest.command = c;
  manifest.version = MFMDEG_VERSION;
  manifest.summary = ctx.summary;
  for (const auto& name : out.names()) {
    const fs::path path = out.dir() / name;
    manifest.files.push_back({name, fs::file_size(path), sha256_file(path)});
  }
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json files = json::array();
  for (const auto& f : manifest.files) files.push_back({{"path", f.path}, {"bytes", f.bytes}, {"sha256", f.sha256}});
  const json doc = {{"command", manifest.command},   {"version", manifest.version},
                    {"config", manifest.config},     {"wall_seconds", manifest.wall_seconds},
                    {"summary", manifest.summary},   {"files", files}};
  std::ofstream(out.dir() / "manifest.json") << doc.dump(2) << "\n";
  return manifest;
}

}  // namespace mfmdeg::cli
