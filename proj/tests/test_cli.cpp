#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mfmdeg/cli.hpp"
#include "oracles.hpp"

using namespace mfmdeg;
using namespace mfmdeg::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mfmdeg_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig config(const json& j, const fs::path& out) {
  json copy = j;
  copy["out"] = out.string();
  return parse_config(copy.dump());
}

const json kOde = {{"model", "hawk-dove-2"}, {"params", {{"v_bar", 1.5}, {"c", 1.0}}},
                   {"command", "ode"},       {"u2", 1.0},
                   {"m0", 0.0},              {"horizon", 10}};

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == "config");
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config gets documented defaults") {
  const auto c = parse_config(kOde.dump());
  CHECK(c.model == "hawk-dove-2");
  CHECK(c.params.beta == 1.0);
  CHECK(c.grid_delta == 0.05);
  CHECK(c.tolerance == 1e-6);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK_FALSE(c.n.has_value());
  CHECK(*c.horizon == 10.0);
  const json echo = to_json(c);
  CHECK(echo["params"]["beta"] == 1.0);
  CHECK(echo["grid_delta"] == 0.05);
}

TEST_CASE("strict parsing names the offending path") {
  json j = kOde;
  j["params"]["vbar"] = 1.0;
  CHECK(config_error(j.dump()) == "unknown field params.vbar");
  j = kOde;
  j["horizon"] = "long";
  CHECK(config_error(j.dump()) == "type mismatch at horizon: expected number");
  j = kOde;
  j["horizon"] = -1;
  CHECK(config_error(j.dump()) == "horizon must be positive");
  j = kOde;
  j["model"] = "chicken";
  CHECK(config_error(j.dump()).find("chicken") != std::string::npos);
  CHECK_FALSE(config_error("{not json").empty());
}

TEST_CASE("ode command writes the closed-form trajectory") {
  const fs::path out = scratch("ode");
  const auto manifest = run(config(kOde, out));
  CHECK(manifest.command == "ode");
  std::ifstream csv(out / "trajectory.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "t,theta,s,mass,N");
  int checked = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string t, theta, s, mass, n;
    std::getline(ss, t, ',');
    std::getline(ss, theta, ',');
    std::getline(ss, s, ',');
    std::getline(ss, mass, ',');
    std::getline(ss, n, ',');
    CHECK(n == "inf");
    if (theta == "2" && s == "2") {
      CHECK(std::abs(std::stod(mass) - oracle::mean1(0.0, std::stod(t))) < 1e-6);
      ++checked;
    }
  }
  CHECK(checked > 100);
  CHECK(verify_manifest(out / "manifest.json").empty());
}

TEST_CASE("manifest lists every file with its checksum") {
  const fs::path out = scratch("manifest");
  run(config(kOde, out));
  const json doc = json::parse(slurp(out / "manifest.json"));
  CHECK(doc["version"].is_string());
  CHECK(doc["wall_seconds"].get<double>() >= 0.0);
  std::size_t listed = 0;
  for (const auto& entry : fs::directory_iterator(out))
    if (entry.path().filename() != "manifest.json") ++listed;
  CHECK(doc["files"].size() == listed);
  std::ofstream(out / "trajectory.csv", std::ios::app) << "tampered\n";
  CHECK(verify_manifest(out / "manifest.json") == std::vector<std::string>{"trajectory.csv"});
  // Empty-input digest.
  std::ofstream(out / "empty").close();
  CHECK(sha256_file(out / "empty") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("seeded runs are byte-identical") {
  const json sim = {{"model", "hawk-dove-3"}, {"params", {{"v_bar", 1.0}, {"c", 0.5}, {"mu1", 0.3}, {"mu2", 0.1}}},
                    {"command", "simulate"},  {"u2", 0.5},
                    {"m0", {0.2, 0.4, 0.4}},  {"N", 50},
                    {"horizon", 2},           {"seeds", {3, 4}},
                    {"events", true}};
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  const auto ma = run(config(sim, a));
  const auto mb = run(config(sim, b));
  REQUIRE(ma.files.size() == 4);
  REQUIRE(ma.files.size() == mb.files.size());
  for (std::size_t i = 0; i < ma.files.size(); ++i) {
    CHECK(ma.files[i].path == mb.files[i].path);
    CHECK(ma.files[i].sha256 == mb.files[i].sha256);
  }
  CHECK(slurp(a / "trajectory_seed3.csv") != slurp(a / "trajectory_seed4.csv"));
}

TEST_CASE("converge command: deviation shrinks with N") {
  json j = {{"model", "hawk-dove-2"}, {"params", {{"v_bar", 1.5}, {"c", 1.0}}},
            {"command", "converge"},  {"u2", 1.0},
            {"m0", 0.0},              {"horizon", 3},
            {"N_list", {100, 1000}},  {"seeds", {1, 2, 3, 4, 5}}};
  const fs::path out = scratch("converge");
  run(config(j, out));
  std::ifstream csv(out / "converge_summary.csv");
  std::string header, row100, row1000;
  std::getline(csv, header);
  std::getline(csv, row100);
  std::getline(csv, row1000);
  CHECK(header == "N,mean_sup_dev,exceed_0.01,exceed_0.02,exceed_0.05,exceed_0.1");
  auto mean_of = [](const std::string& row) { return std::stod(row.substr(row.find(',') + 1)); };
  CHECK(mean_of(row1000) < mean_of(row100));
}

TEST_CASE("solve command certifies Dove at 1, Hawk at 2") {
  json j = {{"model", "hawk-dove-2"}, {"params", {{"v_bar", 1.5}, {"c", 1.0}}}, {"command", "solve"},
            {"m0", 0.5},              {"s0", "2"},                               {"step", 0.01}};
  const fs::path out = scratch("solve");
  run(config(j, out));
  const json cert = json::parse(slurp(out / "certificate.json"));
  CHECK(cert["strategy"]["2"]["H"] == 1.0);
  CHECK(cert["strategy"]["1"]["D"] == 1.0);
  CHECK(cert["epsilon"].get<double>() < 1e-3);
  CHECK(cert["kind"] == "equilibrium");
  CHECK(cert["converged"] == true);
}

TEST_CASE("error line is one line of JSON") {
  const std::string line = error_line("config", "bad \"quote\"\nnext");
  CHECK(line.find('\n') == std::string::npos);
  const json j = json::parse(line);
  CHECK(j["error"]["code"] == "config");
  CHECK(j["error"]["message"] == "bad \"quote\"\nnext");
}

TEST_CASE("tool binary reports errors on stderr with exit code 1") {
  const char* tool = std::getenv("MFMDEG_TOOL");
  if (!tool) {
    MESSAGE("MFMDEG_TOOL not set; skipping");
    return;
  }
  const fs::path dir = scratch("tool");
  fs::create_directories(dir);
  json bad = kOde;
  bad["params"]["vbar"] = 2;
  std::ofstream(dir / "bad.json") << bad.dump();
  const std::string cmd = std::string(tool) + " ode --config " + (dir / "bad.json").string() + " --out " +
                          (dir / "o").string() + " 2>" + (dir / "err.txt").string() + " >" +
                          (dir / "stdout.txt").string();
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 1);
  const std::string err = slurp(dir / "err.txt");
  CHECK(err == error_line("config", "unknown field params.vbar") + "\n");

  std::ofstream(dir / "good.json") << kOde.dump();
  const std::string ok = std::string(tool) + " ode --config " + (dir / "good.json").string() + " --out " +
                         (dir / "o").string() + " >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(ok.c_str())) == 0);
  CHECK(fs::exists(dir / "o" / "trajectory.csv"));
}
