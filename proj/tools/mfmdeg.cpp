#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mfmdeg/cli.hpp"

int main(int argc, char** argv) {
  using namespace mfmdeg;
  CLI::App app{"Mean-field Markov decision evolutionary games"};
  app.require_subcommand(1, 1);
  std::string config_path, out_dir;
  std::int64_t seed = -1;
  for (const auto& name : cli::commands()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "replace the config seeds with this one")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", out_dir, "output directory");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    std::ifstream file(config_path);
    std::stringstream text;
    text << file.rdbuf();
    cli::ExperimentConfig config = cli::parse_config(text.str());
    if (!config.command.empty() && config.command != command)
      throw Error("config", "config command " + config.command + " does not match " + command);
    config.command = command;
    if (seed >= 0) config.seeds = {static_cast<std::uint64_t>(seed)};
    if (!out_dir.empty()) config.out = out_dir;
    const auto manifest = cli::run(config);
    std::cout << "wrote " << manifest.files.size() << " file(s) and manifest.json to " << config.out << "\n";
  } catch (const Error& e) {
    std::cerr << cli::error_line(e.code(), e.what()) << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << cli::error_line("internal", e.what()) << std::endl;
    return 1;
  }
  return 0;
}
