#include "tlm/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"TLM propagator: time- and frequency-domain runs from a JSON configuration"};
  std::string command;
  std::string config_path;
  tlm::RunOptions options;
  app.add_option("command", command, "run-time | run-freq | sweep | impulse | check | validate")
      ->required()
      ->check(CLI::IsMember(tlm::command_names()));
  app.add_option("--config", config_path, "configuration file (JSON)")->required();
  app.add_option("--out", options.out_dir, "output directory (overrides output.dir)");
  app.add_option("--threads", options.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", options.seed, "seed for noise excitations");
  CLI11_PARSE(app, argc, argv);
  return tlm::run_command(command, config_path, options, std::cout, std::cerr);
}
