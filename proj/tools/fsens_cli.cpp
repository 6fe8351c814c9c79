// fsens command-line front end: one config file, one run.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "fsens/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"stationary-cost derivative estimation and contraction certification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_path, output_format;
  std::uint64_t seed = 0;
  long n_steps = 0;
  int replicates = 0;
  bool seed_set = false, n_steps_set = false, replicates_set = false;

  std::vector<CLI::App*> subs;
  for (const char* name : {"certify", "estimate", "oracle", "compare", "validate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration (JSON)")->required();
    sub->add_option("--seed", seed)->each([&](const std::string&) { seed_set = true; });
    sub->add_option("--n-steps", n_steps)->each([&](const std::string&) { n_steps_set = true; });
    sub->add_option("--replicates", replicates)
        ->each([&](const std::string&) { replicates_set = true; });
    sub->add_option("--output", output_path, "result file path");
    sub->add_option("--format", output_format, "json or csv");
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  nlohmann::json j;
  {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot open config file '" << config_path << "'\n";
      return fsens::kStatusConfigError;
    }
    try {
      in >> j;
    } catch (const std::exception& e) {
      std::cerr << "error: config parse: " << e.what() << '\n';
      return fsens::kStatusConfigError;
    }
  }

  j["command"] = app.get_subcommands().front()->get_name();
  if (seed_set) j["seed"] = seed;
  if (n_steps_set) j["n_steps"] = n_steps;
  if (replicates_set) j["replicates"] = replicates;
  if (!output_path.empty()) j["output"]["path"] = output_path;
  if (!output_format.empty()) j["output"]["format"] = output_format;

  fsens::RunConfig cfg;
  try {
    cfg = fsens::RunConfig::from_json(j);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fsens::kStatusConfigError;
  }

  fsens::RunResult res = fsens::run(cfg);
  std::cout << res.doc.dump(2) << std::endl;
  return res.status;
}
