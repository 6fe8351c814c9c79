#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>

#include "fsens/model.hpp"
#include "fsens/models.hpp"

namespace fsens {

inline constexpr const char* kVersion = "0.1.0";

// Exit statuses are a stable contract.
inline constexpr int kStatusOk = 0;
inline constexpr int kStatusConfigError = 2;
inline constexpr int kStatusModelPrecondition = 3;
inline constexpr int kStatusNumericalFailure = 4;

struct RunConfig {
  std::string command;        // certify | estimate | oracle | compare | validate
  nlohmann::json model;       // tagged model config, key "type"
  Vector theta;               // flattened for matrix-valued parameters
  bool theta_given = false;
  std::string cost = "coordinate(0)";
  long n_steps = 100000;
  long burn_in = -1;          // -1: default_burn_in(n_steps)
  int replicates = 4;
  std::uint64_t seed = 1;
  double fd_h = 1e-3;

  struct Region {
    bool set = false;
    Vector x_lo, x_hi, theta_lo, theta_hi;
  } region;

  int n_noise = 512;
  int n_points = 128;

  std::string output_path;          // empty: stdout only
  std::string output_format = "json";  // json | csv

  // Throws std::invalid_argument with a field-level message on bad input.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;  // normalized echo; reproduces the run
};

struct RunResult {
  int status = kStatusOk;
  nlohmann::json doc;
};

// Dispatches the configured workflow. Never throws; failures are encoded in
// the status and an "error" field of the document.
RunResult run(const RunConfig& config);

// coordinate(i) and quadratic; throws std::invalid_argument listing the
// registered names when unknown.
CostFunction cost_registry_lookup(const std::string& name, int state_dim);

// Materializes the tagged model config.
ModelBundle build_model(const nlohmann::json& model_cfg);

}  // namespace fsens
