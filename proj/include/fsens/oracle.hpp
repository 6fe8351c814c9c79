#pragma once

#include <cstdint>

#include "fsens/model.hpp"
#include "fsens/sensitivity.hpp"

namespace fsens {

struct StationaryCostEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;  // NaN when replicates == 1
  long n_steps = 0;
  long burn_in = 0;
  int replicates = 0;
  std::uint64_t seed = 0;
};

// Replicate-averaged post-burn-in mean of e(x_n) along long simulations.
// Uses simulate's code path only; independent of the sensitivity recursion.
StationaryCostEstimate stationary_cost(const SystemModel& model, const Vector& theta,
                                       const CostFunction& cost, long n_steps,
                                       long burn_in, int replicates,
                                       std::uint64_t seed);

// Central finite differences of the stationary cost. With crn the +/- runs of
// each component share noise streams per replicate.
GradientEstimate fd_gradient(const SystemModel& model, const Vector& theta,
                             const CostFunction& cost, const Vector& h, long n_steps,
                             long burn_in, int replicates, std::uint64_t seed,
                             bool crn = true);

Vector default_fd_step(const Vector& theta, double scale = 1e-3);

}  // namespace fsens
