#pragma once

#include <cstdint>
#include <vector>

#include "fsens/model.hpp"

namespace fsens {

// Joint state z = (x, m) of the forward-sensitivity process.
struct SensState {
  Vector x;   // n_X
  Matrix m;   // n_X x n_T
  long step_index = 0;
};

struct GradientEstimate {
  Vector mean;    // n_T
  Vector stderr_; // n_T; NaN when replicates == 1
  int replicates = 0;
  long steps_per_replicate = 0;
  long burn_in = 0;
  std::uint64_t seed = 0;
  std::string cost_name;
};

// One step of the joint recursion: x' = f(x, xi, theta),
// m' = df/dx(x, xi, theta) m + df/dtheta(x, xi, theta). Jacobians are
// evaluated at the pre-step x with the same xi as the state update.
SensState sens_step(const SystemModel& model, const SensState& z, const Noise& xi,
                    const Vector& theta);

struct GradientRun {
  Vector average;               // A over post-burn-in steps
  std::vector<Vector> deltas;   // thinned per-step terms (every `thin`-th)
  SensState final_state;
};

// Runs the joint process for n_steps, forming Delta_n = grad(x_n) * m_n and
// averaging over post-burn-in steps. Deterministic given rng.
GradientRun run_gradient(const SystemModel& model, const Vector& theta,
                         const CostFunction& cost, long n_steps, long burn_in,
                         const Vector& x0, const Matrix& m0, RngStream rng,
                         long thin = 0 /* 0 = keep no deltas */);

// Replicate r uses rng substream r of base_seed; replicates are independent
// and may run in parallel (FSENS_WORKERS caps the worker count).
GradientEstimate batch_gradient(const SystemModel& model, const Vector& theta,
                                const CostFunction& cost, long n_steps, long burn_in,
                                int replicates, std::uint64_t base_seed);

long default_burn_in(long n_steps);

}  // namespace fsens
