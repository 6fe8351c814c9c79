#pragma once

#include <utility>
#include <vector>

#include "fsens/model.hpp"
#include "fsens/norms.hpp"

namespace fsens {

struct ModelBundle {
  SystemModel model;
  FinslerWeight weight;
  Vector default_theta;  // empty when the model has no natural default
};

// --- linear AR(1) ------------------------------------------------------------
// x' = a x + theta + eps * xi; analytic stationary moments make it the
// acceptance workhorse.
struct LinearAR1Config {
  double a = 0.5;
  double eps = 0.1;
  enum class NoiseKind { Gaussian, UniformSymmetric } noise = NoiseKind::Gaussian;
};

ModelBundle make_ar1(const LinearAR1Config& cfg);

// --- stochastic neural network -----------------------------------------------
// N logistic units; each step a random subset of edges is active.
// f_i = sigma(sum_k xi_{i,k} theta_{i,k} x_k + b_i), xi_{i,k} ~ Bernoulli(1-rho).
struct StochasticNNConfig {
  int N = 3;
  std::vector<std::pair<int, int>> edges;  // (i, k): edge from k into i
  double rho = 0.5;                        // edge drop probability
  Matrix theta;                            // N x N weights (construction check point)
  Vector biases;                           // fixed, not differentiated

  static StochasticNNConfig fully_connected(int n, double rho, double weight);
};

// Throws std::invalid_argument when ||theta||_inf (1 - rho^|E|)^{1/2} >= 4.
ModelBundle make_stochastic_nn(const StochasticNNConfig& cfg);

// Flattened parameter index of weight (i, k).
inline int nn_theta_index(int N, int i, int k) { return i * N + k; }

// --- two-dimensional weighted-metric system -----------------------------------
// f1 = x1/2 + theta + eps*xi1, f2 = x1 x2 / 2 + eps*xi2, with exponential
// weights g1, g2 defining the metric.
struct Example2Config {
  double eps = 0.05;
  double p1 = 1.0;
  double p2 = 0.1;
  int moment_mc_samples = 200000;  // Monte Carlo budget for the Q, R moments
  std::uint64_t moment_mc_seed = 2718;
};

struct Example2Moments {
  double Q = 0.0;  // (E |xi2|^2)^{1/2}
  double R = 0.0;  // (E exp(4 eps |xi1|))^{1/2}
};

Example2Moments example2_moments(const Example2Config& cfg);

// Throws std::invalid_argument naming the violated setup condition.
ModelBundle make_example2(const Example2Config& cfg);

double example2_theta_max();  // (1/4) log 2

}  // namespace fsens
