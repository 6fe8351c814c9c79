#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsens/model.hpp"
#include "fsens/norms.hpp"

namespace fsens {

// Samples (x, theta) points from a compact box; realizes the suprema of the
// coefficient definitions as sampled maxima.
struct RegionSampler {
  enum class Mode { Grid, UniformRandom };
  Mode mode = Mode::UniformRandom;
  Vector x_lo, x_hi;
  Vector theta_lo, theta_hi;
  int count = 256;
  std::uint64_t seed = 0;

  // Points are clipped to (actually rejected outside of) the state domain.
  std::vector<std::pair<Vector, Vector>> points(const StateDomain& domain) const;
};

enum class Coefficient { X, Theta, X2, Theta2, XTheta };

std::string coefficient_name(Coefficient c);

struct CoefficientEstimate {
  Coefficient which;
  double sup = 0.0;            // max over sampled points
  double stderr_at_sup = 0.0;  // Monte Carlo standard error at the maximizing point
  std::vector<double> per_point;
  std::vector<double> per_point_stderr;
  int n_noise = 0;
  int n_points = 0;
};

// Monte Carlo estimate of the coefficient function at each sampled (x, theta).
// First-order coefficients average the squared induced operator norm and take
// the square root; second-order coefficients average the bilinear norm.
CoefficientEstimate estimate_L(const SystemModel& model, const FinslerWeight& weight,
                               const RegionSampler& sampler, Coefficient which,
                               int n_noise, RngStream rng);

struct LyapunovFit {
  double beta = 0.0;
  double K = 0.0;
  double max_violation = 0.0;  // max over points of lhs - (beta*V + K)
  bool degenerate = false;     // all sampled V values identical
};

// Fits (E[V(f(x,xi,theta))^p])^{1/p} ~ beta*V(x) + K by least squares over
// sampled x. A constant V is flagged degenerate (beta = 0, K = mean response).
LyapunovFit check_lyapunov(const SystemModel& model, const Vector& theta,
                           const std::function<double(const Vector&)>& V,
                           const std::vector<Vector>& points, int n_noise, double p,
                           RngStream rng);

struct InterconnectionResult {
  bool feasible = false;
  double eta1 = 1.0;
  double eta2 = 1.0;
};

// Feasibility of K1*K2 < (1-alpha1)(1-alpha2); on success returns eta1 = 1 and
// eta2 in the open interval (K1/(1-alpha2), (1-alpha1)/K2).
InterconnectionResult check_interconnection(double alpha1, double alpha2, double K1,
                                            double K2);

struct ContractionReport {
  double K_X = 0.0, K_Theta = 0.0, K_X2 = 0.0, K_Theta2 = 0.0, K_XTheta = 0.0;
  double se_X = 0.0, se_Theta = 0.0, se_X2 = 0.0, se_Theta2 = 0.0, se_XTheta = 0.0;
  double lyapunov_beta = 0.0, lyapunov_K = 0.0;
  bool has_etas = false;
  double etas[5] = {0, 0, 0, 0, 0};
  bool contraction_ok = false;  // K_X + 2 * max stderr < 1
  int n_noise = 0, n_points = 0;
  std::uint64_t seed = 0;
  double max_stderr() const;
};

ContractionReport certify_contraction(const SystemModel& model,
                                      const FinslerWeight& weight,
                                      const RegionSampler& sampler, int n_noise,
                                      RngStream rng);

struct JointMetric {
  double eta1 = 1.0, eta2 = 1.0, eta3 = 1.0, eta4 = 1.0, eta5 = 1.0;
  double h_beta = 0.0;  // fitted drift slope of h along the joint process
  double h_K = 0.0;     // fitted drift constant of h
  bool h_fit_poor = false;
  std::function<double(const Vector& x, const Matrix& m)> h;
};

// Constructs the weights of the joint metric on (x, m) from the estimated
// coefficients, with multiplicative slack 1.05 on each strict inequality.
// Throws std::runtime_error naming the failing inequality when infeasible.
JointMetric build_joint_metric(const ContractionReport& report, double b_lip,
                               const SystemModel& model, const FinslerWeight& weight,
                               const Vector& theta, RngStream rng);

struct KernelContractionResult {
  double max_ratio = 0.0;
  int pairs_used = 0;
};

// Diagnostic: common-random-numbers estimate of the one-step coupled distance
// ratio, with both sides measured by the chord upper bound.
KernelContractionResult empirical_kernel_contraction(
    const SystemModel& model, const Vector& theta, const FinslerWeight& weight,
    const RegionSampler& pair_sampler, int n_noise, double p, RngStream rng);

struct ParameterLipschitzResult {
  double lhs = 0.0;  // coupled-cost estimate of d_{p,A}(mu P_theta, mu P_{theta+dt})
  double lhs_stderr = 0.0;
  double rhs = 0.0;  // K_Theta * ||B dtheta||_{L^p(mu)}
  bool violated = false;  // lhs > rhs + 3 * stderr
};

ParameterLipschitzResult check_parameter_lipschitz(
    const SystemModel& model, const FinslerWeight& weight, const Vector& theta,
    const Vector& dtheta, double K_Theta, const RegionSampler& mu_sampler, int n,
    double p, RngStream rng);

}  // namespace fsens
