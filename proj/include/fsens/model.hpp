#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsens/rng.hpp"

namespace fsens {

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Matrix = Eigen::MatrixXd;

// Noise values are model-owned; the engine only threads them through.
using Noise = Eigen::VectorXd;

// Bilinear map R^{n1} x R^{n2} -> R^{n_out}; comps[i](j,k) is the (j,k)
// coefficient of output component i.
struct Bilinear {
  std::vector<Matrix> comps;

  Vector apply(const Vector& u, const Vector& v) const {
    Vector out(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = u.dot(comps[i] * v);
    return out;
  }

  Bilinear scaled(double c) const {
    Bilinear q = *this;
    for (auto& m : q.comps) m *= c;
    return q;
  }
};

// Closed convex state domain: either all of R^n or an axis-aligned box.
struct StateDomain {
  bool bounded = false;
  Vector lo, hi;

  static StateDomain all(int) { return StateDomain{}; }
  static StateDomain box(Vector lo_, Vector hi_) {
    return StateDomain{true, std::move(lo_), std::move(hi_)};
  }

  bool contains(const Vector& x, double tol = 0.0) const {
    if (!bounded) return true;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
    return true;
  }
};

// A parameterized random recursion x' = f(x, xi, theta) with derivatives.
struct SystemModel {
  int state_dim = 0;
  int param_dim = 0;

  std::function<Vector(const Vector& x, const Noise& xi, const Vector& theta)> step;
  std::function<Matrix(const Vector&, const Noise&, const Vector&)> jac_x;       // n_X x n_X
  std::function<Matrix(const Vector&, const Noise&, const Vector&)> jac_theta;   // n_X x n_T

  std::function<Bilinear(const Vector&, const Noise&, const Vector&)> hess_xx;         // optional
  std::function<Bilinear(const Vector&, const Noise&, const Vector&)> hess_thetatheta; // optional
  std::function<Bilinear(const Vector&, const Noise&, const Vector&)> hess_xtheta;     // optional

  std::function<Noise(RngStream&)> sample_noise;

  StateDomain state_domain;

  // Parameter-region predicate; empty means all of R^{n_T} is admissible.
  std::function<bool(const Vector& theta)> param_in_region;
  std::string param_region_desc;

  bool has_second_order() const {
    return static_cast<bool>(hess_xx) && static_cast<bool>(hess_thetatheta) &&
           static_cast<bool>(hess_xtheta);
  }

  bool theta_admissible(const Vector& theta) const {
    return !param_in_region || param_in_region(theta);
  }
};

struct CostFunction {
  std::function<double(const Vector&)> eval;
  std::function<RowVector(const Vector&)> grad;
  std::function<Matrix(const Vector&)> hess;  // optional
  std::string name;
};

// --- simulation -------------------------------------------------------------

// Trajectory of length n+1 with trajectory[0] = x0. Deterministic given rng.
std::vector<Vector> simulate(const SystemModel& model, const Vector& theta,
                             const Vector& x0, int n_steps, RngStream rng);

// --- derivative validation ---------------------------------------------------

struct DerivativeCheck {
  std::string which;  // "jac_x", "jac_theta", "hess_xx", ...
  double max_rel_error = 0.0;
  bool ok = true;
  Vector worst_point;  // state at which the max error occurred
};

struct ValidationReport {
  std::vector<DerivativeCheck> checks;
  bool all_ok = true;
  std::string failure_detail;  // set when a model output was non-finite
};

// Central finite differences against the analytic derivatives, over sampled
// (x, xi) pairs. Non-finite model output is reported as a failure.
ValidationReport validate_derivatives(const SystemModel& model, const Vector& theta,
                                      const std::vector<Vector>& points,
                                      RngStream rng, double tol_first = 1e-5,
                                      double tol_second = 1e-4);

ValidationReport validate_cost(const CostFunction& cost,
                               const std::vector<Vector>& points, double tol = 1e-5);

}  // namespace fsens
