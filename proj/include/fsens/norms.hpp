#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsens/model.hpp"

namespace fsens {

// Base norms supported exactly: weighted-l1 (sum p_i|u_i|), l-infinity, l2.
struct BaseNorm {
  enum class Kind { L1Weighted, Linf, L2 };
  Kind kind = Kind::Linf;
  Vector weights;  // strictly positive; used for L1Weighted only

  static BaseNorm linf() { return {Kind::Linf, {}}; }
  static BaseNorm l2() { return {Kind::L2, {}}; }
  static BaseNorm l1(Vector p) {
    if ((p.array() <= 0).any()) throw std::invalid_argument("l1 weights must be positive");
    return {Kind::L1Weighted, std::move(p)};
  }

  double eval(const Vector& u) const;
};

// A norm u -> base(W u); W is the weight matrix evaluated at some point.
struct WeightedNorm {
  BaseNorm base;
  Matrix W;  // invertible

  double eval(const Vector& u) const { return base.eval(W * u); }
};

// Position-dependent weights A(x) (state side) and B(x) (parameter side).
struct FinslerWeight {
  std::function<Matrix(const Vector& x)> A;  // n_X x n_X, invertible
  std::function<Matrix(const Vector& x)> B;  // n_T x n_T, invertible
  BaseNorm norm_x;
  BaseNorm norm_theta;
  double inv_A_bound = 1.0;  // sup_x ||A(x)^{-1}||
  double b_lip = 0.0;        // Lipschitz constant of x -> ||B(x)|| w.r.t. d_A

  WeightedNorm x_norm_at(const Vector& x) const { return {norm_x, A(x)}; }
  WeightedNorm theta_norm_at(const Vector& x) const { return {norm_theta, B(x)}; }

  static FinslerWeight identity(int n_x, int n_theta, BaseNorm nx = BaseNorm::linf(),
                                BaseNorm nt = BaseNorm::linf());
};

double weighted_vector_norm(const FinslerWeight& w, const Vector& x, const Vector& u,
                            char which /* 'A' or 'B' */);

// Exact induced norm of the linear map E from (R^n, in) to (R^m, out).
// Linf input enumerates sign vectors and refuses above 16 dimensions.
// L2 input is supported with L2 output only (largest singular value).
double induced_operator_norm(const Matrix& E, const WeightedNorm& in,
                             const WeightedNorm& out);

// Exact induced norm of the bilinear map Q via unit-ball vertex enumeration.
// Inputs must be L1-weighted or Linf with dimension <= 12.
double induced_bilinear_norm(const Bilinear& Q, const WeightedNorm& in1,
                             const WeightedNorm& in2, const WeightedNorm& out);

// Chord upper bound on the Finsler path metric d_A: composite-trapezoid
// quadrature of t -> ||A(x + t(y-x))(y-x)|| over [0,1].
double metric_upper(const FinslerWeight& w, const Vector& x, const Vector& y,
                    int segments = 64);

// Exact minimum-cost perfect matching value (square cost matrix, n <= 512).
double assignment_cost(const Matrix& cost);

// Exact Wasserstein-1 distance between two uniform empirical measures with
// equal sample counts, under the given pairwise distance.
double wasserstein1_empirical(const std::vector<Vector>& samples1,
                              const std::vector<Vector>& samples2,
                              const std::function<double(const Vector&, const Vector&)>& dist);

}  // namespace fsens
