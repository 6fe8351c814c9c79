#include "fsens/norms.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>

namespace fsens {

double BaseNorm::eval(const Vector& u) const {
  switch (kind) {
    case Kind::L1Weighted:
      if (weights.size() == 0) return u.cwiseAbs().sum();
      if (weights.size() != u.size())
        throw std::invalid_argument("BaseNorm: weight/vector size mismatch");
      return (weights.array() * u.array().abs()).sum();
    case Kind::Linf:
      return u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
    case Kind::L2:
      return u.norm();
  }
  return 0.0;
}

FinslerWeight FinslerWeight::identity(int n_x, int n_theta, BaseNorm nx, BaseNorm nt) {
  FinslerWeight w;
  w.A = [n_x](const Vector&) { return Matrix::Identity(n_x, n_x); };
  w.B = [n_theta](const Vector&) { return Matrix::Identity(n_theta, n_theta); };
  w.norm_x = std::move(nx);
  w.norm_theta = std::move(nt);
  w.inv_A_bound = 1.0;
  w.b_lip = 0.0;
  return w;
}

double weighted_vector_norm(const FinslerWeight& w, const Vector& x, const Vector& u,
                            char which) {
  if (which == 'A') {
    Matrix A = w.A(x);
    if (A.cols() != u.size()) throw std::invalid_argument("weighted_vector_norm: dim mismatch");
    return w.norm_x.eval(A * u);
  }
  if (which == 'B') {
    Matrix B = w.B(x);
    if (B.cols() != u.size()) throw std::invalid_argument("weighted_vector_norm: dim mismatch");
    return w.norm_theta.eval(B * u);
  }
  throw std::invalid_argument("weighted_vector_norm: which must be 'A' or 'B'");
}

namespace {

// Vertices of the unit ball of base(W u) <= 1. For bilinear enumeration signs
// can be dropped on both arguments (bilinearity flips only the overall sign).
std::vector<Vector> unit_ball_vertices(const WeightedNorm& n, bool signed_enum) {
  const Eigen::Index d = n.W.cols();
  Matrix Winv = n.W.inverse();
  std::vector<Vector> verts;
  switch (n.base.kind) {
    case BaseNorm::Kind::L1Weighted: {
      for (Eigen::Index j = 0; j < d; ++j) {
        double p = n.base.weights.size() ? n.base.weights(j) : 1.0;
        verts.push_back(Winv.col(j) / p);
        if (signed_enum) verts.push_back(-Winv.col(j) / p);
      }
      break;
    }
    case BaseNorm::Kind::Linf: {
      if (d > 12) throw std::invalid_argument("Linf vertex enumeration limited to 12 dims");
      const std::size_t total = std::size_t{1} << d;
      for (std::size_t mask = 0; mask < total; ++mask) {
        if (!signed_enum && (mask & 1) == 0 && d > 0) continue;  // fix first sign
        Vector s(d);
        for (Eigen::Index j = 0; j < d; ++j) s(j) = (mask >> j) & 1 ? 1.0 : -1.0;
        verts.push_back(Winv * s);
      }
      if (d == 0) verts.push_back(Vector(0));
      break;
    }
    case BaseNorm::Kind::L2:
      throw std::invalid_argument("L2 unit ball has no vertex enumeration");
  }
  return verts;
}

}  // namespace

double induced_operator_norm(const Matrix& E, const WeightedNorm& in,
                             const WeightedNorm& out) {
  if (in.W.cols() != E.cols() || out.W.cols() != E.rows())
    throw std::invalid_argument("induced_operator_norm: dimension mismatch");
  const Eigen::Index d = E.cols();
  switch (in.base.kind) {
    case BaseNorm::Kind::L1Weighted: {
      Matrix M = E * in.W.inverse();
      double best = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        double p = in.base.weights.size() ? in.base.weights(j) : 1.0;
        best = std::max(best, out.eval(M.col(j)) / p);
      }
      return best;
    }
    case BaseNorm::Kind::Linf: {
      if (out.base.kind == BaseNorm::Kind::Linf) {
        // max abs row sum; exact for sup-norm to sup-norm, any dimension
        Matrix M = out.W * E * in.W.inverse();
        return d == 0 ? 0.0 : M.cwiseAbs().rowwise().sum().maxCoeff();
      }
      if (d > 16)
        throw std::invalid_argument(
            "induced_operator_norm: Linf input with n > 16 requires an upper-bound mode");
      Matrix M = E * in.W.inverse();
      double best = 0.0;
      const std::size_t total = d > 0 ? (std::size_t{1} << (d - 1)) : 1;
      Vector s(d);
      for (std::size_t mask = 0; mask < total; ++mask) {
        s.setOnes();  // first sign fixed (norm is symmetric)
        for (Eigen::Index j = 1; j < d; ++j)
          if ((mask >> (j - 1)) & 1) s(j) = -1.0;
        best = std::max(best, out.eval(M * s));
      }
      return best;
    }
    case BaseNorm::Kind::L2: {
      if (out.base.kind != BaseNorm::Kind::L2)
        throw std::invalid_argument("induced_operator_norm: L2 input requires L2 output");
      Matrix M = out.W * E * in.W.inverse();
      return M.jacobiSvd().singularValues()(0);
    }
  }
  return 0.0;
}

namespace {

std::size_t vertex_count(const WeightedNorm& n) {
  const Eigen::Index d = n.W.cols();
  switch (n.base.kind) {
    case BaseNorm::Kind::L1Weighted:
      return static_cast<std::size_t>(d);
    case BaseNorm::Kind::Linf:
      return d > 0 ? std::size_t{1} << (d - 1) : 1;
    case BaseNorm::Kind::L2:
      return std::size_t{0} - 1;  // no vertices; never pick this side
  }
  return 0;
}

}  // namespace

double induced_bilinear_norm(const Bilinear& Q, const WeightedNorm& in1,
                             const WeightedNorm& in2, const WeightedNorm& out) {
  if (Q.comps.empty()) return 0.0;
  // Enumerate vertices of the cheaper argument; the other argument is resolved
  // exactly as an induced operator norm of the frozen slice.
  const bool swap = vertex_count(in2) < vertex_count(in1);
  const WeightedNorm& enum_side = swap ? in2 : in1;
  const WeightedNorm& lin_side = swap ? in1 : in2;

  auto verts = unit_ball_vertices(enum_side, false);
  const Eigen::Index n_out = static_cast<Eigen::Index>(Q.comps.size());
  const Eigen::Index n_lin = lin_side.W.cols();
  double best = 0.0;
  Matrix G(n_out, n_lin);
  for (const Vector& u : verts) {
    for (Eigen::Index i = 0; i < n_out; ++i)
      G.row(i) = swap ? RowVector(u.transpose() * Q.comps[static_cast<std::size_t>(i)].transpose())
                      : RowVector(u.transpose() * Q.comps[static_cast<std::size_t>(i)]);
    best = std::max(best, induced_operator_norm(G, lin_side, out));
  }
  return best;
}

double metric_upper(const FinslerWeight& w, const Vector& x, const Vector& y,
                    int segments) {
  if (segments < 1) throw std::invalid_argument("metric_upper: segments >= 1");
  Vector d = y - x;
  if (d.isZero(0.0)) return 0.0;
  auto integrand = [&](double t) { return w.norm_x.eval(w.A(x + t * d) * d); };
  double sum = 0.5 * (integrand(0.0) + integrand(1.0));
  for (int k = 1; k < segments; ++k) sum += integrand(static_cast<double>(k) / segments);
  return sum / segments;
}

double assignment_cost(const Matrix& cost) {
  // Shortest augmenting path (Jonker-Volgenant style), O(n^3).
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("assignment_cost: square matrix required");
  if (n == 0) return 0.0;
  if (n > 512) throw std::invalid_argument("assignment_cost: n > 512 not supported");
  const double INF = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, INF);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      int i0 = p[static_cast<std::size_t>(j0)], j1 = -1;
      double delta = INF;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (int j = 1; j <= n; ++j) total += cost(p[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

double wasserstein1_empirical(const std::vector<Vector>& samples1,
                              const std::vector<Vector>& samples2,
                              const std::function<double(const Vector&, const Vector&)>& dist) {
  if (samples1.size() != samples2.size())
    throw std::invalid_argument("wasserstein1_empirical: sample counts must match");
  const int n = static_cast<int>(samples1.size());
  if (n == 0) return 0.0;
  Matrix cost(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cost(i, j) = dist(samples1[static_cast<std::size_t>(i)], samples2[static_cast<std::size_t>(j)]);
  return assignment_cost(cost) / n;
}

}  // namespace fsens
