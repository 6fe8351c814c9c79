#include "fsens/models.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fsens {

namespace {

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

Bilinear zero_bilinear(int n_out, int n1, int n2) {
  Bilinear q;
  q.comps.assign(static_cast<std::size_t>(n_out), Matrix::Zero(n1, n2));
  return q;
}

}  // namespace

ModelBundle make_ar1(const LinearAR1Config& cfg) {
  if (std::abs(cfg.a) >= 1)
    throw std::invalid_argument("make_ar1: |a| must be < 1");
  if (cfg.eps < 0) throw std::invalid_argument("make_ar1: eps must be >= 0");

  const double a = cfg.a, eps = cfg.eps;
  const auto noise = cfg.noise;

  SystemModel m;
  m.state_dim = 1;
  m.param_dim = 1;
  m.step = [a, eps](const Vector& x, const Noise& xi, const Vector& th) {
    return Vector::Constant(1, a * x(0) + th(0) + eps * xi(0));
  };
  m.jac_x = [a](const Vector&, const Noise&, const Vector&) {
    return Matrix::Constant(1, 1, a);
  };
  m.jac_theta = [](const Vector&, const Noise&, const Vector&) {
    return Matrix::Constant(1, 1, 1.0);
  };
  auto zero = [](const Vector&, const Noise&, const Vector&) {
    return zero_bilinear(1, 1, 1);
  };
  m.hess_xx = zero;
  m.hess_thetatheta = zero;
  m.hess_xtheta = zero;
  m.sample_noise = [noise](RngStream& rng) {
    double v = noise == LinearAR1Config::NoiseKind::Gaussian
                   ? rng.gaussian()
                   // unit-variance symmetric uniform
                   : rng.uniform(-std::sqrt(3.0), std::sqrt(3.0));
    return Noise::Constant(1, v);
  };
  m.state_domain = StateDomain::all(1);

  return ModelBundle{std::move(m), FinslerWeight::identity(1, 1)};
}

StochasticNNConfig StochasticNNConfig::fully_connected(int n, double rho, double weight) {
  StochasticNNConfig cfg;
  cfg.N = n;
  cfg.rho = rho;
  cfg.theta = Matrix::Constant(n, n, weight);
  cfg.biases = Vector::Zero(n);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) cfg.edges.emplace_back(i, k);
  return cfg;
}

ModelBundle make_stochastic_nn(const StochasticNNConfig& cfg) {
  const int N = cfg.N;
  if (N < 1) throw std::invalid_argument("make_stochastic_nn: N must be >= 1");
  if (cfg.rho < 0 || cfg.rho > 1)
    throw std::invalid_argument("make_stochastic_nn: rho must lie in [0,1]");
  if (cfg.theta.rows() != N || cfg.theta.cols() != N)
    throw std::invalid_argument("make_stochastic_nn: theta must be N x N");
  if (cfg.biases.size() != N)
    throw std::invalid_argument("make_stochastic_nn: biases must have length N");
  for (auto& [i, k] : cfg.edges)
    if (i < 0 || i >= N || k < 0 || k >= N)
      throw std::invalid_argument("make_stochastic_nn: edge index out of range");

  // Edge mask; weights off the edge set never act.
  Matrix mask = Matrix::Zero(N, N);
  for (auto& [i, k] : cfg.edges) mask(i, k) = 1.0;

  const double rho = cfg.rho;
  const std::size_t n_edges = cfg.edges.size();
  auto contraction_margin = [mask, rho, n_edges, N](const Vector& theta_flat) {
    // induced infinity norm of the (masked) weight matrix
    double row_max = 0;
    for (int i = 0; i < N; ++i) {
      double s = 0;
      for (int k = 0; k < N; ++k)
        s += mask(i, k) * std::abs(theta_flat(nn_theta_index(N, i, k)));
      row_max = std::max(row_max, s);
    }
    double active = std::sqrt(1.0 - std::pow(rho, static_cast<double>(n_edges)));
    return row_max * active;
  };

  Vector theta0(N * N);
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k) theta0(nn_theta_index(N, i, k)) = cfg.theta(i, k);
  if (contraction_margin(theta0) >= 4.0) {
    std::ostringstream os;
    os << "make_stochastic_nn: contraction precondition violated: "
       << "||theta||_inf * (1 - rho^|E|)^(1/2) = " << contraction_margin(theta0)
       << " >= 4";
    throw std::invalid_argument(os.str());
  }

  const Vector b = cfg.biases;

  // u_i = sum_k xi(i,k) theta(i,k) x_k + b_i; xi flattened row-major like theta
  auto unit_inputs = [mask, b, N](const Vector& x, const Noise& xi, const Vector& th) {
    Vector u = b;
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < N; ++k) {
        int idx = nn_theta_index(N, i, k);
        u(i) += mask(i, k) * xi(idx) * th(idx) * x(k);
      }
    return u;
  };

  SystemModel m;
  m.state_dim = N;
  m.param_dim = N * N;
  m.step = [unit_inputs, N](const Vector& x, const Noise& xi, const Vector& th) {
    Vector u = unit_inputs(x, xi, th);
    Vector out(N);
    for (int i = 0; i < N; ++i) out(i) = logistic(u(i));
    return out;
  };
  m.jac_x = [unit_inputs, mask, N](const Vector& x, const Noise& xi, const Vector& th) {
    Vector u = unit_inputs(x, xi, th);
    Matrix J(N, N);
    for (int i = 0; i < N; ++i) {
      double s = logistic(u(i));
      double sp = s * (1 - s);
      for (int j = 0; j < N; ++j) {
        int idx = nn_theta_index(N, i, j);
        J(i, j) = sp * mask(i, j) * xi(idx) * th(idx);
      }
    }
    return J;
  };
  m.jac_theta = [unit_inputs, mask, N](const Vector& x, const Noise& xi, const Vector& th) {
    Vector u = unit_inputs(x, xi, th);
    Matrix J = Matrix::Zero(N, N * N);
    for (int i = 0; i < N; ++i) {
      double s = logistic(u(i));
      double sp = s * (1 - s);
      for (int k = 0; k < N; ++k) {
        int idx = nn_theta_index(N, i, k);
        J(i, idx) = sp * mask(i, k) * xi(idx) * x(k);
      }
    }
    return J;
  };
  m.hess_xx = [unit_inputs, mask, N](const Vector& x, const Noise& xi, const Vector& th) {
    Vector u = unit_inputs(x, xi, th);
    Bilinear q = zero_bilinear(N, N, N);
    for (int i = 0; i < N; ++i) {
      double s = logistic(u(i));
      double spp = s * (1 - s) * (1 - 2 * s);
      for (int j = 0; j < N; ++j) {
        double wj = mask(i, j) * xi(nn_theta_index(N, i, j)) * th(nn_theta_index(N, i, j));
        for (int k = 0; k < N; ++k) {
          double wk = mask(i, k) * xi(nn_theta_index(N, i, k)) * th(nn_theta_index(N, i, k));
          q.comps[static_cast<std::size_t>(i)](j, k) = spp * wj * wk;
        }
      }
    }
    return q;
  };
  m.hess_xtheta = [unit_inputs, mask, N](const Vector& x, const Noise& xi, const Vector& th) {
    Vector u = unit_inputs(x, xi, th);
    Bilinear q = zero_bilinear(N, N, N * N);
    for (int i = 0; i < N; ++i) {
      double s = logistic(u(i));
      double sp = s * (1 - s);
      double spp = sp * (1 - 2 * s);
      for (int j = 0; j < N; ++j) {
        double wj = mask(i, j) * xi(nn_theta_index(N, i, j)) * th(nn_theta_index(N, i, j));
        for (int k = 0; k < N; ++k) {
          int idx = nn_theta_index(N, i, k);  // parameter (l=i, k)
          double xik = mask(i, k) * xi(idx);
          double v = spp * xik * x(k) * wj;
          if (j == k) v += sp * mask(i, j) * xi(nn_theta_index(N, i, j));
          q.comps[static_cast<std::size_t>(i)](j, idx) = v;
        }
      }
    }
    return q;
  };
  m.hess_thetatheta = [unit_inputs, mask, N](const Vector& x, const Noise& xi,
                                             const Vector& th) {
    Vector u = unit_inputs(x, xi, th);
    Bilinear q = zero_bilinear(N, N * N, N * N);
    for (int i = 0; i < N; ++i) {
      double s = logistic(u(i));
      double spp = s * (1 - s) * (1 - 2 * s);
      for (int k = 0; k < N; ++k) {
        double ak = mask(i, k) * xi(nn_theta_index(N, i, k)) * x(k);
        for (int k2 = 0; k2 < N; ++k2) {
          double ak2 = mask(i, k2) * xi(nn_theta_index(N, i, k2)) * x(k2);
          q.comps[static_cast<std::size_t>(i)](nn_theta_index(N, i, k),
                                               nn_theta_index(N, i, k2)) = spp * ak * ak2;
        }
      }
    }
    return q;
  };
  m.sample_noise = [mask, rho, N](RngStream& rng) {
    Noise xi = Noise::Zero(N * N);
    for (int i = 0; i < N; ++i)
      for (int k = 0; k < N; ++k)
        if (mask(i, k) > 0)
          xi(nn_theta_index(N, i, k)) = rng.bernoulli(1.0 - rho) ? 1.0 : 0.0;
    return xi;
  };
  m.state_domain = StateDomain::box(Vector::Zero(N), Vector::Ones(N));
  m.param_in_region = [contraction_margin](const Vector& th) {
    return contraction_margin(th) < 4.0;
  };
  m.param_region_desc = "||theta||_inf * (1 - rho^|E|)^(1/2) < 4";

  return ModelBundle{std::move(m), FinslerWeight::identity(N, N * N), theta0};
}

Example2Moments example2_moments(const Example2Config& cfg) {
  RngStream rng(cfg.moment_mc_seed, 1);
  double q_acc = 0, r_acc = 0;
  for (int k = 0; k < cfg.moment_mc_samples; ++k) {
    double xi1 = rng.uniform(-0.5, 0.5);
    double xi2 = rng.gaussian();
    q_acc += xi2 * xi2;
    r_acc += std::exp(4.0 * cfg.eps * std::abs(xi1));
  }
  Example2Moments m;
  m.Q = std::sqrt(q_acc / cfg.moment_mc_samples);
  m.R = std::sqrt(r_acc / cfg.moment_mc_samples);
  return m;
}

double example2_theta_max() { return 0.25 * std::log(2.0); }

ModelBundle make_example2(const Example2Config& cfg) {
  const double thmax = example2_theta_max();
  const double root2_4 = std::pow(2.0, 0.25);

  if (!(cfg.eps >= 0 && cfg.eps < 1))
    throw std::invalid_argument("make_example2: condition (ii) violated: eps must lie in [0,1)");
  Example2Moments mom = example2_moments(cfg);
  if (!((1 + cfg.eps * mom.Q) * mom.R < root2_4)) {
    std::ostringstream os;
    os << "make_example2: condition (ii) violated: (1 + eps*Q)*R = "
       << (1 + cfg.eps * mom.Q) * mom.R << " >= 2^(1/4)";
    throw std::invalid_argument(os.str());
  }
  if (!(cfg.p1 > 0 && cfg.p2 > 0))
    throw std::invalid_argument("make_example2: condition (iii) violated: p1, p2 must be > 0");
  if (!(1 + cfg.p2 / cfg.p1 < root2_4)) {
    std::ostringstream os;
    os << "make_example2: condition (iii) violated: 1 + p2/p1 = " << 1 + cfg.p2 / cfg.p1
       << " >= 2^(1/4)";
    throw std::invalid_argument(os.str());
  }

  const double eps = cfg.eps;
  SystemModel m;
  m.state_dim = 2;
  m.param_dim = 1;
  m.step = [eps](const Vector& x, const Noise& xi, const Vector& th) {
    Vector out(2);
    out(0) = 0.5 * x(0) + th(0) + eps * xi(0);
    out(1) = 0.5 * x(0) * x(1) + eps * xi(1);
    return out;
  };
  m.jac_x = [](const Vector& x, const Noise&, const Vector&) {
    Matrix J(2, 2);
    J << 0.5, 0.0, 0.5 * x(1), 0.5 * x(0);
    return J;
  };
  m.jac_theta = [](const Vector&, const Noise&, const Vector&) {
    Matrix J(2, 1);
    J << 1.0, 0.0;
    return J;
  };
  m.hess_xx = [](const Vector&, const Noise&, const Vector&) {
    Bilinear q = zero_bilinear(2, 2, 2);
    q.comps[1](0, 1) = 0.5;
    q.comps[1](1, 0) = 0.5;
    return q;
  };
  m.hess_thetatheta = [](const Vector&, const Noise&, const Vector&) {
    return zero_bilinear(2, 1, 1);
  };
  m.hess_xtheta = [](const Vector&, const Noise&, const Vector&) {
    return zero_bilinear(2, 2, 1);
  };
  m.sample_noise = [](RngStream& rng) {
    Noise xi(2);
    xi(0) = rng.uniform(-0.5, 0.5);
    xi(1) = rng.gaussian();
    return xi;
  };
  m.state_domain = StateDomain::all(2);
  m.param_in_region = [thmax](const Vector& th) {
    return th(0) > -thmax && th(0) < thmax;
  };
  m.param_region_desc = "theta in (-log(2)/4, log(2)/4)";

  FinslerWeight w;
  w.A = [](const Vector& x) {
    double g1 = std::exp(2 * std::abs(x(0))) * (1 + std::abs(x(1)));
    double g2 = std::exp(2 * std::abs(x(0)));
    Matrix a = Matrix::Zero(2, 2);
    a(0, 0) = g1;
    a(1, 1) = g2;
    return a;
  };
  w.B = [](const Vector& x) {
    return Matrix::Constant(1, 1, std::exp(2 * std::abs(x(0))) * (1 + std::abs(x(1))));
  };
  Vector pw(2);
  pw << cfg.p1, cfg.p2;
  w.norm_x = BaseNorm::l1(pw);
  w.norm_theta = BaseNorm::l1(Vector::Constant(1, cfg.p1));
  w.inv_A_bound = 1.0;  // g1, g2 >= 1 everywhere
  w.b_lip = std::max(2.0 / cfg.p1, 1.0 / cfg.p2);

  return ModelBundle{std::move(m), std::move(w)};
}

}  // namespace fsens
