#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsens/certify.hpp"
#include "fsens/models.hpp"

using namespace fsens;

namespace {

RegionSampler ar1_sampler(int count = 32, std::uint64_t seed = 4) {
  RegionSampler s;
  s.x_lo = Vector::Constant(1, -2.0);
  s.x_hi = Vector::Constant(1, 2.0);
  s.theta_lo = Vector::Constant(1, 0.3);
  s.theta_hi = Vector::Constant(1, 0.3);
  s.count = count;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("RegionSampler stays inside bounds and the state domain") {
  auto nn = make_stochastic_nn(StochasticNNConfig::fully_connected(2, 0.5, 0.2));
  RegionSampler s;
  s.x_lo = Vector::Constant(2, -1.0);  // wider than the [0,1]^2 domain
  s.x_hi = Vector::Constant(2, 2.0);
  s.theta_lo = Vector::Constant(4, -0.2);
  s.theta_hi = Vector::Constant(4, 0.2);
  s.count = 64;
  for (auto mode : {RegionSampler::Mode::UniformRandom, RegionSampler::Mode::Grid}) {
    s.mode = mode;
    auto pts = s.points(nn.model.state_domain);
    CHECK(!pts.empty());
    for (auto& [x, th] : pts) {
      CHECK(nn.model.state_domain.contains(x, 1e-12));
      for (int i = 0; i < 4; ++i) {
        CHECK(th(i) >= -0.2);
        CHECK(th(i) <= 0.2);
      }
    }
  }
}

TEST_CASE("estimate_L: AR(1) constant jacobian gives exact values, zero variance") {
  auto ar1 = make_ar1({});
  auto ex = estimate_L(ar1.model, ar1.weight, ar1_sampler(), Coefficient::X, 64,
                       RngStream(1, 0));
  CHECK(ex.sup == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(ex.stderr_at_sup == doctest::Approx(0.0));
  for (double v : ex.per_point) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

  auto et = estimate_L(ar1.model, ar1.weight, ar1_sampler(), Coefficient::Theta, 64,
                       RngStream(1, 1));
  CHECK(et.sup == doctest::Approx(1.0).epsilon(1e-12));

  for (auto which : {Coefficient::X2, Coefficient::Theta2, Coefficient::XTheta}) {
    auto e2 = estimate_L(ar1.model, ar1.weight, ar1_sampler(), which, 16, RngStream(1, 2));
    CHECK(e2.sup == 0.0);
  }
}

TEST_CASE("estimate_L: stochastic NN with rho=1 has zero state sensitivity") {
  auto nn = make_stochastic_nn(StochasticNNConfig::fully_connected(2, 1.0, 0.3));
  RegionSampler s;
  s.x_lo = Vector::Zero(2);
  s.x_hi = Vector::Ones(2);
  s.theta_lo = nn.default_theta;
  s.theta_hi = nn.default_theta;
  s.count = 8;
  auto ex = estimate_L(nn.model, nn.weight, s, Coefficient::X, 32, RngStream(2, 0));
  CHECK(ex.sup == 0.0);
}

TEST_CASE("estimate_L: missing second derivatives is an error") {
  auto ar1 = make_ar1({});
  SystemModel stripped = ar1.model;
  stripped.hess_xx = nullptr;
  CHECK_THROWS_AS(estimate_L(stripped, ar1.weight, ar1_sampler(), Coefficient::X2, 8,
                             RngStream(3, 0)),
                  std::invalid_argument);
}

TEST_CASE("check_lyapunov: deterministic contraction fits exactly") {
  LinearAR1Config cfg;
  cfg.eps = 0.0;
  auto ar1 = make_ar1(cfg);
  auto V = [](const Vector& x) { return 1.0 + std::abs(x(0)); };
  std::vector<Vector> pts;
  for (int i = 0; i <= 8; ++i) pts.push_back(Vector::Constant(1, 0.25 * i));
  // theta = 0: (1 + |x/2|) = 0.5 (1 + |x|) + 0.5 on x >= 0
  auto fit = check_lyapunov(ar1.model, Vector::Zero(1), V, pts, 4, 1.0, RngStream(4, 0));
  CHECK_FALSE(fit.degenerate);
  CHECK(fit.beta == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.K == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(fit.max_violation < 1e-9);
}

TEST_CASE("check_lyapunov: noisy AR(1) slope near 1/2; constant V is degenerate") {
  auto ar1 = make_ar1({});
  auto V = [](const Vector& x) { return 1.0 + std::abs(x(0)); };
  std::vector<Vector> pts;
  for (int i = 0; i <= 16; ++i) pts.push_back(Vector::Constant(1, -4.0 + 0.5 * i));
  auto fit = check_lyapunov(ar1.model, Vector::Constant(1, 0.3), V, pts, 512, 1.0,
                            RngStream(5, 0));
  CHECK(fit.beta == doctest::Approx(0.5).epsilon(0.05));

  auto one = [](const Vector&) { return 1.0; };
  auto dfit = check_lyapunov(ar1.model, Vector::Zero(1), one, pts, 16, 1.0, RngStream(5, 1));
  CHECK(dfit.degenerate);
  CHECK(dfit.beta == 0.0);
  CHECK(dfit.K == doctest::Approx(1.0));
}

TEST_CASE("check_interconnection: pinned cases") {
  auto r0 = check_interconnection(0.5, 0.5, 0.0, 0.0);
  CHECK(r0.feasible);
  CHECK(r0.eta1 == 1.0);
  CHECK(r0.eta2 == 1.0);  // degenerate-bound convention

  auto r1 = check_interconnection(0.5, 0.5, 0.4, 0.4);
  CHECK(r1.feasible);
  CHECK(r1.eta2 == doctest::Approx(1.0));  // sqrt(0.8 * 1.25)
  CHECK(r1.eta2 * 0.4 < (1 - 0.5));        // eta2 K2 < eta1 (1 - alpha1)
  CHECK(1.0 * 0.4 < r1.eta2 * (1 - 0.5));  // eta1 K1 < eta2 (1 - alpha2)

  CHECK_FALSE(check_interconnection(0.5, 0.5, 0.6, 0.6).feasible);
  CHECK_THROWS_AS(check_interconnection(1.0, 0.5, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("check_interconnection: feasibility is monotone") {
  RngStream rng(6, 0);
  for (int trial = 0; trial < 200; ++trial) {
    double a1 = rng.uniform(0, 0.95), a2 = rng.uniform(0, 0.95);
    double k1 = rng.uniform(0, 1.2), k2 = rng.uniform(0, 1.2);
    if (!check_interconnection(a1, a2, k1, k2).feasible) continue;
    CHECK(check_interconnection(a1 * 0.5, a2, k1, k2).feasible);
    CHECK(check_interconnection(a1, a2 * 0.5, k1, k2).feasible);
    CHECK(check_interconnection(a1, a2, k1 * 0.5, k2).feasible);
    CHECK(check_interconnection(a1, a2, k1, k2 * 0.5).feasible);
  }
}

TEST_CASE("certify_contraction: AR(1) report") {
  auto ar1 = make_ar1({});
  auto rep = certify_contraction(ar1.model, ar1.weight, ar1_sampler(16), 64,
                                 RngStream(7, 0));
  CHECK(rep.K_X == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(rep.K_Theta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rep.K_X2 == 0.0);
  CHECK(rep.contraction_ok);
  CHECK(rep.lyapunov_beta < 1.0);
  CHECK(rep.has_etas);
  // degenerate-zero conventions plus the exact coefficients of the linear model
  CHECK(rep.etas[0] == 1.0);                         // K_X2 = 0
  CHECK(rep.etas[1] == doctest::Approx(1.05));       // 1.05 * max{0, 1 * K_Theta}
  CHECK(rep.etas[2] == 1.0);                         // B_lip = 0
}

TEST_CASE("build_joint_metric: recipe inequalities hold; non-contracting input throws") {
  auto ex2 = make_example2({});
  RegionSampler s;
  s.x_lo = Vector::Constant(2, -3.0);
  s.x_hi = Vector::Constant(2, 3.0);
  s.theta_lo = Vector::Constant(1, -0.15);
  s.theta_hi = Vector::Constant(1, 0.15);
  s.count = 64;
  s.seed = 11;
  auto rep = certify_contraction(ex2.model, ex2.weight, s, 256, RngStream(11, 0));
  REQUIRE(rep.contraction_ok);
  auto jm = build_joint_metric(rep, ex2.weight.b_lip, ex2.model, ex2.weight,
                               Vector::Constant(1, 0.1), RngStream(11, 1));
  CHECK(rep.K_X2 <= jm.eta1);
  CHECK(std::max(rep.K_XTheta, jm.eta1 * rep.K_Theta) < jm.eta2);
  CHECK(jm.eta2 * ex2.weight.b_lip * rep.K_X < jm.eta3 * (1 - rep.K_X));
  CHECK(jm.eta4 > 0);
  CHECK(jm.eta5 > 0);
  CHECK(rep.K_X * (1 + jm.eta4 * std::max(jm.h_K, 0.0)) < 1.0);
  CHECK(jm.h_beta < 1.0);
  CHECK(jm.h(Vector::Zero(2), Matrix::Zero(2, 1)) >= 0.0);

  ContractionReport bad = rep;
  bad.contraction_ok = false;
  CHECK_THROWS_AS(build_joint_metric(bad, 0.0, ex2.model, ex2.weight,
                                     Vector::Constant(1, 0.1), RngStream(1, 1)),
                  std::runtime_error);
}

TEST_CASE("empirical_kernel_contraction: AR(1) ratio is exactly 1/2") {
  auto ar1 = make_ar1({});
  auto res = empirical_kernel_contraction(ar1.model, Vector::Constant(1, 0.3),
                                          ar1.weight, ar1_sampler(32), 16, 2.0,
                                          RngStream(8, 0));
  CHECK(res.pairs_used > 0);
  CHECK(res.max_ratio == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("empirical_kernel_contraction: rho=1 network collapses to a point") {
  auto nn = make_stochastic_nn(StochasticNNConfig::fully_connected(2, 1.0, 0.3));
  RegionSampler s;
  s.x_lo = Vector::Zero(2);
  s.x_hi = Vector::Ones(2);
  s.theta_lo = nn.default_theta;
  s.theta_hi = nn.default_theta;
  s.count = 16;
  auto res = empirical_kernel_contraction(nn.model, nn.default_theta, nn.weight, s, 8,
                                          2.0, RngStream(9, 0));
  CHECK(res.max_ratio == 0.0);
}

TEST_CASE("empirical_kernel_contraction: random affine contraction bounded by ||M||") {
  Matrix M(2, 2);
  M << 0.3, -0.4, 0.2, 0.3;  // max row sum 0.7
  SystemModel m;
  m.state_dim = 2;
  m.param_dim = 1;
  m.step = [M](const Vector& x, const Noise& xi, const Vector&) {
    return Vector(M * x + xi);
  };
  m.jac_x = [M](const Vector&, const Noise&, const Vector&) { return M; };
  m.jac_theta = [](const Vector&, const Noise&, const Vector&) { return Matrix::Zero(2, 1); };
  m.sample_noise = [](RngStream& rng) {
    Noise xi(2);
    xi << rng.gaussian(), rng.gaussian();
    return xi;
  };
  m.state_domain = StateDomain::all(2);
  FinslerWeight w = FinslerWeight::identity(2, 1);
  RegionSampler s;
  s.x_lo = Vector::Constant(2, -3.0);
  s.x_hi = Vector::Constant(2, 3.0);
  s.theta_lo = Vector::Zero(1);
  s.theta_hi = Vector::Zero(1);
  s.count = 64;
  auto res = empirical_kernel_contraction(m, Vector::Zero(1), w, s, 8, 2.0,
                                          RngStream(10, 0));
  CHECK(res.max_ratio <= 0.7 + 1e-9);
}

TEST_CASE("check_parameter_lipschitz: AR(1) additive parameter is tight") {
  auto ar1 = make_ar1({});
  Vector dtheta = Vector::Constant(1, 0.01);
  auto res = check_parameter_lipschitz(ar1.model, ar1.weight, Vector::Constant(1, 0.3),
                                       dtheta, 1.0, ar1_sampler(64), 64, 2.0,
                                       RngStream(12, 0));
  CHECK(res.lhs == doctest::Approx(0.01).epsilon(1e-9));
  CHECK(res.rhs == doctest::Approx(0.01).epsilon(1e-9));
  CHECK_FALSE(res.violated);

  auto zero = check_parameter_lipschitz(ar1.model, ar1.weight, Vector::Constant(1, 0.3),
                                        Vector::Zero(1), 1.0, ar1_sampler(16), 16, 2.0,
                                        RngStream(12, 1));
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
}
