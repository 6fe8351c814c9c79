#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsens/models.hpp"
#include "fsens/runner.hpp"

using namespace fsens;

namespace {

std::vector<Vector> sample_box(int dim, double lo, double hi, int n, std::uint64_t seed) {
  RngStream rng(seed, 0);
  std::vector<Vector> pts;
  for (int i = 0; i < n; ++i) {
    Vector x(dim);
    for (int d = 0; d < dim; ++d) x(d) = rng.uniform(lo, hi);
    pts.push_back(x);
  }
  return pts;
}

}  // namespace

TEST_CASE("make_ar1: step value and config validation") {
  auto ar1 = make_ar1({});
  CHECK(ar1.model.step(Vector::Zero(1), Noise::Zero(1), Vector::Constant(1, 0.3))(0) ==
        doctest::Approx(0.3));
  LinearAR1Config bad;
  bad.a = 1.0;
  CHECK_THROWS_AS(make_ar1(bad), std::invalid_argument);
  bad.a = 0.5;
  bad.eps = -0.1;
  CHECK_THROWS_AS(make_ar1(bad), std::invalid_argument);
}

TEST_CASE("make_ar1: uniform-symmetric noise has unit variance") {
  LinearAR1Config cfg;
  cfg.noise = LinearAR1Config::NoiseKind::UniformSymmetric;
  auto ar1 = make_ar1(cfg);
  RngStream rng(77, 0);
  double s2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double v = ar1.model.sample_noise(rng)(0);
    CHECK(std::abs(v) <= std::sqrt(3.0));
    s2 += v * v;
  }
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("make_stochastic_nn: rho=1 freezes the state map") {
  auto nn = make_stochastic_nn(StochasticNNConfig::fully_connected(3, 1.0, 0.3));
  RngStream rng(1, 0);
  Noise xi = nn.model.sample_noise(rng);
  CHECK(xi.cwiseAbs().maxCoeff() == 0.0);
  Vector x = Vector::Constant(3, 0.8);
  Vector y = nn.model.step(x, xi, nn.default_theta);
  for (int i = 0; i < 3; ++i) CHECK(y(i) == doctest::Approx(0.5));  // sigma(0)
  CHECK(nn.model.jac_x(x, xi, nn.default_theta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("make_stochastic_nn: sigma'(0) = 1/4 self-loop case") {
  StochasticNNConfig cfg;
  cfg.N = 1;
  cfg.edges = {{0, 0}};
  cfg.rho = 0.0;  // edge always active
  cfg.theta = Matrix::Constant(1, 1, 1.0);
  cfg.biases = Vector::Zero(1);
  auto nn = make_stochastic_nn(cfg);
  Noise xi = Noise::Ones(1);
  Matrix J = nn.model.jac_x(Vector::Zero(1), xi, Vector::Constant(1, 1.0));
  CHECK(J(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("make_stochastic_nn: jac_theta vanishes off the receiving unit") {
  auto nn = make_stochastic_nn(StochasticNNConfig::fully_connected(3, 0.3, 0.2));
  RngStream rng(2, 0);
  Noise xi = nn.model.sample_noise(rng);
  Vector x = Vector::Constant(3, 0.4);
  Matrix Jt = nn.model.jac_theta(x, xi, nn.default_theta);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        if (i != j) CHECK(Jt(i, nn_theta_index(3, j, k)) == 0.0);
}

TEST_CASE("make_stochastic_nn: construction contraction bound enforced") {
  CHECK_THROWS_AS(make_stochastic_nn(StochasticNNConfig::fully_connected(3, 0.0, 1.4)),
                  std::invalid_argument);  // row sum 4.2 > 4
  CHECK_NOTHROW(make_stochastic_nn(StochasticNNConfig::fully_connected(3, 0.0, 1.3)));
}

TEST_CASE("make_stochastic_nn: full derivative set passes finite differences") {
  auto nn = make_stochastic_nn(StochasticNNConfig::fully_connected(2, 0.4, 0.5));
  auto rep = validate_derivatives(nn.model, nn.default_theta,
                                  sample_box(2, 0.05, 0.95, 6, 3), RngStream(3, 1));
  CHECK(rep.all_ok);
  for (const auto& c : rep.checks) INFO(c.which, " err=", c.max_rel_error);
}

TEST_CASE("make_example2: derivative set and validation") {
  auto ex2 = make_example2({});
  CHECK(ex2.model.has_second_order());
  auto rep = validate_derivatives(ex2.model, Vector::Constant(1, 0.1),
                                  sample_box(2, -2.5, 2.5, 8, 5), RngStream(5, 1));
  CHECK(rep.all_ok);

  Bilinear hxx = ex2.model.hess_xx(Vector::Ones(2), Noise::Zero(2), Vector::Zero(1));
  CHECK(hxx.comps[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(hxx.comps[1](0, 1) == 0.5);
  CHECK(hxx.comps[1](1, 0) == 0.5);
  CHECK(hxx.comps[1](0, 0) == 0.0);
}

TEST_CASE("make_example2: setup conditions rejected with the inequality named") {
  Example2Config bad;
  bad.eps = 0.9;  // (1 + eps Q) R exceeds 2^(1/4)
  try {
    make_example2(bad);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("condition (ii)") != std::string::npos);
  }
  Example2Config badp;
  badp.p2 = 0.5;  // 1 + p2/p1 = 1.5 >= 2^(1/4)
  try {
    make_example2(badp);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("condition (iii)") != std::string::npos);
  }
}

TEST_CASE("make_example2: moment estimates and theta region") {
  Example2Config cfg;
  auto mom = example2_moments(cfg);
  CHECK(mom.Q == doctest::Approx(1.0).epsilon(0.02));  // E|N(0,1)|^2 = 1
  // R^2 = E exp(4 eps |U|), U ~ U[-1/2,1/2]: 2(exp(2 eps) - 1)/(4 eps)
  double r2 = (std::exp(2 * cfg.eps) - 1.0) / (2 * cfg.eps);
  CHECK(mom.R == doctest::Approx(std::sqrt(r2)).epsilon(0.01));

  auto ex2 = make_example2(cfg);
  CHECK(ex2.model.theta_admissible(Vector::Constant(1, 0.17)));
  CHECK_FALSE(ex2.model.theta_admissible(Vector::Constant(1, 0.18)));
  CHECK(example2_theta_max() == doctest::Approx(0.25 * std::log(2.0)));
}

TEST_CASE("AR(1) closed forms through simulation") {
  auto ar1 = make_ar1({});
  Vector th = Vector::Constant(1, 0.3);
  auto traj = simulate(ar1.model, th, Vector::Zero(1), 200000, RngStream(6, 0));
  double mean = 0, mean2 = 0;
  int kept = 0;
  for (std::size_t i = 20000; i < traj.size(); ++i) {
    mean += traj[i](0);
    mean2 += traj[i](0) * traj[i](0);
    ++kept;
  }
  mean /= kept;
  mean2 /= kept;
  CHECK(mean == doctest::Approx(0.6).epsilon(0.01));
  CHECK(mean2 == doctest::Approx(0.36 + 0.01 / 0.75).epsilon(0.02));
}
