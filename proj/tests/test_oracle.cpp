#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fsens/models.hpp"
#include "fsens/oracle.hpp"
#include "fsens/runner.hpp"

using namespace fsens;

TEST_CASE("stationary_cost: AR(1) mean and second moment") {
  auto ar1 = make_ar1({});
  Vector th = Vector::Constant(1, 0.3);
  auto m1 = stationary_cost(ar1.model, th, cost_registry_lookup("coordinate(0)", 1),
                            200000, 20000, 4, 31);
  CHECK(std::abs(m1.mean - 0.6) < 3 * m1.stderr_ + 1e-3);

  // E[x^2] = theta^2/(1-a)^2 + eps^2/(1-a^2) = 0.36 + 0.01/0.75
  auto m2 = stationary_cost(ar1.model, th, cost_registry_lookup("quadratic", 1), 400000,
                            40000, 6, 32);
  CHECK(std::abs(m2.mean - (0.36 + 0.01 / 0.75)) < 3 * m2.stderr_ + 1e-3);
}

TEST_CASE("stationary_cost: deterministic model hits the fixed point, stderr 0") {
  LinearAR1Config cfg;
  cfg.eps = 0.0;
  auto det = make_ar1(cfg);
  auto est = stationary_cost(det.model, Vector::Constant(1, 0.3),
                             cost_registry_lookup("coordinate(0)", 1), 50000, 5000, 4, 33);
  CHECK(est.mean == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(est.stderr_ == 0.0);
}

TEST_CASE("stationary_cost: determinism given seed") {
  auto ar1 = make_ar1({});
  Vector th = Vector::Constant(1, 0.3);
  auto cost = cost_registry_lookup("coordinate(0)", 1);
  auto a = stationary_cost(ar1.model, th, cost, 10000, 1000, 3, 7);
  auto b = stationary_cost(ar1.model, th, cost, 10000, 1000, 3, 7);
  CHECK(a.mean == b.mean);
  CHECK(a.stderr_ == b.stderr_);
}

TEST_CASE("fd_gradient: AR(1) linear cost is exact for any h") {
  auto ar1 = make_ar1({});
  Vector th = Vector::Constant(1, 0.3);
  auto cost = cost_registry_lookup("coordinate(0)", 1);
  for (double h : {1e-1, 1e-3}) {
    auto est = fd_gradient(ar1.model, th, cost, Vector::Constant(1, h), 50000, 5000, 3,
                           41, true);
    CHECK(est.mean(0) == doctest::Approx(2.0).epsilon(1e-8));
  }
}

TEST_CASE("fd_gradient: AR(1) quadratic cost near 2.4") {
  auto ar1 = make_ar1({});
  Vector th = Vector::Constant(1, 0.3);
  auto est = fd_gradient(ar1.model, th, cost_registry_lookup("quadratic", 1),
                         default_fd_step(th), 200000, 20000, 5, 42, true);
  CHECK(std::abs(est.mean(0) - 2.4) < 3 * est.stderr_(0) + 0.01);
}

TEST_CASE("fd_gradient: parameter-region violation names the constraint") {
  auto ex2 = make_example2({});
  Vector th = Vector::Constant(1, 0.17);  // close to log(2)/4 = 0.1733
  try {
    fd_gradient(ex2.model, th, cost_registry_lookup("coordinate(0)", 2),
                Vector::Constant(1, 0.01), 100, 10, 2, 1, true);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("log(2)/4") != std::string::npos);
  }
}

TEST_CASE("CRN variance reduction: factor >= 10 on AR(1)") {
  auto ar1 = make_ar1({});
  Vector th = Vector::Constant(1, 0.3);
  auto cost = cost_registry_lookup("quadratic", 1);
  Vector h = Vector::Constant(1, 1e-2);
  auto crn = fd_gradient(ar1.model, th, cost, h, 20000, 2000, 8, 51, true);
  auto indep = fd_gradient(ar1.model, th, cost, h, 20000, 2000, 8, 51, false);
  CHECK(indep.stderr_(0) >= 10.0 * crn.stderr_(0));
}

TEST_CASE("oracle self-consistency: halving h moves the mean by < 3 stderr") {
  auto ex2 = make_example2({});
  Vector th = Vector::Constant(1, 0.1);
  auto cost = cost_registry_lookup("coordinate(0)", 2);
  auto big = fd_gradient(ex2.model, th, cost, Vector::Constant(1, 2e-3), 100000, 10000,
                         6, 61, true);
  auto small = fd_gradient(ex2.model, th, cost, Vector::Constant(1, 1e-3), 100000, 10000,
                           6, 61, true);
  double combined = std::sqrt(big.stderr_(0) * big.stderr_(0) +
                              small.stderr_(0) * small.stderr_(0));
  CHECK(std::abs(big.mean(0) - small.mean(0)) < 3 * combined + 1e-6);
}

TEST_CASE("default_fd_step scales with theta") {
  Vector th(2);
  th << 0.0, -3.0;
  Vector h = default_fd_step(th);
  CHECK(h(0) == doctest::Approx(1e-3));
  CHECK(h(1) == doctest::Approx(4e-3));
}
