#include "fsens/sensitivity.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

namespace fsens {

SensState sens_step(const SystemModel& model, const SensState& z, const Noise& xi,
                    const Vector& theta) {
  SensState out;
  out.x = model.step(z.x, xi, theta);
  out.m = model.jac_x(z.x, xi, theta) * z.m + model.jac_theta(z.x, xi, theta);
  out.step_index = z.step_index + 1;
  return out;
}

GradientRun run_gradient(const SystemModel& model, const Vector& theta,
                         const CostFunction& cost, long n_steps, long burn_in,
                         const Vector& x0, const Matrix& m0, RngStream rng, long thin) {
  if (n_steps < 1) throw std::invalid_argument("run_gradient: n_steps must be >= 1");
  if (burn_in < 0 || burn_in >= n_steps)
    throw std::invalid_argument("run_gradient: burn_in must lie in [0, n_steps)");
  if (!model.state_domain.contains(x0))
    throw std::invalid_argument("run_gradient: x0 outside the state domain");

  GradientRun out;
  SensState z{x0, m0, 0};
  Vector acc = Vector::Zero(model.param_dim);
  long kept = 0;
  for (long n = 1; n <= n_steps; ++n) {
    z = sens_step(model, z, model.sample_noise(rng), theta);
    if (!z.x.allFinite() || !z.m.allFinite())
      throw std::runtime_error("run_gradient: non-finite joint state at step " +
                               std::to_string(n));
    if (n <= burn_in) continue;
    Vector delta = (cost.grad(z.x) * z.m).transpose();
    acc += delta;
    ++kept;
    if (thin > 0 && kept % thin == 0) out.deltas.push_back(delta);
  }
  out.average = acc / static_cast<double>(kept);
  out.final_state = std::move(z);
  return out;
}

GradientEstimate batch_gradient(const SystemModel& model, const Vector& theta,
                                const CostFunction& cost, long n_steps, long burn_in,
                                int replicates, std::uint64_t base_seed) {
  if (replicates < 1) throw std::invalid_argument("batch_gradient: replicates must be >= 1");

  Vector x0 = model.state_domain.bounded
                  ? Vector(0.5 * (model.state_domain.lo + model.state_domain.hi))
                  : Vector(Vector::Zero(model.state_dim));
  Matrix m0 = Matrix::Zero(model.state_dim, model.param_dim);

  auto one = [&](int r) {
    RngStream rng(base_seed, static_cast<std::uint64_t>(r));
    return run_gradient(model, theta, cost, n_steps, burn_in, x0, m0, rng).average;
  };

  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FSENS_WORKERS")) workers = std::max(1, std::atoi(env));
  workers = std::min(workers, replicates);

  std::vector<Vector> avgs(static_cast<std::size_t>(replicates));
  if (workers <= 1) {
    for (int r = 0; r < replicates; ++r) avgs[static_cast<std::size_t>(r)] = one(r);
  } else {
    std::vector<std::future<void>> futs;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w) {
      futs.push_back(std::async(std::launch::async, [&] {
        for (int r = next.fetch_add(1); r < replicates; r = next.fetch_add(1))
          avgs[static_cast<std::size_t>(r)] = one(r);
      }));
    }
    for (auto& f : futs) f.get();  // rethrows worker exceptions
  }

  GradientEstimate est;
  est.replicates = replicates;
  est.steps_per_replicate = n_steps;
  est.burn_in = burn_in;
  est.seed = base_seed;
  est.cost_name = cost.name;
  est.mean = Vector::Zero(model.param_dim);
  for (auto& a : avgs) est.mean += a;
  est.mean /= static_cast<double>(replicates);
  est.stderr_ = Vector::Constant(model.param_dim, std::numeric_limits<double>::quiet_NaN());
  if (replicates > 1) {
    Vector ss = Vector::Zero(model.param_dim);
    for (auto& a : avgs) ss += (a - est.mean).cwiseAbs2();
    est.stderr_ = (ss / static_cast<double>(replicates * (replicates - 1))).cwiseSqrt();
  }
  return est;
}

long default_burn_in(long n_steps) { return std::max(1000L, n_steps / 10); }

}  // namespace fsens
