#include "fsens/oracle.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

namespace fsens {

namespace {

Vector start_point(const SystemModel& model) {
  return model.state_domain.bounded
             ? Vector(0.5 * (model.state_domain.lo + model.state_domain.hi))
             : Vector(Vector::Zero(model.state_dim));
}

int worker_count(int replicates) {
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FSENS_WORKERS")) workers = std::max(1, std::atoi(env));
  return std::min(std::max(workers, 1), replicates);
}

template <typename Fn>
void parallel_for(int n, Fn&& fn) {
  int workers = worker_count(n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::future<void>> futs;
  for (int w = 0; w < workers; ++w)
    futs.push_back(std::async(std::launch::async, [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  for (auto& f : futs) f.get();
}

// Post-burn-in running mean of e(x_n); steps through simulate in chunks so the
// whole trajectory never lives in memory.
double cost_mean(const SystemModel& model, const Vector& theta, const CostFunction& cost,
                 long n_steps, long burn_in, RngStream rng) {
  if (n_steps < 1) throw std::invalid_argument("stationary_cost: n_steps must be >= 1");
  if (burn_in < 0 || burn_in >= n_steps)
    throw std::invalid_argument("stationary_cost: burn_in must lie in [0, n_steps)");
  Vector x = start_point(model);
  double acc = 0;
  long done = 0, kept = 0;
  const long chunk = 8192;
  while (done < n_steps) {
    int len = static_cast<int>(std::min(chunk, n_steps - done));
    auto traj = simulate(model, theta, x, len, rng.substream(static_cast<std::uint64_t>(done)));
    for (int i = 1; i <= len; ++i) {
      long n = done + i;
      if (n > burn_in) {
        acc += cost.eval(traj[static_cast<std::size_t>(i)]);
        ++kept;
      }
    }
    x = traj.back();
    done += len;
  }
  return acc / static_cast<double>(kept);
}

}  // namespace

StationaryCostEstimate stationary_cost(const SystemModel& model, const Vector& theta,
                                       const CostFunction& cost, long n_steps,
                                       long burn_in, int replicates, std::uint64_t seed) {
  if (replicates < 1) throw std::invalid_argument("stationary_cost: replicates must be >= 1");
  std::vector<double> means(static_cast<std::size_t>(replicates));
  parallel_for(replicates, [&](int r) {
    means[static_cast<std::size_t>(r)] =
        cost_mean(model, theta, cost, n_steps, burn_in,
                  RngStream(seed, 0).substream(static_cast<std::uint64_t>(r)));
  });
  StationaryCostEstimate est;
  est.n_steps = n_steps;
  est.burn_in = burn_in;
  est.replicates = replicates;
  est.seed = seed;
  for (double m : means) est.mean += m;
  est.mean /= replicates;
  if (replicates > 1) {
    double ss = 0;
    for (double m : means) ss += (m - est.mean) * (m - est.mean);
    est.stderr_ = std::sqrt(ss / (static_cast<double>(replicates) * (replicates - 1)));
  } else {
    est.stderr_ = std::numeric_limits<double>::quiet_NaN();
  }
  return est;
}

GradientEstimate fd_gradient(const SystemModel& model, const Vector& theta,
                             const CostFunction& cost, const Vector& h, long n_steps,
                             long burn_in, int replicates, std::uint64_t seed, bool crn) {
  if (h.size() != theta.size())
    throw std::invalid_argument("fd_gradient: h must match theta's dimension");
  if ((h.array() <= 0).any()) throw std::invalid_argument("fd_gradient: h must be positive");
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    Vector tp = theta, tm = theta;
    tp(j) += h(j);
    tm(j) -= h(j);
    if (!model.theta_admissible(tp) || !model.theta_admissible(tm))
      throw std::invalid_argument("fd_gradient: theta +/- h leaves the parameter region (" +
                                  model.param_region_desc + ")");
  }

  const int d = static_cast<int>(theta.size());
  // per-replicate, per-component central differences
  Matrix diffs(replicates, d);
  parallel_for(replicates, [&](int r) {
    for (int j = 0; j < d; ++j) {
      Vector tp = theta, tm = theta;
      tp(j) += h(j);
      tm(j) -= h(j);
      auto stream = [&](int side) {
        std::uint64_t tag = crn ? 0 : static_cast<std::uint64_t>(side);
        return RngStream(seed, 1 + tag)
            .substream(static_cast<std::uint64_t>(r) * 131 + static_cast<std::uint64_t>(j));
      };
      double mp = cost_mean(model, tp, cost, n_steps, burn_in, stream(1));
      double mm = cost_mean(model, tm, cost, n_steps, burn_in, stream(2));
      diffs(r, j) = (mp - mm) / (2 * h(j));
    }
  });

  GradientEstimate est;
  est.replicates = replicates;
  est.steps_per_replicate = n_steps;
  est.burn_in = burn_in;
  est.seed = seed;
  est.cost_name = cost.name;
  est.mean = diffs.colwise().mean().transpose();
  est.stderr_ = Vector::Constant(d, std::numeric_limits<double>::quiet_NaN());
  if (replicates > 1) {
    Vector ss = Vector::Zero(d);
    for (int r = 0; r < replicates; ++r)
      ss += (diffs.row(r).transpose() - est.mean).cwiseAbs2();
    est.stderr_ = (ss / static_cast<double>(replicates) / (replicates - 1)).cwiseSqrt();
  }
  return est;
}

Vector default_fd_step(const Vector& theta, double scale) {
  return (scale * (1.0 + theta.array().abs())).matrix();
}

}  // namespace fsens
