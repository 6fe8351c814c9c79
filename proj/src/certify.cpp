#include "fsens/certify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fsens/sensitivity.hpp"

namespace fsens {

namespace {

Vector basepoint(const StateDomain& dom, int n) {
  if (dom.bounded) return 0.5 * (dom.lo + dom.hi);
  return Vector::Zero(n);
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Standard error of the mean.
double sem_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(v.size()) * (static_cast<double>(v.size()) - 1)));
}

struct LinFit {
  double slope = 0, intercept = 0;
};

LinFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = mean_of(x), my = mean_of(y), sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LinFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  return f;
}

}  // namespace

std::vector<std::pair<Vector, Vector>> RegionSampler::points(const StateDomain& domain) const {
  Vector xlo = x_lo, xhi = x_hi;
  if (domain.bounded) {  // intersect region with the state box
    xlo = xlo.cwiseMax(domain.lo);
    xhi = xhi.cwiseMin(domain.hi);
  }
  const Eigen::Index dx = xlo.size(), dt = theta_lo.size();
  const Eigen::Index D = dx + dt;
  std::vector<std::pair<Vector, Vector>> out;
  out.reserve(static_cast<std::size_t>(count));

  auto assemble = [&](const Vector& coords) {
    out.emplace_back(coords.head(dx), coords.tail(dt));
  };

  Vector lo(D), hi(D);
  lo << xlo, theta_lo;
  hi << xhi, theta_hi;

  if (mode == Mode::UniformRandom) {
    RngStream rng(seed, 0xC0FFEE);
    for (int k = 0; k < count; ++k) {
      Vector c(D);
      for (Eigen::Index i = 0; i < D; ++i) c(i) = rng.uniform(lo(i), hi(i));
      assemble(c);
    }
  } else {
    int res = std::max(2, static_cast<int>(std::ceil(std::pow(static_cast<double>(count),
                                                              1.0 / static_cast<double>(D)))));
    std::vector<int> idx(static_cast<std::size_t>(D), 0);
    while (static_cast<int>(out.size()) < count) {
      Vector c(D);
      for (Eigen::Index i = 0; i < D; ++i)
        c(i) = lo(i) + (hi(i) - lo(i)) * idx[static_cast<std::size_t>(i)] / (res - 1);
      assemble(c);
      Eigen::Index i = 0;
      for (; i < D; ++i) {
        if (++idx[static_cast<std::size_t>(i)] < res) break;
        idx[static_cast<std::size_t>(i)] = 0;
      }
      if (i == D) break;  // grid exhausted
    }
  }
  return out;
}

std::string coefficient_name(Coefficient c) {
  switch (c) {
    case Coefficient::X: return "K_X";
    case Coefficient::Theta: return "K_Theta";
    case Coefficient::X2: return "K_X2";
    case Coefficient::Theta2: return "K_Theta2";
    case Coefficient::XTheta: return "K_XTheta";
  }
  return "?";
}

CoefficientEstimate estimate_L(const SystemModel& model, const FinslerWeight& weight,
                               const RegionSampler& sampler, Coefficient which,
                               int n_noise, RngStream rng) {
  const bool second_order =
      which == Coefficient::X2 || which == Coefficient::Theta2 || which == Coefficient::XTheta;
  if (second_order && !model.has_second_order())
    throw std::invalid_argument("estimate_L: model lacks second derivatives for " +
                                coefficient_name(which));

  CoefficientEstimate est;
  est.which = which;
  est.n_noise = n_noise;

  auto pts = sampler.points(model.state_domain);
  est.n_points = static_cast<int>(pts.size());

  for (std::size_t pidx = 0; pidx < pts.size(); ++pidx) {
    const Vector& x = pts[pidx].first;
    const Vector& theta = pts[pidx].second;
    RngStream point_rng = rng.substream(pidx);
    WeightedNorm in_x = weight.x_norm_at(x);
    WeightedNorm in_t = weight.theta_norm_at(x);

    std::vector<double> draws;
    draws.reserve(static_cast<std::size_t>(n_noise));
    for (int k = 0; k < n_noise; ++k) {
      Noise xi = model.sample_noise(point_rng);
      Vector fx = model.step(x, xi, theta);
      WeightedNorm out = weight.x_norm_at(fx);
      double v = 0;
      switch (which) {
        case Coefficient::X: {
          double nrm = induced_operator_norm(model.jac_x(x, xi, theta), in_x, out);
          v = nrm * nrm;  // p = 2
          break;
        }
        case Coefficient::Theta: {
          double nrm = induced_operator_norm(model.jac_theta(x, xi, theta), in_t, out);
          v = nrm * nrm;
          break;
        }
        case Coefficient::X2:
          v = induced_bilinear_norm(model.hess_xx(x, xi, theta), in_x, in_x, out);
          break;
        case Coefficient::Theta2:
          v = induced_bilinear_norm(model.hess_thetatheta(x, xi, theta), in_t, in_t, out);
          break;
        case Coefficient::XTheta:
          v = induced_bilinear_norm(model.hess_xtheta(x, xi, theta), in_x, in_t, out);
          break;
      }
      draws.push_back(v);
    }
    double m = mean_of(draws);
    double se = sem_of(draws, m);
    double value, value_se;
    if (second_order) {
      value = m;
      value_se = se;
    } else {
      value = std::sqrt(std::max(m, 0.0));
      value_se = value > 0 ? se / (2 * value) : se;  // delta method through sqrt
    }
    est.per_point.push_back(value);
    est.per_point_stderr.push_back(value_se);
    if (value > est.sup || pidx == 0) {
      est.sup = value;
      est.stderr_at_sup = value_se;
    }
  }
  return est;
}

LyapunovFit check_lyapunov(const SystemModel& model, const Vector& theta,
                           const std::function<double(const Vector&)>& V,
                           const std::vector<Vector>& points, int n_noise, double p,
                           RngStream rng) {
  std::vector<double> vx, resp;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vector& x = points[i];
    RngStream point_rng = rng.substream(i);
    double acc = 0;
    for (int k = 0; k < n_noise; ++k) {
      Noise xi = model.sample_noise(point_rng);
      acc += std::pow(V(model.step(x, xi, theta)), p);
    }
    vx.push_back(V(x));
    resp.push_back(std::pow(acc / n_noise, 1.0 / p));
  }

  LyapunovFit fit;
  double vmin = *std::min_element(vx.begin(), vx.end());
  double vmax = *std::max_element(vx.begin(), vx.end());
  if (vmax - vmin < 1e-12) {
    fit.degenerate = true;
    fit.beta = 0.0;
    fit.K = mean_of(resp);
    return fit;
  }
  LinFit lf = least_squares(vx, resp);
  fit.beta = lf.slope;
  fit.K = lf.intercept;
  for (std::size_t i = 0; i < vx.size(); ++i)
    fit.max_violation = std::max(fit.max_violation, resp[i] - (fit.beta * vx[i] + fit.K));
  return fit;
}

InterconnectionResult check_interconnection(double alpha1, double alpha2, double K1,
                                            double K2) {
  if (alpha1 < 0 || alpha1 >= 1 || alpha2 < 0 || alpha2 >= 1)
    throw std::invalid_argument("check_interconnection: alpha must lie in [0,1)");
  if (K1 < 0 || K2 < 0) throw std::invalid_argument("check_interconnection: K must be >= 0");
  InterconnectionResult r;
  if (!(K1 * K2 < (1 - alpha1) * (1 - alpha2))) return r;  // infeasible
  r.feasible = true;
  r.eta1 = 1.0;
  // eta2 must satisfy K1/(1-alpha2) < eta2 < (1-alpha1)/K2
  double lo = K1 / (1 - alpha2);
  bool hi_finite = K2 > 0;
  double hi = hi_finite ? (1 - alpha1) / K2 : 0.0;
  if (K1 == 0 && !hi_finite) {
    r.eta2 = 1.0;
  } else if (!hi_finite) {
    r.eta2 = std::max(1.0, 2 * lo);
  } else if (lo == 0) {
    r.eta2 = std::min(1.0, 0.5 * hi);
  } else {
    r.eta2 = std::sqrt(lo * hi);
  }
  return r;
}

double ContractionReport::max_stderr() const {
  return std::max({se_X, se_Theta, se_X2, se_Theta2, se_XTheta});
}

ContractionReport certify_contraction(const SystemModel& model,
                                      const FinslerWeight& weight,
                                      const RegionSampler& sampler, int n_noise,
                                      RngStream rng) {
  ContractionReport rep;
  rep.n_noise = n_noise;
  rep.seed = sampler.seed;

  auto ex = estimate_L(model, weight, sampler, Coefficient::X, n_noise, rng.substream(1));
  auto et = estimate_L(model, weight, sampler, Coefficient::Theta, n_noise, rng.substream(2));
  rep.K_X = ex.sup;
  rep.se_X = ex.stderr_at_sup;
  rep.K_Theta = et.sup;
  rep.se_Theta = et.stderr_at_sup;
  rep.n_points = ex.n_points;
  if (model.has_second_order()) {
    auto e2 = estimate_L(model, weight, sampler, Coefficient::X2, n_noise, rng.substream(3));
    auto t2 = estimate_L(model, weight, sampler, Coefficient::Theta2, n_noise, rng.substream(4));
    auto xt = estimate_L(model, weight, sampler, Coefficient::XTheta, n_noise, rng.substream(5));
    rep.K_X2 = e2.sup;
    rep.se_X2 = e2.stderr_at_sup;
    rep.K_Theta2 = t2.sup;
    rep.se_Theta2 = t2.stderr_at_sup;
    rep.K_XTheta = xt.sup;
    rep.se_XTheta = xt.stderr_at_sup;
  }
  rep.contraction_ok = rep.K_X + 2 * rep.max_stderr() < 1.0;

  // Lyapunov drift of V(x) = 1 + d_A(x0, x) over the sampled region.
  Vector x0 = basepoint(model.state_domain, model.state_dim);
  auto pts = sampler.points(model.state_domain);
  std::vector<Vector> xs;
  std::vector<Vector> thetas;
  for (auto& [x, th] : pts) {
    xs.push_back(x);
    thetas.push_back(th);
  }
  if (!xs.empty()) {
    auto V = [&](const Vector& x) { return 1.0 + metric_upper(weight, x0, x); };
    auto fit = check_lyapunov(model, thetas.front(), V, xs, std::min(n_noise, 256), 2.0,
                              rng.substream(6));
    rep.lyapunov_beta = fit.beta;
    rep.lyapunov_K = fit.K;
  }

  if (rep.contraction_ok) {
    try {
      Vector theta_mid = 0.5 * (sampler.theta_lo + sampler.theta_hi);
      JointMetric jm = build_joint_metric(rep, weight.b_lip, model, weight, theta_mid,
                                          rng.substream(7));
      rep.etas[0] = jm.eta1;
      rep.etas[1] = jm.eta2;
      rep.etas[2] = jm.eta3;
      rep.etas[3] = jm.eta4;
      rep.etas[4] = jm.eta5;
      rep.has_etas = true;
    } catch (const std::exception&) {
      rep.has_etas = false;
    }
  }
  return rep;
}

JointMetric build_joint_metric(const ContractionReport& report, double b_lip,
                               const SystemModel& model, const FinslerWeight& weight,
                               const Vector& theta, RngStream rng) {
  if (!report.contraction_ok)
    throw std::runtime_error("build_joint_metric: not contracting (K_X >= 1 within error)");
  const double slack = 1.05;
  const double alpha1 = report.K_X;

  JointMetric jm;
  jm.eta1 = report.K_X2 > 0 ? report.K_X2 : 1.0;
  double lb2 = std::max(report.K_XTheta, jm.eta1 * report.K_Theta);
  jm.eta2 = lb2 > 0 ? slack * lb2 : 1.0;
  double lb3 = jm.eta2 * b_lip * report.K_X / (1.0 - report.K_X);
  jm.eta3 = lb3 > 0 ? slack * lb3 : 1.0;

  Vector x0 = basepoint(model.state_domain, model.state_dim);
  const double e1 = jm.eta1, e2 = jm.eta2, e3 = jm.eta3;
  WeightedNorm theta_plain{weight.norm_theta, Matrix::Identity(model.param_dim, model.param_dim)};
  jm.h = [=](const Vector& x, const Matrix& m) {
    WeightedNorm out{weight.norm_x, weight.A(x)};
    double am = induced_operator_norm(m, theta_plain, out);
    double bn = induced_operator_norm(weight.B(x), theta_plain, theta_plain);
    return e1 * am + e2 * bn + e3 * metric_upper(weight, x0, x);
  };

  // Drift fit of h along the joint process, p = 2.
  {
    SensState z{x0, Matrix::Zero(model.state_dim, model.param_dim), 0};
    Vector th = theta;
    RngStream chain = rng.substream(11);
    const int warm = 200, samples = 24, gap = 25, n_noise = 256;
    for (int i = 0; i < warm; ++i) z = sens_step(model, z, model.sample_noise(chain), th);
    std::vector<double> hx, resp;
    for (int s = 0; s < samples; ++s) {
      double hz = jm.h(z.x, z.m);
      RngStream probe = rng.substream(100 + static_cast<std::uint64_t>(s));
      double acc = 0;
      for (int k = 0; k < n_noise; ++k) {
        SensState znext = sens_step(model, z, model.sample_noise(probe), th);
        double hv = jm.h(znext.x, znext.m);
        acc += hv * hv;
      }
      hx.push_back(hz);
      resp.push_back(std::sqrt(acc / n_noise));
      for (int g = 0; g < gap; ++g) z = sens_step(model, z, model.sample_noise(chain), th);
    }
    double hmin = *std::min_element(hx.begin(), hx.end());
    double hmax = *std::max_element(hx.begin(), hx.end());
    if (hmax - hmin < 1e-12) {
      jm.h_beta = 0.0;
      jm.h_K = mean_of(resp);
    } else {
      LinFit lf = least_squares(hx, resp);
      jm.h_beta = lf.slope;
      jm.h_K = lf.intercept;
    }
    jm.h_fit_poor = jm.h_beta >= 1.0 || jm.h_K < 0.0;
  }

  const double Kh = std::max(jm.h_K, 0.0);
  if (alpha1 > 0 && Kh > 0) {
    // eta4 must satisfy alpha1*(1 + eta4*K) < 1; feasible whenever alpha1 < 1.
    if (alpha1 >= 1.0)
      throw std::runtime_error(
          "build_joint_metric: infeasible inequality alpha1*(1 + eta4*K) < 1 (alpha1 >= 1)");
    jm.eta4 = (1.0 / alpha1 - 1.0) / (Kh * slack);
    double term = 1.0 - alpha1 * (1.0 + jm.eta4 * Kh);
    if (term <= 0)
      throw std::runtime_error(
          "build_joint_metric: infeasible inequality eta5/eta4 < 1 - alpha1*(1 + eta4*K)");
    jm.eta5 = jm.eta4 * term / slack;
  } else {
    jm.eta4 = 1.0;
    jm.eta5 = 1.0;
  }
  return jm;
}

KernelContractionResult empirical_kernel_contraction(
    const SystemModel& model, const Vector& theta, const FinslerWeight& weight,
    const RegionSampler& pair_sampler, int n_noise, double p, RngStream rng) {
  auto pts = pair_sampler.points(model.state_domain);
  KernelContractionResult res;
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const Vector& x1 = pts[i].first;
    const Vector& x2 = pts[i + 1].first;
    double base_dist = metric_upper(weight, x1, x2);
    if (base_dist <= 0) continue;  // coincident pair
    RngStream pair_rng = rng.substream(i);
    double acc = 0;
    for (int k = 0; k < n_noise; ++k) {
      Noise xi = model.sample_noise(pair_rng);  // common random numbers
      double d = metric_upper(weight, model.step(x1, xi, theta), model.step(x2, xi, theta));
      acc += std::pow(d, p);
    }
    double lhs = std::pow(acc / n_noise, 1.0 / p);
    res.max_ratio = std::max(res.max_ratio, lhs / base_dist);
    ++res.pairs_used;
  }
  return res;
}

ParameterLipschitzResult check_parameter_lipschitz(
    const SystemModel& model, const FinslerWeight& weight, const Vector& theta,
    const Vector& dtheta, double K_Theta, const RegionSampler& mu_sampler, int n,
    double p, RngStream rng) {
  ParameterLipschitzResult res;
  Vector theta2 = theta + dtheta;
  auto pts = mu_sampler.points(model.state_domain);
  if (static_cast<int>(pts.size()) > n) pts.resize(static_cast<std::size_t>(n));

  std::vector<double> dp;  // d^p across coupled samples
  double rhs_acc = 0;
  RngStream noise = rng.substream(1);
  for (auto& [x, th_unused] : pts) {
    Noise xi = model.sample_noise(noise);  // shared between the two parameters
    double d = metric_upper(weight, model.step(x, xi, theta), model.step(x, xi, theta2));
    dp.push_back(std::pow(d, p));
    double bn = weight.norm_theta.eval(weight.B(x) * dtheta);
    rhs_acc += std::pow(bn, p);
  }
  double m = mean_of(dp);
  double se_m = sem_of(dp, m);
  res.lhs = std::pow(m, 1.0 / p);
  // delta method through the 1/p power
  res.lhs_stderr = m > 0 ? se_m * res.lhs / (p * m) : se_m;
  res.rhs = K_Theta * std::pow(rhs_acc / static_cast<double>(dp.size()), 1.0 / p);
  // the 1e-12 term keeps exact-equality cases (zero-variance couplings) unflagged
  res.violated = res.lhs > res.rhs + 3 * res.lhs_stderr + 1e-12 * (1.0 + res.rhs);
  return res;
}

}  // namespace fsens
