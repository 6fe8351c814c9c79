#include "fsens/model.hpp"

#include <cmath>
#include <sstream>

namespace fsens {

namespace {

bool all_finite(const Vector& v) { return v.allFinite(); }

double fd_step(double coord) { return 1e-6 * (1.0 + std::abs(coord)); }

// Clamp an FD evaluation point into a box domain by shrinking the step when
// the perturbed point would leave it; returns the usable symmetric step.
double usable_step(const StateDomain& dom, const Vector& x, Eigen::Index i, double h) {
  if (!dom.bounded) return h;
  double room = std::min(dom.hi(i) - x(i), x(i) - dom.lo(i));
  return std::min(h, std::max(room, 0.0) * 0.5);
}

}  // namespace

std::vector<Vector> simulate(const SystemModel& model, const Vector& theta,
                             const Vector& x0, int n_steps, RngStream rng) {
  if (n_steps < 1) throw std::invalid_argument("simulate: n_steps must be >= 1");
  if (!model.state_domain.contains(x0, 1e-12))
    throw std::invalid_argument("simulate: x0 outside state domain");
  std::vector<Vector> traj;
  traj.reserve(static_cast<std::size_t>(n_steps) + 1);
  traj.push_back(x0);
  Vector x = x0;
  for (int n = 0; n < n_steps; ++n) {
    Noise xi = model.sample_noise(rng);
    x = model.step(x, xi, theta);
    if (!all_finite(x)) {
      std::ostringstream msg;
      msg << "simulate: non-finite state at step " << (n + 1);
      throw std::runtime_error(msg.str());
    }
    traj.push_back(x);
  }
  return traj;
}

ValidationReport validate_derivatives(const SystemModel& model, const Vector& theta,
                                      const std::vector<Vector>& points, RngStream rng,
                                      double tol_first, double tol_second) {
  ValidationReport report;
  const int nx = model.state_dim;
  const int nt = model.param_dim;

  DerivativeCheck jx{"jac_x"}, jt{"jac_theta"};
  DerivativeCheck hxx{"hess_xx"}, htt{"hess_thetatheta"}, hxt{"hess_xtheta"};

  auto update = [&report](DerivativeCheck& c, double err, const Vector& x, double tol) {
    if (!std::isfinite(err)) {
      report.all_ok = false;
      c.ok = false;
      c.max_rel_error = err;
      c.worst_point = x;
      return;
    }
    if (err > c.max_rel_error) {
      c.max_rel_error = err;
      c.worst_point = x;
    }
    if (err > tol) c.ok = false;
  };

  for (const Vector& x : points) {
    Noise xi = model.sample_noise(rng);
    Vector f0 = model.step(x, xi, theta);
    if (!f0.allFinite()) {
      report.all_ok = false;
      std::ostringstream msg;
      msg << "non-finite model output at x = [" << x.transpose() << "]";
      report.failure_detail = msg.str();
      break;
    }
    double scale = 1.0 + f0.cwiseAbs().maxCoeff();

    // jac_x vs FD of step in x
    Matrix Jx = model.jac_x(x, xi, theta);
    for (int j = 0; j < nx; ++j) {
      double h = usable_step(model.state_domain, x, j, fd_step(x(j)));
      if (h <= 0) continue;
      Vector xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      Vector col = (model.step(xp, xi, theta) - model.step(xm, xi, theta)) / (2 * h);
      update(jx, (Jx.col(j) - col).cwiseAbs().maxCoeff() / scale, x, tol_first);
    }

    // jac_theta vs FD of step in theta
    Matrix Jt = model.jac_theta(x, xi, theta);
    for (int j = 0; j < nt; ++j) {
      double h = fd_step(theta(j));
      Vector tp = theta, tm = theta;
      tp(j) += h;
      tm(j) -= h;
      Vector col = (model.step(x, xi, tp) - model.step(x, xi, tm)) / (2 * h);
      update(jt, (Jt.col(j) - col).cwiseAbs().maxCoeff() / scale, x, tol_first);
    }

    // hessians vs FD of the corresponding Jacobian (larger step; the FD of an
    // FD-validated quantity is noisier)
    if (model.hess_xx) {
      Bilinear H = model.hess_xx(x, xi, theta);
      for (int j = 0; j < nx; ++j) {
        double h = usable_step(model.state_domain, x, j, 1e-5 * (1 + std::abs(x(j))));
        if (h <= 0) continue;
        Vector xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        Matrix dJ = (model.jac_x(xp, xi, theta) - model.jac_x(xm, xi, theta)) / (2 * h);
        // dJ(i,k) should equal H.comps[i](j,k)
        for (int i = 0; i < nx; ++i)
          update(hxx, (H.comps[static_cast<std::size_t>(i)].row(j) - dJ.row(i)).cwiseAbs().maxCoeff() / scale,
                 x, tol_second);
      }
    }
    if (model.hess_thetatheta) {
      Bilinear H = model.hess_thetatheta(x, xi, theta);
      for (int j = 0; j < nt; ++j) {
        double h = 1e-5 * (1 + std::abs(theta(j)));
        Vector tp = theta, tm = theta;
        tp(j) += h;
        tm(j) -= h;
        Matrix dJ = (model.jac_theta(x, xi, tp) - model.jac_theta(x, xi, tm)) / (2 * h);
        for (int i = 0; i < nx; ++i)
          update(htt, (H.comps[static_cast<std::size_t>(i)].row(j) - dJ.row(i)).cwiseAbs().maxCoeff() / scale,
                 x, tol_second);
      }
    }
    if (model.hess_xtheta) {
      // comps[i](j,k): d^2 f_i / dx_j dtheta_k, checked as FD in x of jac_theta
      Bilinear H = model.hess_xtheta(x, xi, theta);
      for (int j = 0; j < nx; ++j) {
        double h = usable_step(model.state_domain, x, j, 1e-5 * (1 + std::abs(x(j))));
        if (h <= 0) continue;
        Vector xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        Matrix dJ = (model.jac_theta(xp, xi, theta) - model.jac_theta(xm, xi, theta)) / (2 * h);
        for (int i = 0; i < nx; ++i)
          update(hxt, (H.comps[static_cast<std::size_t>(i)].row(j) - dJ.row(i)).cwiseAbs().maxCoeff() / scale,
                 x, tol_second);
      }
    }
  }

  report.checks = {jx, jt};
  if (model.hess_xx) report.checks.push_back(hxx);
  if (model.hess_thetatheta) report.checks.push_back(htt);
  if (model.hess_xtheta) report.checks.push_back(hxt);
  for (const auto& c : report.checks)
    if (!c.ok) report.all_ok = false;
  return report;
}

ValidationReport validate_cost(const CostFunction& cost,
                               const std::vector<Vector>& points, double tol) {
  ValidationReport report;
  DerivativeCheck g{"grad"};
  for (const Vector& x : points) {
    double scale = 1.0 + std::abs(cost.eval(x));
    RowVector gr = cost.grad(x);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      double h = fd_step(x(j));
      Vector xp = x, xm = x;
      xp(j) += h;
      xm(j) -= h;
      double fd = (cost.eval(xp) - cost.eval(xm)) / (2 * h);
      double err = std::abs(gr(j) - fd) / scale;
      if (err > g.max_rel_error) {
        g.max_rel_error = err;
        g.worst_point = x;
      }
      if (err > tol) g.ok = false;
    }
  }
  report.checks = {g};
  report.all_ok = g.ok;
  return report;
}

}  // namespace fsens
