#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>

#include "fluxkit/errors.hpp"

// Small damped least-squares (Levenberg-Marquardt) driver with a central
// finite-difference Jacobian. Residual callback returns the weighted
// residual vector; trials that produce non-finite residuals are rejected.

namespace fluxkit {

struct LmOptions {
  int max_evals = 500;
  double ftol = 1e-12;
  double xtol = 1e-12;
};

struct LmResult {
  Eigen::VectorXd p;
  double chi2 = std::numeric_limits<double>::infinity();
  int n_evals = 0;
  bool converged = false;
  Eigen::MatrixXd cov;  // (J^T J)^{-1}, unscaled
};

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline LmResult lm_fit(const ResidualFn& fn, const Eigen::VectorXd& p0,
                       const LmOptions& opt = {}) {
  const auto npar = p0.size();
  LmResult out;
  out.p = p0;

  auto chi2_of = [](const Eigen::VectorXd& r) {
    double c = r.squaredNorm();
    return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
  };

  Eigen::VectorXd r = fn(out.p);
  out.n_evals = 1;
  out.chi2 = chi2_of(r);
  if (!std::isfinite(out.chi2))
    throw FitError("initial residuals are not finite");
  const auto nres = r.size();
  if (nres < npar) throw FitError("fewer residuals than parameters");

  double lambda = 1e-3;
  int small_steps = 0;
  bool have_jac = false;
  Eigen::MatrixXd jac(nres, npar);

  while (out.n_evals + 2 * npar + 1 <= opt.max_evals) {
    for (Eigen::Index j = 0; j < npar; ++j) {
      double h = 1e-6 * std::max(1.0, std::abs(out.p[j]));
      Eigen::VectorXd pp = out.p, pm = out.p;
      pp[j] += h;
      pm[j] -= h;
      jac.col(j) = (fn(pp) - fn(pm)) / (2.0 * h);
      out.n_evals += 2;
    }
    if (!jac.allFinite()) throw FitError("non-finite Jacobian");
    have_jac = true;

    Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::VectorXd jtr = jac.transpose() * r;

    bool accepted = false;
    while (out.n_evals < opt.max_evals) {
      Eigen::MatrixXd damped = jtj;
      for (Eigen::Index j = 0; j < npar; ++j)
        damped(j, j) += lambda * std::max(jtj(j, j), 1e-30);
      Eigen::VectorXd step = damped.ldlt().solve(-jtr);
      Eigen::VectorXd ptrial = out.p + step;
      Eigen::VectorXd rtrial = fn(ptrial);
      ++out.n_evals;
      double ctrial = chi2_of(rtrial);
      if (ctrial < out.chi2) {
        double drop = out.chi2 - ctrial;
        bool tiny = drop <= opt.ftol * std::max(out.chi2, 1e-300) ||
                    step.norm() <= opt.xtol * (1.0 + out.p.norm());
        out.p = ptrial;
        r = rtrial;
        out.chi2 = ctrial;
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        small_steps = tiny ? small_steps + 1 : 0;
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
    if (!accepted || small_steps >= 2) {
      out.converged = accepted || small_steps >= 2 || lambda > 1e12;
      break;
    }
  }
  out.converged = out.converged || small_steps >= 2;

  out.cov = Eigen::MatrixXd::Constant(npar, npar,
                                      std::numeric_limits<double>::quiet_NaN());
  if (have_jac) {
    Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (lu.isInvertible()) out.cov = lu.inverse();
  }
  return out;
}

}  // namespace fluxkit
