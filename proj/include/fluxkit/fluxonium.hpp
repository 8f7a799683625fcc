#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fluxkit/constants.hpp"
#include "fluxkit/errors.hpp"

// Fluxonium spectra in the harmonic-oscillator basis of the (E_C, E_L)
// sub-circuit. The external flux is grouped with the junction term,
// H = 4 E_C n^2 + (E_L/2) phi^2 - E_J cos(phi - 2*pi*phi_ext),
// which is unitarily equivalent to grouping it with the inductor but keeps
// the basis centered on the potential well for every bias, so flux
// periodicity and reflection hold to machine precision instead of being
// limited by basis truncation. All gauge-invariant outputs (f01, the 0-1
// phase matrix element, the dispersion) are unaffected by the grouping.

namespace fluxkit {

struct FluxoniumParams {
  double e_c = 0;  // GHz (E_C/h)
  double e_j = 0;  // GHz
  double e_l = 0;  // GHz
  int basis_size = 70;
};

inline void validate(const FluxoniumParams& p) {
  if (!std::isfinite(p.e_c) || !std::isfinite(p.e_j) || !std::isfinite(p.e_l))
    throw PreconditionError("fluxonium params must be finite");
  if (!(p.e_c > 0) || !(p.e_l > 0) || !(p.e_j >= 0))
    throw PreconditionError("fluxonium params require e_c > 0, e_l > 0, e_j >= 0");
  if (p.basis_size < 10)
    throw PreconditionError("basis_size must be >= 10");
}

struct FluxBias {
  double phi_ext = 0;  // units of Phi0
};

struct SpectrumResult {
  double f01_ghz = 0;
  double phi_mat_elem_01 = 0;            // |<0|phi|1>|
  double dispersion_radps_per_phi0 = 0;  // d(omega01)/d(Phi_ext)
  std::vector<double> eigenvalues_ghz;   // lowest levels, ascending
};

namespace detail {
inline std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}
}  // namespace detail

// Reusable diagonalizer for one parameter set: the cos/sin phase-operator
// matrices are flux-independent, so a sweep only pays one dense eigensolve
// per bias point.
class HamiltonianEngine {
 public:
  explicit HamiltonianEngine(const FluxoniumParams& p)
      : n_(p.basis_size), ej_(p.e_j) {
    validate(p);
    fho_ = std::sqrt(8.0 * p.e_c * p.e_l);
    zpf_ = std::pow(2.0 * p.e_c / p.e_l, 0.25);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n_, n_);
    for (int k = 0; k + 1 < n_; ++k)
      x(k, k + 1) = x(k + 1, k) = zpf_ * std::sqrt(double(k + 1));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x);
    const Eigen::MatrixXd& u = es.eigenvectors();
    Eigen::ArrayXd lam = es.eigenvalues().array();
    cosx_ = u * lam.cos().matrix().asDiagonal() * u.transpose();
    sinx_ = u * lam.sin().matrix().asDiagonal() * u.transpose();
  }

  int basis_size() const { return n_; }
  double phi_zpf() const { return zpf_; }

  struct Levels {
    Eigen::VectorXd evals_ghz;
    double matel01 = -1;  // |<0|phi|1>| when requested
  };

  Levels solve(double phi_ext, int nlev, bool want_matel) const {
    double a = 2.0 * kPi * phi_ext;
    Eigen::MatrixXd h =
        (-ej_ * std::cos(a)) * cosx_ + (-ej_ * std::sin(a)) * sinx_;
    for (int k = 0; k < n_; ++k) h(k, k) += fho_ * (k + 0.5);
    Levels out;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    if (want_matel) {
      es.compute(h);
      const Eigen::MatrixXd& v = es.eigenvectors();
      double m = 0;
      for (int k = 0; k + 1 < n_; ++k)
        m += zpf_ * std::sqrt(double(k + 1)) *
             (v(k, 0) * v(k + 1, 1) + v(k + 1, 0) * v(k, 1));
      out.matel01 = std::abs(m);
    } else {
      es.compute(h, Eigen::EigenvaluesOnly);
    }
    out.evals_ghz = es.eigenvalues().head(nlev);
    return out;
  }

  double f01(double phi_ext) const {
    Levels l = solve(phi_ext, 2, false);
    return l.evals_ghz[1] - l.evals_ghz[0];
  }

 private:
  int n_;
  double ej_, fho_, zpf_;
  Eigen::MatrixXd cosx_, sinx_;
};

namespace detail {

inline SpectrumResult diagonalize_gated(const HamiltonianEngine& base,
                                        const HamiltonianEngine& check,
                                        double phi_ext, double fd_step) {
  HamiltonianEngine::Levels big = check.solve(phi_ext, 6, true);
  double f01_big = big.evals_ghz[1] - big.evals_ghz[0];
  double f01_base = base.f01(phi_ext);
  double resid = std::abs(f01_base - f01_big) /
                 std::max(std::abs(f01_big), 1e-300);
  if (!(resid <= 1e-8))
    throw ConvergenceError(
        "f01 not converged at basis_size " + std::to_string(base.basis_size()) +
        ": relative shift " + sci(resid) + " upon +10 levels (tolerance 1e-8)");
  SpectrumResult r;
  r.f01_ghz = f01_big;
  r.phi_mat_elem_01 = big.matel01;
  r.eigenvalues_ghz.assign(big.evals_ghz.data(),
                           big.evals_ghz.data() + big.evals_ghz.size());
  double fp = check.f01(phi_ext + fd_step);
  double fm = check.f01(phi_ext - fd_step);
  r.dispersion_radps_per_phi0 =
      (fp - fm) / (2.0 * fd_step) * 2.0 * kPi * 1e9;
  return r;
}

}  // namespace detail

inline SpectrumResult diagonalize(const FluxoniumParams& params, FluxBias bias,
                                  double fd_step = 1e-5) {
  validate(params);
  FluxoniumParams bigger = params;
  bigger.basis_size += 10;
  HamiltonianEngine base(params), check(bigger);
  return detail::diagonalize_gated(base, check, bias.phi_ext, fd_step);
}

inline double dispersion(const FluxoniumParams& params, FluxBias bias,
                         double fd_step = 1e-5) {
  return diagonalize(params, bias, fd_step).dispersion_radps_per_phi0;
}

inline std::vector<SpectrumResult> spectrum_sweep(
    const FluxoniumParams& params, const std::vector<FluxBias>& grid,
    double fd_step = 1e-5) {
  validate(params);
  if (grid.empty()) throw PreconditionError("spectrum_sweep: empty flux grid");
  FluxoniumParams bigger = params;
  bigger.basis_size += 10;
  HamiltonianEngine base(params), check(bigger);
  std::vector<SpectrumResult> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      out.push_back(
          detail::diagonalize_gated(base, check, grid[i].phi_ext, fd_step));
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("at grid index " + std::to_string(i) + ": " +
                             e.what());
    }
  }
  return out;
}

}  // namespace fluxkit
