#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fluxkit/errors.hpp"
#include "fluxkit/fluxonium.hpp"
#include "fluxkit/lm.hpp"
#include "fluxkit/noise_models.hpp"
#include "fluxkit/stats.hpp"

// Inversion layer: spectrum fits, per-point inverse noise bounds, and the
// automated window/outlier protocol that turns a coherence-vs-flux dataset
// into channel amplitudes with error bars.

namespace fluxkit::extraction {

struct TransitionPoint {
  double phi_ext = 0;      // Phi0
  double f01_meas_ghz = 0;
  double sigma_f_ghz = 0;
};

struct CoherencePoint {
  double phi_ext = 0;  // Phi0
  double f01_ghz = 0;
  std::optional<double> t1_s, t1_err_s;
  std::optional<double> t2_echo_s, t2_echo_err_s;
};

inline void validate(const CoherencePoint& pt) {
  if (!pt.t1_s && !pt.t2_echo_s)
    throw PreconditionError("coherence point needs t1 or t2_echo");
  if ((pt.t1_s && !(*pt.t1_s > 0)) || (pt.t2_echo_s && !(*pt.t2_echo_s > 0)))
    throw PreconditionError("coherence times must be positive");
}

struct CoherenceDataset {
  std::string device_id;
  std::vector<CoherencePoint> points;
  noise::ThermalEnv env;
  std::string wire_sample_id;  // optional link into the material tables
};

// ---------------------------------------------------------------------------
// Spectrum fit

struct SpectrumFit {
  FluxoniumParams params;
  double e_c_err = 0, e_j_err = 0, e_l_err = 0;
  double chi2 = 0;
  double chi2_red = 0;
  std::size_t n_points = 0;
};

// Damped least squares on (log E_C, log E_J, log E_L) with jittered restarts.
// Model evaluations reuse one engine per trial parameter set at the guess's
// basis size; the convergence gate is skipped inside the loop for speed.
inline SpectrumFit fit_spectrum(const std::vector<TransitionPoint>& points,
                                const FluxoniumParams& guess) {
  const std::size_t n = points.size();
  if (n < 6) throw PreconditionError("need >= 6 transition points");
  double lo = points[0].phi_ext, hi = points[0].phi_ext;
  for (const auto& pt : points) {
    if (!(pt.sigma_f_ghz > 0)) throw PreconditionError("sigma_f must be > 0");
    lo = std::min(lo, pt.phi_ext);
    hi = std::max(hi, pt.phi_ext);
  }
  if (!(hi - lo > 0.25))
    throw PreconditionError("flux span must exceed 0.25 Phi0");
  validate(guess);

  auto residual = [&](const Eigen::VectorXd& lp) {
    FluxoniumParams q{std::exp(lp[0]), std::exp(lp[1]), std::exp(lp[2]),
                      guess.basis_size};
    HamiltonianEngine eng(q);
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      r[static_cast<Eigen::Index>(i)] =
          (eng.f01(points[i].phi_ext) - points[i].f01_meas_ghz) /
          points[i].sigma_f_ghz;
    return r;
  };

  Eigen::Vector3d lp0(std::log(guess.e_c), std::log(guess.e_j),
                      std::log(guess.e_l));
  const double dof = static_cast<double>(std::max<std::size_t>(1, n - 3));
  const double good_enough = 1.0 + 6.0 * std::sqrt(2.0 / dof);

  LmOptions opts;
  opts.max_evals = 500;
  bool have_best = false;
  LmResult best;
  for (int start = 0; start < 5; ++start) {
    Eigen::VectorXd lp = lp0;
    if (start > 0) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(start));
      std::uniform_real_distribution<double> jitter(-0.2, 0.2);
      for (int j = 0; j < 3; ++j) lp[j] += jitter(rng);
    }
    LmResult res;
    try {
      res = lm_fit(residual, lp, opts);
    } catch (const FitError&) {
      continue;
    }
    if (!res.converged) continue;
    if (!have_best || res.chi2 < best.chi2) {
      best = res;
      have_best = true;
    }
    if (best.chi2 / dof < good_enough) break;
  }
  if (!have_best)
    throw FitError("spectrum fit did not converge within the restart budget");

  SpectrumFit out;
  out.params = FluxoniumParams{std::exp(best.p[0]), std::exp(best.p[1]),
                               std::exp(best.p[2]), guess.basis_size};
  out.chi2 = best.chi2;
  out.chi2_red = best.chi2 / dof;
  out.n_points = n;
  double scale = std::sqrt(std::max(out.chi2_red, 1.0));
  double* errs[3] = {&out.e_c_err, &out.e_j_err, &out.e_l_err};
  double vals[3] = {out.params.e_c, out.params.e_j, out.params.e_l};
  for (int j = 0; j < 3; ++j)
    *errs[j] = vals[j] * std::sqrt(best.cov(j, j)) * scale;
  return out;
}

// ---------------------------------------------------------------------------
// Per-point inverse bounds
//
// With Gamma1 the sum of all relaxation channels, 1/T1 >= K_ch * amp for each
// channel's unit-amplitude rate K_ch, so amp <= 1/(T1 * K_ch) (and with the
// quadratic flux coupling, A <= 1/sqrt(T1 * K_flux(A=1))). Longer T1 means a
// tighter bound.

// Slope magnitudes below this are treated as the sweet spot, where the
// dephasing inversion is singular.
inline constexpr double kMinDispersionRadpsPerPhi0 = 2.0 * kPi * 1e6;

namespace detail {

inline double bound_tan_delta(double t1_s, const SpectrumResult& s,
                              const FluxoniumParams& p,
                              const noise::ThermalEnv& env) {
  return 1.0 / (t1_s * noise::gamma1_dielectric(s, p, 1.0, env));
}

inline double bound_flux_amp_t1(double t1_s, const SpectrumResult& s,
                                const FluxoniumParams& p,
                                const noise::ThermalEnv& env) {
  return 1.0 / std::sqrt(t1_s * noise::gamma1_flux(s, p, 1.0, env));
}

inline double flux_amp_t2(double t1_s, double t2_echo_s,
                          const SpectrumResult& s) {
  if (std::abs(s.dispersion_radps_per_phi0) <= kMinDispersionRadpsPerPhi0)
    throw PreconditionError("dispersion below sweet-spot threshold");
  double gphi = noise::pure_dephasing_rate(t1_s, t2_echo_s);
  if (!(gphi > 0))
    throw PreconditionError("unphysical point: t2_echo >= 2*t1");
  return gphi / (std::abs(s.dispersion_radps_per_phi0) * std::sqrt(kLn2));
}

}  // namespace detail

inline double bound_tan_delta(const CoherencePoint& pt,
                              const FluxoniumParams& p,
                              const noise::ThermalEnv& env) {
  if (!pt.t1_s) throw PreconditionError("t1 required for tan_delta bound");
  validate(pt);
  return detail::bound_tan_delta(*pt.t1_s, diagonalize(p, {pt.phi_ext}), p,
                                 env);
}

inline double bound_flux_amp_t1(const CoherencePoint& pt,
                                const FluxoniumParams& p,
                                const noise::ThermalEnv& env) {
  if (!pt.t1_s) throw PreconditionError("t1 required for flux amplitude bound");
  validate(pt);
  return detail::bound_flux_amp_t1(*pt.t1_s, diagonalize(p, {pt.phi_ext}), p,
                                   env);
}

inline double flux_amp_t2(const CoherencePoint& pt, const FluxoniumParams& p) {
  if (!pt.t1_s || !pt.t2_echo_s)
    throw PreconditionError("t1 and t2_echo required for dephasing amplitude");
  validate(pt);
  return detail::flux_amp_t2(*pt.t1_s, *pt.t2_echo_s,
                             diagonalize(p, {pt.phi_ext}));
}

// ---------------------------------------------------------------------------
// Window and outlier protocol

enum class BoundKind { TanDeltaC, FluxAmpT1, FluxAmpT2 };

// Frequency window around the 10 most constraining points. The dephasing
// amplitude has no frequency window; every valid point enters.
inline std::vector<std::size_t> select_window(
    const std::vector<CoherencePoint>& points,
    const std::vector<std::optional<double>>& bounds, BoundKind kind) {
  if (points.size() != bounds.size())
    throw PreconditionError("bounds/points size mismatch");
  std::vector<std::size_t> valid;
  for (std::size_t i = 0; i < bounds.size(); ++i)
    if (bounds[i]) valid.push_back(i);
  if (valid.size() < 10)
    throw PreconditionError("need >= 10 points with a defined bound");
  if (kind == BoundKind::FluxAmpT2) return valid;

  std::vector<std::size_t> order(valid);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (*bounds[a] != *bounds[b]) return *bounds[a] < *bounds[b];
    return a < b;
  });
  double f_r = 0;
  for (std::size_t k = 0; k < 10; ++k) f_r += points[order[k]].f01_ghz;
  f_r /= 10.0;

  std::vector<std::size_t> sel;
  for (std::size_t i : valid)
    if (points[i].f01_ghz >= 0.8 * f_r && points[i].f01_ghz <= 1.2 * f_r)
      sel.push_back(i);
  return sel;
}

struct OutlierResult {
  std::vector<std::size_t> kept;  // indices into the input values
  double x0 = 0, sigma = 0;
};

// Quartile cut, then a Gaussian fit on the central 90%, then a 2-sigma keep
// window. The loss-tangent bound is one-sided: only values at or below the
// fitted center survive.
inline OutlierResult reject_outliers(const std::vector<double>& values,
                                     BoundKind kind) {
  if (values.size() < 5) throw PreconditionError("need >= 5 bound values");
  double q1 = stats::quantile(values, 0.25);
  std::vector<std::size_t> surv;
  std::vector<double> sv;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] <= 5.0 * q1) {
      surv.push_back(i);
      sv.push_back(values[i]);
    }
  OutlierResult out;
  double vmin = *std::min_element(sv.begin(), sv.end());
  double vmax = *std::max_element(sv.begin(), sv.end());
  if (vmin == vmax) {
    out.kept = surv;
    out.x0 = vmin;
    out.sigma = 0;
    return out;
  }
  stats::GaussianFit g = stats::fit_gaussian_trimmed(sv);
  out.x0 = g.x0;
  out.sigma = g.sigma;
  double lo = g.x0 - 2.0 * g.sigma;
  double hi = kind == BoundKind::TanDeltaC ? g.x0 : g.x0 + 2.0 * g.sigma;
  for (std::size_t j = 0; j < sv.size(); ++j)
    if (sv[j] >= lo && sv[j] <= hi) out.kept.push_back(surv[j]);
  if (out.kept.empty()) {
    // degenerate window (possible for the one-sided keep on bimodal data):
    // fall back to the single most central value
    std::size_t best = 0;
    for (std::size_t j = 1; j < sv.size(); ++j)
      if (std::abs(sv[j] - g.x0) < std::abs(sv[best] - g.x0)) best = j;
    out.kept.push_back(surv[best]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full per-device report

// Summary value/err are the fitted Gaussian center and width from the
// outlier step. The mean of the kept values is not used: the one-sided keep
// window makes it sit systematically ~0.7 sigma below center, which round
// trips on synthetic data resolve in favor of the fit parameters.
struct QuantityExtract {
  bool ok = false;    // protocol completed; value/err valid
  std::string error;  // labeled sub-step failure when !ok
  double value = 0, err = 0;
  std::vector<std::size_t> selected;             // indices into dataset.points
  std::vector<std::optional<double>> bounds;     // per dataset point
};

struct ExtractionReport {
  std::optional<QuantityExtract> tan_delta_c, a_phi_t1, a_phi_t2;
};

inline ExtractionReport extract_report(const CoherenceDataset& ds,
                                       const FluxoniumParams& p,
                                       const noise::ThermalEnv& env) {
  if (ds.points.size() < 10)
    throw PreconditionError("need >= 10 coherence points");
  for (const auto& pt : ds.points) validate(pt);
  validate(env);
  validate(p);

  std::vector<FluxBias> grid;
  grid.reserve(ds.points.size());
  for (const auto& pt : ds.points) grid.push_back({pt.phi_ext});
  std::vector<SpectrumResult> spec = spectrum_sweep(p, grid);

  const std::size_t n = ds.points.size();
  std::vector<std::optional<double>> b_tan(n), b_at1(n), b_at2(n);
  bool any_t1 = false, any_t2_pair = false;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pt = ds.points[i];
    if (pt.t1_s) {
      any_t1 = true;
      b_tan[i] = detail::bound_tan_delta(*pt.t1_s, spec[i], p, env);
      b_at1[i] = detail::bound_flux_amp_t1(*pt.t1_s, spec[i], p, env);
    }
    if (pt.t1_s && pt.t2_echo_s) {
      any_t2_pair = true;
      double gphi = noise::pure_dephasing_rate(*pt.t1_s, *pt.t2_echo_s);
      if (gphi > 0 && std::abs(spec[i].dispersion_radps_per_phi0) >
                          kMinDispersionRadpsPerPhi0)
        b_at2[i] = gphi / (std::abs(spec[i].dispersion_radps_per_phi0) *
                           std::sqrt(kLn2));
    }
  }

  // A quantity whose window or outlier step fails its precondition (e.g. no
  // localized bound minimum) is reported with the labeled error; the other
  // quantities still extract.
  auto run = [&](const char* name, BoundKind kind,
                 std::vector<std::optional<double>>&& bounds) {
    QuantityExtract q;
    try {
      std::vector<std::size_t> win = select_window(ds.points, bounds, kind);
      std::vector<double> vals;
      vals.reserve(win.size());
      for (std::size_t i : win) vals.push_back(*bounds[i]);
      OutlierResult res = reject_outliers(vals, kind);
      for (std::size_t j : res.kept) q.selected.push_back(win[j]);
      q.value = res.x0;
      q.err = res.sigma;
      q.ok = true;
    } catch (const PreconditionError& e) {
      q.ok = false;
      q.error = std::string(name) + ": " + e.what();
      q.selected.clear();
    }
    q.bounds = std::move(bounds);
    return q;
  };

  ExtractionReport rep;
  if (any_t1) {
    rep.tan_delta_c = run("tan_delta_c", BoundKind::TanDeltaC, std::move(b_tan));
    rep.a_phi_t1 = run("a_phi_t1", BoundKind::FluxAmpT1, std::move(b_at1));
  }
  if (any_t2_pair)
    rep.a_phi_t2 = run("a_phi_t2", BoundKind::FluxAmpT2, std::move(b_at2));
  return rep;
}

// ---------------------------------------------------------------------------
// Relaxation-model comparison

struct T1ChannelMask {
  bool dielectric = false, flux = false, tls = false, inductive = false;
};

inline constexpr T1ChannelMask kDielectricFlux{true, true, false, false};
inline constexpr T1ChannelMask kTlsFlux{false, true, true, false};
inline constexpr T1ChannelMask kInductiveFlux{false, true, false, true};

struct T1ModelFit {
  noise::NoiseChannelSet channels;
  double chi2 = 0;      // weighted SSR in log-rate space; ranks models
  double chi2_red = 0;
  std::vector<std::size_t> point_indices;  // dataset points used
  std::vector<double> residuals;           // weighted log residual per point
};

// Weighted least squares of log(1/T1) against the chosen channel combination,
// parametrized by log amplitudes (log tan_delta, log A^2) so positivity is
// built in.
inline T1ModelFit fit_t1_model(const CoherenceDataset& ds,
                               const FluxoniumParams& p,
                               const noise::ThermalEnv& env,
                               const T1ChannelMask& mask) {
  validate(p);
  validate(env);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.points.size(); ++i)
    if (ds.points[i].t1_s) {
      validate(ds.points[i]);
      idx.push_back(i);
    }
  if (idx.size() < 10) throw PreconditionError("need >= 10 T1 points");
  int n_active = static_cast<int>(mask.dielectric) +
                 static_cast<int>(mask.flux) + static_cast<int>(mask.tls) +
                 static_cast<int>(mask.inductive);
  if (n_active == 0) throw PreconditionError("no active channels");

  std::vector<FluxBias> grid;
  for (std::size_t i : idx) grid.push_back({ds.points[i].phi_ext});
  std::vector<SpectrumResult> spec = spectrum_sweep(p, grid);

  const std::size_t n = idx.size();
  // unit-amplitude kernel per active channel; flux scales with A^2
  std::vector<std::vector<double>> kern;
  enum Channel { kDiel, kFlux, kTls, kInd };
  std::vector<Channel> active;
  auto add = [&](Channel c, auto&& rate) {
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = rate(spec[i]);
    kern.push_back(std::move(k));
    active.push_back(c);
  };
  if (mask.dielectric)
    add(kDiel, [&](const SpectrumResult& s) {
      return noise::gamma1_dielectric(s, p, 1.0, env);
    });
  if (mask.flux)
    add(kFlux, [&](const SpectrumResult& s) {
      return noise::gamma1_flux(s, p, 1.0, env);
    });
  if (mask.tls)
    add(kTls,
        [&](const SpectrumResult& s) { return noise::gamma1_tls(s, p, 1.0); });
  if (mask.inductive)
    add(kInd, [&](const SpectrumResult& s) {
      return noise::gamma1_inductive(s, p, 1.0, env);
    });

  std::vector<double> g_meas(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pt = ds.points[idx[i]];
    g_meas[i] = 1.0 / *pt.t1_s;
    w[i] = pt.t1_err_s && *pt.t1_err_s > 0 ? *pt.t1_s / *pt.t1_err_s : 1.0;
  }

  auto residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      double m = 0;
      for (int c = 0; c < n_active; ++c) m += kern[c][i] * std::exp(x[c]);
      r[static_cast<Eigen::Index>(i)] = w[i] * (std::log(m) - std::log(g_meas[i]));
    }
    return r;
  };

  Eigen::VectorXd x0(n_active);
  for (int c = 0; c < n_active; ++c) {
    std::vector<double> ratio(n);
    for (std::size_t i = 0; i < n; ++i) ratio[i] = g_meas[i] / kern[c][i];
    x0[c] = std::log(stats::median(ratio) / n_active);
  }

  LmOptions opts;
  opts.max_evals = 500;
  LmResult res = lm_fit(residual, x0, opts);
  if (!res.converged) throw FitError("relaxation model fit did not converge");

  T1ModelFit out;
  out.chi2 = res.chi2;
  out.chi2_red =
      res.chi2 / static_cast<double>(std::max<std::size_t>(
                     1, n - static_cast<std::size_t>(n_active)));
  out.point_indices = idx;
  Eigen::VectorXd r = residual(res.p);
  out.residuals.assign(r.data(), r.data() + r.size());
  double scale = std::sqrt(std::max(out.chi2_red, 1.0));
  for (int c = 0; c < n_active; ++c) {
    double sx = std::sqrt(res.cov(c, c)) * scale;
    double amp = std::exp(res.p[c]);
    switch (active[c]) {
      case kDiel:
        out.channels.tan_delta_c = amp;
        out.channels.tan_delta_c_err = amp * sx;
        break;
      case kFlux:
        out.channels.a_phi_t1 = std::exp(0.5 * res.p[c]);
        out.channels.a_phi_t1_err = out.channels.a_phi_t1 * 0.5 * sx;
        break;
      case kTls:
        out.channels.tan_delta_tls = amp;
        out.channels.tan_delta_tls_err = amp * sx;
        break;
      case kInd:
        out.channels.tan_delta_l = amp;
        out.channels.tan_delta_l_err = amp * sx;
        break;
    }
  }
  return out;
}

}  // namespace fluxkit::extraction
