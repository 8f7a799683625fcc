#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fluxkit/constants.hpp"
#include "fluxkit/errors.hpp"
#include "fluxkit/stats.hpp"

// Conversions between the wire's transport quantities and the qubit-side
// inductance/noise quantities, plus the disorder power-law and
// weak-localization slope fits.

namespace fluxkit::material {

struct WireSample {
  double t_m = 0, w_m = 0, p_m = 0;
  std::optional<double> rho_xx_ohm_m;  // at 10 K
  std::optional<double> n_e_per_m3;
  std::optional<double> k_f_per_m;
  std::optional<double> mfp_m;
  std::optional<double> lambda_m;
  std::optional<double> delta0_j;
};

inline void validate(const WireSample& ws) {
  if (!(ws.t_m > 0) || !(ws.w_m > 0) || !(ws.p_m > 0))
    throw PreconditionError("wire geometry must be positive");
  for (const auto* f : {&ws.rho_xx_ohm_m, &ws.n_e_per_m3, &ws.k_f_per_m,
                        &ws.mfp_m, &ws.lambda_m, &ws.delta0_j})
    if (*f && !(**f > 0))
      throw PreconditionError("wire transport fields must be positive");
}

// Homogeneous current distribution needs lambda > w >> t.
inline bool regime_ok(const WireSample& ws) {
  return ws.lambda_m && *ws.lambda_m > ws.w_m && ws.w_m >= 10.0 * ws.t_m;
}

struct TransportCurve {
  std::vector<double> temperature_k;
  std::vector<double> r_s_ohm_sq;
  std::vector<double> field_t;    // Hall branch, optional
  std::vector<double> r_xy_ohm;
};

inline void validate(const TransportCurve& c) {
  if (c.temperature_k.size() != c.r_s_ohm_sq.size())
    throw PreconditionError("temperature/R_s size mismatch");
  for (std::size_t i = 0; i + 1 < c.temperature_k.size(); ++i)
    if (!(c.temperature_k[i] < c.temperature_k[i + 1]))
      throw PreconditionError("temperature grid must be strictly increasing");
  for (double r : c.r_s_ohm_sq)
    if (!(r > 0)) throw PreconditionError("sheet resistance must be positive");
  if (c.field_t.size() != c.r_xy_ohm.size())
    throw PreconditionError("field/R_xy size mismatch");
  for (std::size_t i = 0; i + 1 < c.field_t.size(); ++i)
    if (!(c.field_t[i] < c.field_t[i + 1]))
      throw PreconditionError("field grid must be strictly increasing");
}

// ---------------------------------------------------------------------------
// Kinetic inductance and penetration depth

inline double lk_from_el(double e_l_ghz, double w_m, double p_m) {
  if (!(e_l_ghz > 0) || !(w_m > 0) || !(p_m > 0))
    throw PreconditionError("lk_from_el: inputs must be positive");
  double phi0_2pi = kReducedFluxQuantum;
  return (w_m / p_m) * phi0_2pi * phi0_2pi / (kPlanck * e_l_ghz * 1e9);
}

inline double lambda_from_lk(double l_k_h_sq, double t_m) {
  if (!(l_k_h_sq > 0) || !(t_m > 0))
    throw PreconditionError("lambda_from_lk: inputs must be positive");
  return std::sqrt(l_k_h_sq * t_m / kMu0);
}

inline double lk_from_lambda(double lambda_m, double t_m) {
  if (!(lambda_m > 0) || !(t_m > 0))
    throw PreconditionError("lk_from_lambda: inputs must be positive");
  return kMu0 * lambda_m * lambda_m / t_m;
}

inline double bcs_gap(double t_c_k) {
  if (!(t_c_k > 0)) throw PreconditionError("T_c must be positive");
  return 1.764 * kBoltzmann * t_c_k;
}

inline double lk_from_resistivity(double rho_xx_ohm_m,
                                  std::optional<double> delta0_j, double t_m) {
  if (!delta0_j)
    throw PreconditionError("superconducting gap required (pass delta0 or a T_c via bcs_gap)");
  if (!(rho_xx_ohm_m > 0) || !(*delta0_j > 0) || !(t_m > 0))
    throw PreconditionError("lk_from_resistivity: inputs must be positive");
  return kHbar * rho_xx_ohm_m / (kPi * *delta0_j * t_m);
}

// ---------------------------------------------------------------------------
// Disorder measures

inline double ioffe_regel(double rho_xx_ohm_m, double n_e_per_m3) {
  if (!(rho_xx_ohm_m > 0) || !(n_e_per_m3 > 0))
    throw PreconditionError("ioffe_regel: inputs must be positive");
  double q2 = kElementaryCharge * kElementaryCharge;
  return kHbar / q2 * std::pow(3.0 * kPi * kPi, 2.0 / 3.0) *
         std::pow(n_e_per_m3, -1.0 / 3.0) / rho_xx_ohm_m;
}

inline double resistivity_from_kfl(double k_f_per_m, double mfp_m) {
  if (!(k_f_per_m > 0) || !(mfp_m > 0))
    throw PreconditionError("resistivity_from_kfl: inputs must be positive");
  double q2 = kElementaryCharge * kElementaryCharge;
  return 3.0 * kPi * kPi * kHbar / (q2 * k_f_per_m * k_f_per_m * mfp_m);
}

// The field grid already holds mu0*H in tesla, so the Hall slope comes
// straight off the stored values.
inline double carrier_density_hall(const TransportCurve& c, double t_m) {
  validate(c);
  if (!(t_m > 0)) throw PreconditionError("thickness must be positive");
  if (c.field_t.size() < 3)
    throw PreconditionError("need >= 3 Hall points");
  stats::LineFit fit = stats::ols(c.field_t, c.r_xy_ohm);
  if (!(fit.slope > 0))
    throw PreconditionError("Hall slope must be positive for electron-like carriers");
  if (std::abs(fit.slope) < 2.0 * fit.slope_err)
    throw PreconditionError("Hall slope not significant (|s| < 2 sigma)");
  return 1.0 / (kElementaryCharge * t_m * fit.slope);
}

// ---------------------------------------------------------------------------
// Spin-defect density

struct SpinDefectResult {
  double m2_sigma_per_m2 = 0;  // (m_B/mu_B)^2 * areal density
  double sigma_per_m2 = 0;
  bool regime_warning = false;
};

// m_factor is m_B in Bohr magnetons; the tabulated quantity is m^2 sigma.
inline SpinDefectResult spin_density(double a_phi_t2_phi0,
                                     const WireSample& ws,
                                     double m_factor = 1.0) {
  validate(ws);
  if (!(a_phi_t2_phi0 > 0) || !(m_factor > 0))
    throw PreconditionError("spin_density: inputs must be positive");
  double a_wb = a_phi_t2_phi0 * kFluxQuantum;
  double mub2 = kBohrMagneton * kBohrMagneton;
  SpinDefectResult out;
  out.m2_sigma_per_m2 =
      24.0 * kLn2 * a_wb * a_wb / (kMu0 * kMu0 * mub2) * (ws.w_m / ws.p_m);
  out.sigma_per_m2 = out.m2_sigma_per_m2 / (m_factor * m_factor);
  out.regime_warning = !regime_ok(ws);
  return out;
}

// Total flux variance from an areal spin density; inverse consistency check
// for spin_density (composing the two returns 2 A^2 ln2).
inline double flux_variance_check(double sigma_per_m2, double w_m, double p_m,
                                  double m_factor = 1.0) {
  if (sigma_per_m2 < 0 || !(w_m > 0) || !(p_m > 0) || !(m_factor > 0))
    throw PreconditionError("flux_variance_check: bad inputs");
  double mb = m_factor * kBohrMagneton;
  return kMu0 * kMu0 * mb * mb * sigma_per_m2 / 12.0 * (p_m / w_m);
}

// ---------------------------------------------------------------------------
// Disorder power law

struct PowerLawFit {
  double alpha = 0, alpha_err = 0;
  double prefactor = 0;  // sigma = prefactor * rho^alpha
  double r2 = 0;
  std::size_t n = 0;
};

inline PowerLawFit fit_power_law(
    const std::vector<std::pair<double, double>>& rho_sigma) {
  if (rho_sigma.size() < 4)
    throw PreconditionError("need >= 4 (rho, sigma) pairs");
  std::vector<double> lx, ly;
  for (const auto& [rho, sigma] : rho_sigma) {
    if (!(rho > 0) || !(sigma > 0))
      throw PreconditionError("power-law pairs must be positive");
    lx.push_back(std::log(rho));
    ly.push_back(std::log(sigma));
  }
  stats::LineFit fit = stats::ols(lx, ly);
  PowerLawFit out;
  out.alpha = fit.slope;
  out.alpha_err = fit.slope_err;
  out.prefactor = std::exp(fit.intercept);
  out.r2 = fit.r2;
  out.n = rho_sigma.size();
  return out;
}

// One point per wafer (device-name prefix before '_'), arithmetic mean of
// rho and sigma over its devices.
inline std::vector<std::pair<double, double>> wafer_average(
    const std::vector<std::string>& device_ids,
    const std::vector<std::pair<double, double>>& rho_sigma) {
  if (device_ids.size() != rho_sigma.size())
    throw PreconditionError("device/pair size mismatch");
  std::vector<std::string> wafers;
  std::vector<std::pair<double, double>> sums;
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < device_ids.size(); ++i) {
    std::string w = device_ids[i].substr(0, device_ids[i].find('_'));
    std::size_t j = 0;
    for (; j < wafers.size(); ++j)
      if (wafers[j] == w) break;
    if (j == wafers.size()) {
      wafers.push_back(w);
      sums.emplace_back(0.0, 0.0);
      counts.push_back(0);
    }
    sums[j].first += rho_sigma[i].first;
    sums[j].second += rho_sigma[i].second;
    ++counts[j];
  }
  for (std::size_t j = 0; j < sums.size(); ++j) {
    sums[j].first /= double(counts[j]);
    sums[j].second /= double(counts[j]);
  }
  return sums;
}

// ---------------------------------------------------------------------------
// Weak-localization slope

struct WeakLocalizationFit {
  double slope = 0, slope_err = 0;
  double r2 = 0;
  double sigma_e0 = 0;  // S/m
};

// log-log slope of the conductivity rise above the residual value, fitted in
// a temperature window above T_c. sigma_e0 defaults to the linear
// extrapolation of the in-window conductivity to T = 0; a measured high-field
// value can be supplied instead.
inline WeakLocalizationFit weak_localization_slope(
    const TransportCurve& c, double t_m, double window_lo_k = 15.0,
    double window_hi_k = 30.0, std::optional<double> sigma_e0 = {}) {
  validate(c);
  if (!(t_m > 0)) throw PreconditionError("thickness must be positive");
  if (!(window_lo_k > 0) || !(window_hi_k > window_lo_k))
    throw PreconditionError("bad fit window");
  if (c.temperature_k.empty() || c.temperature_k.front() > window_lo_k ||
      c.temperature_k.back() < window_hi_k)
    throw PreconditionError("curve must cover the fit window");

  std::vector<double> tw, sw;
  for (std::size_t i = 0; i < c.temperature_k.size(); ++i)
    if (c.temperature_k[i] >= window_lo_k &&
        c.temperature_k[i] <= window_hi_k) {
      tw.push_back(c.temperature_k[i]);
      sw.push_back(1.0 / (c.r_s_ohm_sq[i] * t_m));
    }
  if (tw.size() < 4)
    throw PreconditionError("need >= 4 points in the fit window");

  WeakLocalizationFit out;
  out.sigma_e0 = sigma_e0 ? *sigma_e0 : stats::ols(tw, sw).intercept;

  std::vector<double> lt, ld;
  for (std::size_t i = 0; i < tw.size(); ++i) {
    double d = sw[i] - out.sigma_e0;
    if (!(d > 0))
      throw RegimeError("conductivity does not rise above sigma_e(0) in the fit window");
    lt.push_back(std::log(tw[i]));
    ld.push_back(std::log(d));
  }
  stats::LineFit fit = stats::ols(lt, ld);
  out.slope = fit.slope;
  out.slope_err = fit.slope_err;
  out.r2 = fit.r2;
  return out;
}

}  // namespace fluxkit::material
