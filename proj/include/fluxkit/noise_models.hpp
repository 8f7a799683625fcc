#pragma once

#include <cmath>
#include <optional>

#include "fluxkit/constants.hpp"
#include "fluxkit/errors.hpp"
#include "fluxkit/fluxonium.hpp"
#include "fluxkit/stats.hpp"

// Forward decoherence-rate models. Energies enter as GHz and are converted
// to Joules here and nowhere else; flux-noise amplitudes are 1 Hz-referenced
// and in units of Phi0.

namespace fluxkit::noise {

struct ThermalEnv {
  double t_eff_k = 0.020;
};

inline void validate(const ThermalEnv& env) {
  if (!(env.t_eff_k > 0)) throw PreconditionError("t_eff must be > 0");
}

struct NoiseChannelSet {
  double tan_delta_c = 0;
  double a_phi_t1 = 0;  // Phi0
  double a_phi_t2 = 0;  // Phi0
  double tan_delta_tls = 0;
  double tan_delta_l = 0;
  std::optional<double> tan_delta_c_err, a_phi_t1_err, a_phi_t2_err,
      tan_delta_tls_err, tan_delta_l_err;
};

inline void validate(const NoiseChannelSet& ch) {
  if (ch.tan_delta_c < 0 || ch.a_phi_t1 < 0 || ch.a_phi_t2 < 0 ||
      ch.tan_delta_tls < 0 || ch.tan_delta_l < 0)
    throw PreconditionError("channel amplitudes must be non-negative");
}

namespace detail {
inline double omega01(const SpectrumResult& s) {
  return 2.0 * kPi * s.f01_ghz * 1e9;
}
}  // namespace detail

inline double gamma1_dielectric(const SpectrumResult& s,
                                const FluxoniumParams& p, double tan_delta_c,
                                const ThermalEnv& env) {
  if (tan_delta_c < 0) throw PreconditionError("tan_delta_c must be >= 0");
  validate(env);
  if (tan_delta_c == 0) return 0.0;
  double w = detail::omega01(s);
  double ec_j = kPlanck * p.e_c * 1e9;
  double m2 = s.phi_mat_elem_01 * s.phi_mat_elem_01;
  return kHbar * w * w / (4.0 * ec_j) * m2 * tan_delta_c *
         stats::coth(kHbar * w / (2.0 * kBoltzmann * env.t_eff_k));
}

inline double gamma1_flux(const SpectrumResult& s, const FluxoniumParams& p,
                          double a_phi_t1, const ThermalEnv& env) {
  if (a_phi_t1 < 0) throw PreconditionError("a_phi_t1 must be >= 0");
  validate(env);
  if (a_phi_t1 == 0) return 0.0;
  double w = detail::omega01(s);
  double el_j = kPlanck * p.e_l * 1e9;
  double m2 = s.phi_mat_elem_01 * s.phi_mat_elem_01;
  double a_wb = a_phi_t1 * kFluxQuantum;
  return 2.0 * kPi * el_j * el_j /
         (kHbar * kHbar * kReducedFluxQuantum * kReducedFluxQuantum) * m2 *
         a_wb * a_wb / w *
         (1.0 + std::exp(-kHbar * w / (kBoltzmann * env.t_eff_k)));
}

inline double gamma_phi_flux_echo(double dispersion_radps_per_phi0,
                                  double a_phi_t2) {
  if (a_phi_t2 < 0) throw PreconditionError("a_phi_t2 must be >= 0");
  return std::abs(dispersion_radps_per_phi0) * a_phi_t2 * std::sqrt(kLn2);
}

inline double gamma1_tls(const SpectrumResult& s, const FluxoniumParams& p,
                         double tan_delta_tls) {
  if (tan_delta_tls < 0) throw PreconditionError("tan_delta_tls must be >= 0");
  if (tan_delta_tls == 0) return 0.0;
  double w = detail::omega01(s);
  double ec_j = kPlanck * p.e_c * 1e9;
  double m2 = s.phi_mat_elem_01 * s.phi_mat_elem_01;
  return kHbar * w * w / (4.0 * ec_j) * m2 * tan_delta_tls;
}

inline double gamma1_inductive(const SpectrumResult& s,
                               const FluxoniumParams& p, double tan_delta_l,
                               const ThermalEnv& env) {
  if (tan_delta_l < 0) throw PreconditionError("tan_delta_l must be >= 0");
  validate(env);
  if (tan_delta_l == 0) return 0.0;
  double w = detail::omega01(s);
  double el_j = kPlanck * p.e_l * 1e9;
  double m2 = s.phi_mat_elem_01 * s.phi_mat_elem_01;
  return 2.0 * el_j / kHbar * m2 * tan_delta_l *
         stats::coth(kHbar * w / (2.0 * kBoltzmann * env.t_eff_k));
}

// Echo pure-dephasing time from measured T1/T2e via gamma_phi = 1/T2 - 1/(2 T1).
// Negative or zero gamma_phi (T2e >= 2 T1) has no finite dephasing time and
// is the caller's unphysical-point case.
inline double pure_dephasing_rate(double t1_s, double t2_echo_s) {
  if (!(t1_s > 0) || !(t2_echo_s > 0))
    throw PreconditionError("times must be positive");
  return 1.0 / t2_echo_s - 1.0 / (2.0 * t1_s);
}

struct CoherencePrediction {
  std::optional<double> t1_s, t2_echo_s, t_phi_s;
  bool no_decay = false;  // every channel amplitude was zero
};

inline CoherencePrediction predict_coherence(const SpectrumResult& s,
                                             const FluxoniumParams& p,
                                             const NoiseChannelSet& ch,
                                             const ThermalEnv& env) {
  validate(ch);
  validate(env);
  CoherencePrediction out;
  if (ch.tan_delta_c == 0 && ch.a_phi_t1 == 0 && ch.a_phi_t2 == 0 &&
      ch.tan_delta_tls == 0 && ch.tan_delta_l == 0) {
    out.no_decay = true;
    return out;
  }
  double g1 = gamma1_dielectric(s, p, ch.tan_delta_c, env) +
              gamma1_flux(s, p, ch.a_phi_t1, env) +
              gamma1_tls(s, p, ch.tan_delta_tls) +
              gamma1_inductive(s, p, ch.tan_delta_l, env);
  double gphi = gamma_phi_flux_echo(s.dispersion_radps_per_phi0, ch.a_phi_t2);
  if (g1 > 0) out.t1_s = 1.0 / g1;
  if (gphi > 0) out.t_phi_s = 1.0 / gphi;
  double g2 = 0.5 * g1 + gphi;
  if (g2 > 0) out.t2_echo_s = 1.0 / g2;
  return out;
}

inline CoherencePrediction predict_coherence(const FluxoniumParams& p,
                                             FluxBias b,
                                             const NoiseChannelSet& ch,
                                             const ThermalEnv& env) {
  return predict_coherence(diagonalize(p, b), p, ch, env);
}

}  // namespace fluxkit::noise
