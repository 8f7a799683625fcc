#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fluxkit/errors.hpp"
#include "fluxkit/extraction.hpp"
#include "fluxkit/noise_models.hpp"
#include "fluxkit/stats.hpp"

// Ground-truth generators and the two PSD estimators: Ramsey binary-series
// spectroscopy and the spin-locking conversion.

namespace fluxkit::noisesim {

struct NoiseTrace {
  std::vector<double> samples;  // Phi0
  double t_s = 0;
  double amp_at_1hz_phi0 = 0;   // injected truth
  double beta = 0;
};

struct BinarySeries {
  std::vector<std::uint8_t> bits;
  double t_s = 0;
  double tau0_s = 0;
  double visibility = 0;  // = 2a
  double mean_b = 0;      // commanded, not empirical
  bool saturation_warning = false;
};

struct PsdEstimate {
  std::vector<double> freq_hz;   // DFT bins k/(N t_s), k = 1..N/2
  std::vector<double> s_phi;     // one-sided, Phi0^2/Hz
  std::vector<double> stderr_s_phi;
  double s_w = 0;                // bilateral sampling floor, b(1-b) t_s
  double band_lo_hz = 0;         // method band edges, 1/(2 t_s N) and 1/(2 t_s)
  double band_hi_hz = 0;
};

struct SpinLockPoint {
  double omega_r_radps = 0;
  double gamma_1rho = 0;
  double gamma_1 = 0;
  double dispersion_radps_per_phi0 = 0;
};

// ---------------------------------------------------------------------------
// Generators

inline bool is_pow2(std::size_t n) { return n >= 2 && (n & (n - 1)) == 0; }

// Frequency-domain shaping: white complex Gaussian bins scaled so the
// expected one-sided PSD is amp^2 / f^beta, DC zeroed, inverse transform.
inline NoiseTrace synth_powerlaw_noise(double amp_at_1hz_phi0, double beta,
                                       double t_s, std::size_t n,
                                       std::uint64_t seed) {
  if (!(amp_at_1hz_phi0 >= 0)) throw PreconditionError("amplitude must be >= 0");
  if (!(beta >= 0.0 && beta <= 2.0))
    throw PreconditionError("beta must be in [0, 2]");
  if (!(t_s > 0)) throw PreconditionError("t_s must be positive");
  if (!is_pow2(n)) throw PreconditionError("n must be a power of two (>= 2)");

  const double df = 1.0 / (double(n) * t_s);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;

  std::vector<std::complex<double>> spec(n, {0.0, 0.0});
  auto target = [&](std::size_t k) {
    double f = double(k) * df;
    return amp_at_1hz_phi0 * amp_at_1hz_phi0 / std::pow(f, beta);
  };
  for (std::size_t k = 1; k < n / 2; ++k) {
    double comp_sd = std::sqrt(double(n) * target(k) / (4.0 * t_s));
    spec[k] = {comp_sd * nd(rng), comp_sd * nd(rng)};
    spec[n - k] = std::conj(spec[k]);
  }
  spec[n / 2] = {std::sqrt(double(n) * target(n / 2) / (2.0 * t_s)) * nd(rng),
                 0.0};

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> time;
  fft.inv(time, spec);

  NoiseTrace out;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = time[i].real();
  out.t_s = t_s;
  out.amp_at_1hz_phi0 = amp_at_1hz_phi0;
  out.beta = beta;
  return out;
}

// Linearized Ramsey response: p_n = mean_b + (vis/2) * dispersion * tau0 *
// Phi_n, clamped to [0, 1]. Clamping on more than 1% of samples flags the
// series as saturated.
inline BinarySeries simulate_ramsey_series(const NoiseTrace& trace,
                                           double dispersion_radps_per_phi0,
                                           double tau0_s, double visibility,
                                           double mean_b, std::uint64_t seed) {
  if (trace.samples.size() < 2 || !(trace.t_s > 0))
    throw PreconditionError("trace must have >= 2 samples and t_s > 0");
  if (!(tau0_s > 0) || !(tau0_s < trace.t_s))
    throw PreconditionError("tau0 must satisfy 0 < tau0 < t_s");
  if (!(visibility > 0.0 && visibility <= 1.0))
    throw PreconditionError("visibility must be in (0, 1]");
  if (!(mean_b > 0.0 && mean_b < 1.0))
    throw PreconditionError("mean_b must be in (0, 1)");

  const double a = 0.5 * visibility;
  const double gain = a * dispersion_radps_per_phi0 * tau0_s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  BinarySeries out;
  out.bits.resize(trace.samples.size());
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    double p = mean_b + gain * trace.samples[i];
    if (p < 0.0 || p > 1.0) {
      ++clamped;
      p = p < 0.0 ? 0.0 : 1.0;
    }
    out.bits[i] = u(rng) < p ? 1 : 0;
  }
  out.t_s = trace.t_s;
  out.tau0_s = tau0_s;
  out.visibility = visibility;
  out.mean_b = mean_b;
  out.saturation_warning =
      double(clamped) > 0.01 * double(trace.samples.size());
  return out;
}

// ---------------------------------------------------------------------------
// Ramsey-series estimator

// Bilateral periodogram |Z_k|^2 t_s / N of the raw bits, sampling floor
// b(1-b) t_s subtracted, converted to a one-sided flux PSD. Single-series
// error bars are the exponential-statistics sigma of the raw bin.
inline PsdEstimate estimate_psd(const BinarySeries& series,
                                double dispersion_radps_per_phi0) {
  const std::size_t n = series.bits.size();
  if (n < 16) throw PreconditionError("series too short (need >= 16 bits)");
  if (!(series.t_s > 0) || !(series.tau0_s > 0) ||
      !(series.visibility > 0.0 && series.visibility <= 1.0))
    throw PreconditionError("series protocol parameters invalid");
  if (!(dispersion_radps_per_phi0 != 0.0))
    throw PreconditionError("dispersion must be nonzero");

  std::vector<double> x(n);
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = double(series.bits[i]);
    mean += x[i];
  }
  mean /= double(n);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> z;
  fft.fwd(z, x);

  const double a = 0.5 * series.visibility;
  const double conv = a * series.tau0_s * dispersion_radps_per_phi0;
  const double conv2 = conv * conv;
  const double s_w = mean * (1.0 - mean) * series.t_s;

  PsdEstimate out;
  out.s_w = s_w;
  out.band_lo_hz = 1.0 / (2.0 * series.t_s * double(n));
  out.band_hi_hz = 1.0 / (2.0 * series.t_s);
  // scaled off band_hi so the top bin lands on the band edge exactly
  for (std::size_t k = 1; k <= n / 2; ++k) {
    double s_bi = std::norm(z[k]) * series.t_s / double(n);
    out.freq_hz.push_back(out.band_hi_hz * (2.0 * double(k) / double(n)));
    out.s_phi.push_back(2.0 * (s_bi - s_w) / conv2);
    out.stderr_s_phi.push_back(2.0 * s_bi / conv2);
  }
  return out;
}

// Ensemble mean with empirical per-bin standard errors.
class PsdAccumulator {
 public:
  void add(const PsdEstimate& est) {
    if (m_ == 0) {
      freq_ = est.freq_hz;
      sum_.assign(freq_.size(), 0.0);
      sum2_.assign(freq_.size(), 0.0);
      band_lo_ = est.band_lo_hz;
      band_hi_ = est.band_hi_hz;
    } else if (est.freq_hz != freq_) {
      throw PreconditionError("frequency grids differ across the ensemble");
    }
    for (std::size_t k = 0; k < freq_.size(); ++k) {
      sum_[k] += est.s_phi[k];
      sum2_[k] += est.s_phi[k] * est.s_phi[k];
    }
    sw_sum_ += est.s_w;
    ++m_;
  }

  std::size_t size() const { return m_; }

  PsdEstimate mean() const {
    if (m_ < 2) throw PreconditionError("need >= 2 estimates to average");
    PsdEstimate out;
    out.freq_hz = freq_;
    out.band_lo_hz = band_lo_;
    out.band_hi_hz = band_hi_;
    out.s_w = sw_sum_ / double(m_);
    const double m = double(m_);
    for (std::size_t k = 0; k < freq_.size(); ++k) {
      double mu = sum_[k] / m;
      double var = (sum2_[k] - m * mu * mu) / (m - 1.0);
      out.s_phi.push_back(mu);
      out.stderr_s_phi.push_back(std::sqrt(var > 0 ? var : 0.0) / std::sqrt(m));
    }
    return out;
  }

 private:
  std::vector<double> freq_, sum_, sum2_;
  double sw_sum_ = 0, band_lo_ = 0, band_hi_ = 0;
  std::size_t m_ = 0;
};

// ---------------------------------------------------------------------------
// Spin-locking conversion

struct SpinLockPsdPoint {
  double freq_hz = 0;
  double s_phi = 0;  // Phi0^2/Hz
};

inline SpinLockPsdPoint spinlock_to_psd(const SpinLockPoint& pt) {
  if (!(pt.omega_r_radps > 0) || !(pt.gamma_1 >= 0))
    throw PreconditionError("spin-lock point invalid");
  if (!(pt.dispersion_radps_per_phi0 != 0.0))
    throw PreconditionError("dispersion must be nonzero");
  double gamma_nu = pt.gamma_1rho - 0.5 * pt.gamma_1;
  if (gamma_nu < 0)
    throw PreconditionError("unphysical point: gamma_1rho < gamma_1/2");
  SpinLockPsdPoint out;
  out.freq_hz = pt.omega_r_radps / (2.0 * kPi);
  out.s_phi = 2.0 * gamma_nu /
              (pt.dispersion_radps_per_phi0 * pt.dispersion_radps_per_phi0);
  return out;
}

// ---------------------------------------------------------------------------
// Coherence-dataset generator for extraction round trips

// Median-preserving log-normal scatter on the model T1/T2e; echo times are
// recorded only when the channel set actually dephases. Two normal draws are
// consumed per point regardless, so datasets with and without echo data stay
// draw-for-draw comparable at equal seeds.
inline extraction::CoherenceDataset synth_coherence_dataset(
    const FluxoniumParams& p, const noise::NoiseChannelSet& ch,
    const noise::ThermalEnv& env, const std::vector<double>& phi_ext,
    double rel_noise, std::uint64_t seed) {
  if (!(rel_noise >= 0.0 && rel_noise <= 0.5))
    throw PreconditionError("rel_noise must be in [0, 0.5]");
  validate(p);
  noise::validate(env);
  noise::validate(ch);

  std::vector<FluxBias> biases;
  biases.reserve(phi_ext.size());
  for (double phi : phi_ext) biases.push_back({phi});
  std::vector<SpectrumResult> specs = spectrum_sweep(p, biases);

  extraction::CoherenceDataset ds;
  ds.device_id = "synthetic";
  ds.env = env;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  for (std::size_t i = 0; i < phi_ext.size(); ++i) {
    auto pred = noise::predict_coherence(specs[i], p, ch, env);
    extraction::CoherencePoint pt;
    pt.phi_ext = phi_ext[i];
    pt.f01_ghz = specs[i].f01_ghz;
    double z1 = z(rng), z2 = z(rng);
    if (pred.t1_s) {
      pt.t1_s = *pred.t1_s * std::exp(rel_noise * z1);
      pt.t1_err_s = rel_noise * *pt.t1_s;
    }
    if (pred.t2_echo_s && pred.t_phi_s) {
      pt.t2_echo_s = *pred.t2_echo_s * std::exp(rel_noise * z2);
      pt.t2_echo_err_s = rel_noise * *pt.t2_echo_s;
    }
    ds.points.push_back(pt);
  }
  return ds;
}

}  // namespace fluxkit::noisesim
