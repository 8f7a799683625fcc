// fluxkit: spectra, decoherence-channel extraction, material conversions,
// and flux-noise PSD estimation from the command line.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fluxkit/extraction.hpp"
#include "fluxkit/fluxonium.hpp"
#include "fluxkit/io.hpp"
#include "fluxkit/material.hpp"
#include "fluxkit/noise_models.hpp"
#include "fluxkit/noise_sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fluxkit;

namespace {

constexpr const char* kSchemaVersion = "1";

struct Opts {
  std::string params, input, out = ".";
  std::string format = "csv";
  std::uint64_t seed = 0;
  int basis_size = 0;  // 0 = keep params file / library default
  double teff_mk = 0;
  double phi_min = 0.0, phi_max = 1.0;
  int phi_points = 201;
};

std::string fmt_num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

// One table cell: number, string, or empty. JSON output keeps the types.
using Cell = json;

std::string cell_csv(const Cell& c) {
  if (c.is_null()) return "";
  if (c.is_string()) return c.get<std::string>();
  return fmt_num(c.get<double>());
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw UsageError("cannot create output dir " + out);
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw UsageError("cannot write " + p.string());
  return f;
}

void write_table(const fs::path& dir, const std::string& base,
                 const std::vector<std::string>& cols,
                 const std::vector<std::vector<Cell>>& rows,
                 const std::string& format) {
  if (format == "json") {
    json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["columns"] = cols;
    doc["rows"] = rows;
    auto f = open_out(dir / (base + ".json"));
    f << doc.dump(2) << "\n";
    return;
  }
  auto f = open_out(dir / (base + ".csv"));
  for (std::size_t i = 0; i < cols.size(); ++i)
    f << cols[i] << (i + 1 < cols.size() ? "," : "\n");
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      f << cell_csv(row[i]) << (i + 1 < row.size() ? "," : "\n");
  }
}

void write_report(const fs::path& dir, const std::string& base, json doc) {
  doc["schema_version"] = kSchemaVersion;
  auto f = open_out(dir / (base + ".json"));
  f << doc.dump(2) << "\n";
}

FluxoniumParams load_params(const Opts& o) {
  if (o.params.empty()) throw UsageError("--params is required");
  FluxoniumParams p = io::load_fluxonium_params(o.params);
  if (o.basis_size > 0) p.basis_size = o.basis_size;
  return p;
}

// ---------------------------------------------------------------------------

int run_spectrum(const Opts& o) {
  FluxoniumParams p = load_params(o);
  if (o.phi_points < 2) throw UsageError("--phi-points must be >= 2");
  if (!(o.phi_max > o.phi_min))
    throw UsageError("--phi-max must exceed --phi-min");
  fs::path dir = prepare_out_dir(o.out);

  std::vector<FluxBias> grid(o.phi_points);
  for (int i = 0; i < o.phi_points; ++i)
    grid[i].phi_ext = o.phi_min + (o.phi_max - o.phi_min) * double(i) /
                                      double(o.phi_points - 1);
  std::vector<SpectrumResult> specs = spectrum_sweep(p, grid);

  std::vector<std::vector<Cell>> rows;
  for (int i = 0; i < o.phi_points; ++i)
    rows.push_back({grid[i].phi_ext, specs[i].f01_ghz,
                    specs[i].phi_mat_elem_01,
                    specs[i].dispersion_radps_per_phi0});
  write_table(dir, "spectrum",
              {"phi_ext_phi0", "f01_ghz", "matelem_phi01",
               "dispersion_radps_per_phi0"},
              rows, o.format);

  std::size_t nlev = specs.empty() ? 0 : std::min<std::size_t>(
                                             6, specs[0].eigenvalues_ghz.size());
  std::vector<std::string> cols{"phi_ext_phi0"};
  for (std::size_t k = 0; k < nlev; ++k)
    cols.push_back("level" + std::to_string(k) + "_ghz");
  std::vector<std::vector<Cell>> lrows;
  for (int i = 0; i < o.phi_points; ++i) {
    std::vector<Cell> row{grid[i].phi_ext};
    for (std::size_t k = 0; k < nlev; ++k)
      row.push_back(specs[i].eigenvalues_ghz[k]);
    lrows.push_back(row);
  }
  write_table(dir, "levels", cols, lrows, o.format);
  return 0;
}

int run_fit_spectrum(const Opts& o) {
  FluxoniumParams guess = load_params(o);
  if (o.input.empty()) throw UsageError("--input is required");
  fs::path dir = prepare_out_dir(o.out);

  auto points = io::load_transitions_csv(o.input);
  extraction::SpectrumFit fit = extraction::fit_spectrum(points, guess);

  json doc;
  doc["e_c_ghz"] = {{"value", fit.params.e_c}, {"err", fit.e_c_err}};
  doc["e_j_ghz"] = {{"value", fit.params.e_j}, {"err", fit.e_j_err}};
  doc["e_l_ghz"] = {{"value", fit.params.e_l}, {"err", fit.e_l_err}};
  doc["basis_size"] = fit.params.basis_size;
  doc["chi2"] = fit.chi2;
  doc["chi2_red"] = fit.chi2_red;
  doc["n_points"] = fit.n_points;
  write_report(dir, "fit", doc);

  std::vector<FluxBias> grid;
  for (const auto& pt : points) grid.push_back({pt.phi_ext});
  std::vector<SpectrumResult> specs = spectrum_sweep(fit.params, grid);
  std::vector<std::vector<Cell>> rows;
  for (std::size_t i = 0; i < points.size(); ++i)
    rows.push_back({points[i].phi_ext, points[i].f01_meas_ghz,
                    specs[i].f01_ghz,
                    points[i].f01_meas_ghz - specs[i].f01_ghz});
  write_table(dir, "residuals",
              {"phi_ext_phi0", "f01_meas_ghz", "f01_fit_ghz", "residual_ghz"},
              rows, o.format);
  return 0;
}

json quantity_json(const std::optional<extraction::QuantityExtract>& q) {
  if (!q) return nullptr;
  json j;
  j["ok"] = q->ok;
  j["value"] = q->value;
  j["err"] = q->err;
  j["n_selected"] = q->selected.size();
  j["selected"] = q->selected;
  if (!q->ok) j["error"] = q->error;
  return j;
}

int run_extract(const Opts& o) {
  FluxoniumParams p = load_params(o);
  if (o.input.empty()) throw UsageError("--input is required");
  if (!(o.teff_mk > 0)) throw UsageError("--teff (mK) is required");
  fs::path dir = prepare_out_dir(o.out);

  extraction::CoherenceDataset ds;
  ds.points = io::load_coherence_csv(o.input);
  ds.device_id = fs::path(o.input).stem().string();
  noise::ThermalEnv env{o.teff_mk * 1e-3};
  ds.env = env;

  extraction::ExtractionReport rep = extraction::extract_report(ds, p, env);

  json doc;
  doc["device_id"] = ds.device_id;
  doc["n_points"] = ds.points.size();
  doc["t_eff_mk"] = o.teff_mk;
  doc["tan_delta_c"] = quantity_json(rep.tan_delta_c);
  doc["a_phi_t1_phi0"] = quantity_json(rep.a_phi_t1);
  doc["a_phi_t2_phi0"] = quantity_json(rep.a_phi_t2);
  write_report(dir, "report", doc);

  auto bound_cell = [&](const std::optional<extraction::QuantityExtract>& q,
                        std::size_t i) -> Cell {
    if (!q || i >= q->bounds.size() || !q->bounds[i]) return nullptr;
    return *q->bounds[i];
  };
  std::vector<std::vector<Cell>> rows;
  for (std::size_t i = 0; i < ds.points.size(); ++i)
    rows.push_back({ds.points[i].phi_ext, ds.points[i].f01_ghz,
                    bound_cell(rep.tan_delta_c, i),
                    bound_cell(rep.a_phi_t1, i), bound_cell(rep.a_phi_t2, i)});
  write_table(dir, "bounds",
              {"phi_ext_phi0", "f01_ghz", "tan_delta_c_bound",
               "a_phi_t1_bound_phi0", "a_phi_t2_phi0"},
              rows, o.format);
  return 0;
}

json power_law_json(const material::PowerLawFit& f) {
  return {{"alpha", f.alpha},
          {"alpha_err", f.alpha_err},
          {"prefactor", f.prefactor},
          {"r2", f.r2},
          {"n", f.n}};
}

int run_material(const Opts& o) {
  if (o.input.empty()) throw UsageError("--input is required");
  fs::path dir = prepare_out_dir(o.out);
  auto table = io::load_device_table(o.input);

  std::vector<std::vector<Cell>> rows;
  std::vector<std::string> ids;
  std::vector<std::pair<double, double>> rho_sigma;
  for (const auto& r : table) {
    material::WireSample ws;
    ws.t_m = r.t_nm * 1e-9;
    ws.w_m = r.w_um * 1e-6;
    ws.p_m = r.p_um * 1e-6;
    ws.lambda_m = r.lambda_um * 1e-6;
    double rho =
        material::resistivity_from_kfl(r.kf_per_nm * 1e9, r.l_nm * 1e-9);
    double lk_el = material::lk_from_el(r.e_l_ghz, ws.w_m, ws.p_m);
    double lk_lam = material::lk_from_lambda(*ws.lambda_m, ws.t_m);
    auto spin = material::spin_density(r.a_t2_uphi0 * 1e-6, ws);
    rows.push_back({r.device, rho, r.kf_per_nm * r.l_nm, lk_el, lk_lam,
                    spin.m2_sigma_per_m2});
    ids.push_back(r.device);
    rho_sigma.emplace_back(rho, spin.m2_sigma_per_m2);
  }
  write_table(dir, "derived",
              {"device", "rho_xx_ohm_m", "kf_l", "lk_from_el_h_per_sq",
               "lk_from_lambda_h_per_sq", "m2_sigma_per_m2"},
              rows, o.format);

  json doc;
  doc["per_device"] = power_law_json(material::fit_power_law(rho_sigma));
  doc["per_wafer"] = power_law_json(
      material::fit_power_law(material::wafer_average(ids, rho_sigma)));
  write_report(dir, "power_law", doc);
  return 0;
}

int run_psd(const Opts& o) {
  if (o.params.empty()) throw UsageError("--params is required");
  fs::path dir = prepare_out_dir(o.out);
  json j = io::load_json(o.params);
  const std::string& where = o.params;

  double amp = io::require_number(j, "amp_at_1hz_phi0", where);
  double beta = io::require_number(j, "beta", where);
  double t_s = io::require_number(j, "sampling_interval_s", where);
  double tau0 = io::require_number(j, "tau0_s", where);
  double vis = io::require_number(j, "visibility", where);
  double mean_b = io::require_number(j, "mean_b", where);
  double disp = io::require_number(j, "dispersion_radps_per_phi0", where);
  auto n_samples = std::size_t(io::require_number(j, "n_samples", where));
  auto n_traces = std::size_t(io::require_number(j, "n_traces", where));
  std::size_t n_synth = noisesim::is_pow2(n_samples) ? n_samples : 0;
  if (j.contains("n_synth"))
    n_synth = std::size_t(io::require_number(j, "n_synth", where));
  if (n_synth == 0)
    for (n_synth = 2; n_synth < n_samples; n_synth *= 2) {
    }
  if (n_synth < n_samples)
    throw UsageError(where + ": n_synth must be >= n_samples");
  if (n_traces < 2) throw UsageError(where + ": n_traces must be >= 2");

  noisesim::PsdAccumulator acc;
  std::size_t n_sat = 0;
  for (std::size_t i = 0; i < n_traces; ++i) {
    auto tr = noisesim::synth_powerlaw_noise(amp, beta, t_s, n_synth,
                                             o.seed + 2 * i);
    tr.samples.resize(n_samples);
    auto series = noisesim::simulate_ramsey_series(tr, disp, tau0, vis, mean_b,
                                                   o.seed + 2 * i + 1);
    if (series.saturation_warning) ++n_sat;
    acc.add(noisesim::estimate_psd(series, disp));
  }
  noisesim::PsdEstimate m = acc.mean();

  std::vector<std::vector<Cell>> rows;
  for (std::size_t k = 0; k < m.freq_hz.size(); ++k)
    rows.push_back({m.freq_hz[k], m.s_phi[k], m.stderr_s_phi[k],
                    amp * amp / std::pow(m.freq_hz[k], beta)});
  write_table(dir, "psd",
              {"f_hz", "s_phi_phi0sq_per_hz", "stderr_phi0sq_per_hz",
               "truth_phi0sq_per_hz"},
              rows, o.format);

  json doc;
  doc["s_w"] = m.s_w;
  doc["band_lo_hz"] = m.band_lo_hz;
  doc["band_hi_hz"] = m.band_hi_hz;
  doc["n_traces"] = n_traces;
  doc["n_samples"] = n_samples;
  doc["n_synth"] = n_synth;
  doc["seed"] = o.seed;
  doc["saturation_fraction"] = double(n_sat) / double(n_traces);
  write_report(dir, "psd_meta", doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fluxonium decoherence analysis toolkit"};
  app.require_subcommand(1);
  Opts o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "output directory (default .)");
    sub->add_option("--format", o.format, "table format")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  auto* spectrum = app.add_subcommand("spectrum", "sweep a qubit spectrum");
  spectrum->add_option("--params", o.params, "fluxonium params JSON")
      ->required();
  spectrum->add_option("--basis-size", o.basis_size, "basis override");
  spectrum->add_option("--phi-min", o.phi_min, "grid start (Phi0)");
  spectrum->add_option("--phi-max", o.phi_max, "grid end (Phi0)");
  spectrum->add_option("--phi-points", o.phi_points, "grid size");
  add_common(spectrum);

  auto* fitspec =
      app.add_subcommand("fit-spectrum", "fit circuit energies to f01 data");
  fitspec->add_option("--params", o.params, "initial guess JSON")->required();
  fitspec->add_option("--input", o.input, "transitions CSV")->required();
  fitspec->add_option("--basis-size", o.basis_size, "basis override");
  add_common(fitspec);

  auto* extract = app.add_subcommand(
      "extract", "extract noise-channel amplitudes from coherence data");
  extract->add_option("--params", o.params, "fluxonium params JSON")
      ->required();
  extract->add_option("--input", o.input, "coherence CSV")->required();
  extract->add_option("--teff", o.teff_mk, "effective temperature (mK)")
      ->required();
  extract->add_option("--basis-size", o.basis_size, "basis override");
  add_common(extract);

  auto* mat = app.add_subcommand(
      "material", "derive transport/disorder columns and the power law");
  mat->add_option("--input", o.input, "device-table CSV")->required();
  add_common(mat);

  auto* psd = app.add_subcommand(
      "psd", "synthesize flux noise and estimate its spectrum");
  psd->add_option("--params", o.params, "noise/acquisition params JSON")
      ->required();
  psd->add_option("--seed", o.seed, "ensemble base seed");
  add_common(psd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (spectrum->parsed()) return run_spectrum(o);
    if (fitspec->parsed()) return run_fit_spectrum(o);
    if (extract->parsed()) return run_extract(o);
    if (mat->parsed()) return run_material(o);
    if (psd->parsed()) return run_psd(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return UsageError::exit_code;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ParseError::exit_code;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ConvergenceError::exit_code;
  } catch (const FitError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return FitError::exit_code;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return PreconditionError::exit_code;
  } catch (const RegimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return RegimeError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
