#pragma once

#include <cctype>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxkit/errors.hpp"
#include "fluxkit/extraction.hpp"

// CSV plumbing shared by the CLI and the fixture-driven tests. Formats are
// deliberately dumb: comma separator, '.' decimal, mandatory header row, no
// quoting.

namespace fluxkit::io {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw ParseError(where + ": not a number: '" + s + "'");
  }
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
    ++pos;
  if (pos != s.size())
    throw ParseError(where + ": not a number: '" + s + "'");
  return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// One row of the shipped device table; column order mirrors the fixture
// header exactly.
struct DeviceRow {
  std::string device, ti_al, anneal;
  double t_nm = 0, kf_per_nm = 0, l_nm = 0, lambda_um = 0;
  double w_um = 0, p_um = 0;
  double tan_delta_e6 = 0, a_t2_uphi0 = 0, f01_mhz = 0;
  double e_c_ghz = 0, e_j_ghz = 0, e_l_ghz = 0, teff_mk = 0;
};

inline const char* kDeviceTableHeader =
    "Device,Ti:Al,anneal,t_nm,kF_per_nm,l_nm,lambda_um,w_um,p_um,"
    "tan_delta_e6,A_T2_uPhi0,f01_MHz,EC_GHz,EJ_GHz,EL_GHz,Teff_mK";

inline std::vector<DeviceRow> load_device_table(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file");
  if (lines[0] != kDeviceTableHeader)
    throw ParseError(path + ":1: unexpected device-table header");
  std::vector<DeviceRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::string where = path + ":" + std::to_string(li + 1);
    std::vector<std::string> f = split_csv_line(lines[li]);
    if (f.size() != 16)
      throw ParseError(where + ": expected 16 columns, got " +
                       std::to_string(f.size()));
    DeviceRow r;
    r.device = f[0];
    r.ti_al = f[1];
    r.anneal = f[2];
    double* num[] = {&r.t_nm,         &r.kf_per_nm,  &r.l_nm,
                     &r.lambda_um,    &r.w_um,       &r.p_um,
                     &r.tan_delta_e6, &r.a_t2_uphi0, &r.f01_mhz,
                     &r.e_c_ghz,      &r.e_j_ghz,    &r.e_l_ghz,
                     &r.teff_mk};
    for (std::size_t j = 0; j < 13; ++j) *num[j] = parse_double(f[j + 3], where);
    rows.push_back(r);
  }
  if (rows.empty()) throw PreconditionError(path + ": no data rows");
  return rows;
}

// ---------------------------------------------------------------------------
// JSON parameter files

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline double require_number(const nlohmann::json& j, const std::string& key,
                             const std::string& where) {
  if (!j.contains(key))
    throw UsageError(where + ": missing required parameter '" + key + "'");
  if (!j.at(key).is_number())
    throw ParseError(where + ": parameter '" + key + "' must be a number");
  return j.at(key).get<double>();
}

inline FluxoniumParams load_fluxonium_params(const std::string& path) {
  nlohmann::json j = load_json(path);
  FluxoniumParams p;
  p.e_c = require_number(j, "e_c_ghz", path);
  p.e_j = require_number(j, "e_j_ghz", path);
  p.e_l = require_number(j, "e_l_ghz", path);
  if (j.contains("basis_size"))
    p.basis_size = int(require_number(j, "basis_size", path));
  return p;
}

// ---------------------------------------------------------------------------
// Measurement CSVs

inline const char* kTransitionsHeader = "phi_ext_phi0,f01_ghz,f01_err_ghz";

inline std::vector<extraction::TransitionPoint> load_transitions_csv(
    const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file");
  if (lines[0] != kTransitionsHeader)
    throw ParseError(path + ":1: unexpected transitions header");
  std::vector<extraction::TransitionPoint> pts;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::string where = path + ":" + std::to_string(li + 1);
    std::vector<std::string> f = split_csv_line(lines[li]);
    if (f.size() != 3)
      throw ParseError(where + ": expected 3 columns, got " +
                       std::to_string(f.size()));
    pts.push_back({parse_double(f[0], where), parse_double(f[1], where),
                   parse_double(f[2], where)});
  }
  if (pts.empty()) throw PreconditionError(path + ": no data rows");
  return pts;
}

inline const char* kCoherenceHeader =
    "phi_ext_phi0,f01_ghz,t1_s,t1_err_s,t2_echo_s,t2_echo_err_s";

// Blank cells mark quantities that were not measured at that bias point.
inline std::vector<extraction::CoherencePoint> load_coherence_csv(
    const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) throw ParseError(path + ": empty file");
  if (lines[0] != kCoherenceHeader)
    throw ParseError(path + ":1: unexpected coherence header");
  std::vector<extraction::CoherencePoint> pts;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::string where = path + ":" + std::to_string(li + 1);
    std::vector<std::string> f = split_csv_line(lines[li]);
    if (f.size() != 6)
      throw ParseError(where + ": expected 6 columns, got " +
                       std::to_string(f.size()));
    auto opt = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return parse_double(s, where);
    };
    extraction::CoherencePoint pt;
    pt.phi_ext = parse_double(f[0], where);
    pt.f01_ghz = parse_double(f[1], where);
    pt.t1_s = opt(f[2]);
    pt.t1_err_s = opt(f[3]);
    pt.t2_echo_s = opt(f[4]);
    pt.t2_echo_err_s = opt(f[5]);
    pts.push_back(pt);
  }
  if (pts.empty()) throw PreconditionError(path + ": no data rows");
  return pts;
}

}  // namespace fluxkit::io
