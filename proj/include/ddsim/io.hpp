#pragma once

// File outputs. Every file is written to a temporary sibling and renamed into
// place, so a crash never leaves a half-written result behind.

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <json.hpp>

#include "ddsim/analysis.hpp"
#include "ddsim/ensemble.hpp"
#include "ddsim/sequence_text.hpp"
#include "ddsim/spin_hamiltonian.hpp"
#include "ddsim/sweep.hpp"
#include "ddsim/tomography.hpp"

namespace ddsim::io {

using nlohmann::json;

inline constexpr int kOutputSchemaVersion = 1;

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot move result into '" + path.string() + "': " + ec.message());
  }
}

/// Shortest round-trip text for a double; non-finite values become "inf"/"nan".
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// JSON number, with non-finite values as null.
inline json jnum(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json vec3(double x, double y, double z) { return json::array({jnum(x), jnum(y), jnum(z)}); }
inline json vec3(const Eigen::Vector3d& v) { return vec3(v[0], v[1], v[2]); }

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- simulate ----

inline std::string trajectory_csv(const SimulationResult& r) {
  std::string out = "time_s,mx,my,mz\n";
  for (std::size_t i = 0; i < r.sample_times.size(); ++i) {
    const auto& v = r.mean_bloch[i];
    out += num(r.sample_times[i]) + "," + num(v.x) + "," + num(v.y) + "," + num(v.z) + "\n";
  }
  return out;
}

inline json acquisitions_json(const SimulationResult& r) {
  json arr = json::array();
  for (const auto& a : r.acquisitions) {
    const auto e = transverse_amplitude(a.mean);
    arr.push_back({{"label", a.label},
                   {"time_s", jnum(a.time_s)},
                   {"bloch", vec3(a.mean.x, a.mean.y, a.mean.z)},
                   {"transverse_magnitude", jnum(e.magnitude)},
                   {"phase_rad", jnum(e.phase_rad)}});
  }
  return arr;
}

inline json simulation_json(const SimulationResult& r, const json& config_echo) {
  return {{"schema_version", kOutputSchemaVersion},
          {"command", "simulate"},
          {"config", config_echo},
          {"duration_s", jnum(r.duration_s)},
          {"members", r.members},
          {"final_bloch", vec3(r.final_mean.x, r.final_mean.y, r.final_mean.z)},
          {"acquisitions", acquisitions_json(r)}};
}

// ---- tomography ----

inline json ptm_rows(const PauliTransferMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < 4; ++i) {
    json row = json::array();
    for (int j = 0; j < 4; ++j) row.push_back(jnum(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

inline json ptm_json(const ProcessResult& r, std::optional<std::size_t> n_cycles, const json& config_echo) {
  json j = {{"schema_version", kOutputSchemaVersion},
            {"command", "tomography"},
            {"config", config_echo},
            {"basis", json::array({"I", "X", "Y", "Z"})},
            {"ptm", ptm_rows(r.ptm)},
            {"ideal", ptm_rows(r.ideal)},
            {"process_fidelity", jnum(r.fidelity)},
            {"average_gate_fidelity", jnum(average_gate_fidelity(r.fidelity))}};
  if (n_cycles) j["n_cycles"] = *n_cycles;
  json outs = json::array();
  for (std::size_t i = 0; i < r.outputs.size(); ++i)
    outs.push_back({{"input", vec3(r.inputs[i].x, r.inputs[i].y, r.inputs[i].z)},
                    {"output", vec3(r.outputs[i].x, r.outputs[i].y, r.outputs[i].z)}});
  j["preparations"] = outs;
  return j;
}

inline std::string ptm_csv(const PauliTransferMatrix& m) {
  static const char* names[4] = {"I", "X", "Y", "Z"};
  std::string out = "row,I,X,Y,Z\n";
  for (int i = 0; i < 4; ++i) {
    out += names[i];
    for (int j = 0; j < 4; ++j) out += "," + num(m(i, j));
    out += "\n";
  }
  return out;
}

inline std::string fidelity_summary_csv(const std::vector<std::size_t>& n_list, const std::vector<ProcessResult>& rs) {
  std::string out = "n_cycles,process_fidelity,average_gate_fidelity,xx,yy,zz\n";
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const auto& r = rs[i];
    out += std::to_string(n_list[i]) + "," + num(r.fidelity) + "," + num(average_gate_fidelity(r.fidelity)) + "," +
           num(r.ptm.xx()) + "," + num(r.ptm.yy()) + "," + num(r.ptm.zz()) + "\n";
  }
  return out;
}

// ---- sweep ----

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "tau_c_s,tau1_s,t2_s,t2_sigma_s,one_over_e_s,no_decay,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    for (char& c : status)
      if (c == ',' || c == '\n') c = ';';
    out += num(r.tau_c_s) + "," + num(r.tau1_s) + "," + num(r.t2_s) + "," + num(r.t2_sigma_s) + "," +
           num(r.one_over_e_s) + "," + (r.no_decay ? "true" : "false") + "," + status + "\n";
  }
  return out;
}

inline std::string sweep_curves_csv(const std::vector<SweepRow>& rows) {
  std::string out = "tau_c_s,time_s,amplitude\n";
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.curve.times_s.size(); ++i)
      out += num(r.tau_c_s) + "," + num(r.curve.times_s[i]) + "," + num(r.curve.amplitudes[i]) + "\n";
  return out;
}

// ---- critical point ----

inline json critical_point_json(const CriticalPointResult& r, int lower, int upper,
                                const std::optional<FieldPoint>& reference, const json& config_echo) {
  json curv = json::array();
  for (int i = 0; i < 3; ++i) curv.push_back(vec3(r.curvature(i, 0), r.curvature(i, 1), r.curvature(i, 2)));
  json j = {{"schema_version", kOutputSchemaVersion},
            {"command", "critical-point"},
            {"config", config_echo},
            {"levels", json::array({lower, upper})},
            {"b_cp_g", vec3(r.b_cp)},
            {"frequency_hz", jnum(r.frequency_hz)},
            {"gradient_hz_per_g", vec3(r.gradient)},
            {"residual_gradient_norm_hz_per_g", jnum(r.residual_gradient_norm)},
            {"tolerance_hz_per_g", jnum(r.tolerance_hz_per_g)},
            {"curvature_hz_per_g2", curv},
            {"converged", r.converged},
            {"best_start", r.best_start},
            {"iterations", r.iterations}};
  if (reference) {
    j["reference_b_cp_g"] = vec3(*reference);
    j["distance_to_reference_g"] = jnum((r.b_cp - *reference).norm());
  }
  return j;
}

// ---- fit ----

inline json fit_json(const DecayFit& f, const std::string& source) {
  json params = json::object();
  for (const auto& p : f.parameters) params[p.name] = {{"value", jnum(p.value)}, {"sigma", jnum(p.sigma)}};
  return {{"schema_version", kOutputSchemaVersion},
          {"command", "fit"},
          {"input", source},
          {"model", model_name(f.model)},
          {"parameters", params},
          {"residual_norm", jnum(f.residual_norm)},
          {"iterations", f.iterations},
          {"no_decay", f.no_decay},
          {"one_over_e_time_s", jnum(f.one_over_e_time_s)},
          {"warnings", f.warnings}};
}

inline std::string decay_csv(const DecayCurve& c) {
  const bool with_sigma = !c.sigmas.empty();
  std::string out = with_sigma ? "time_s,amplitude,sigma\n" : "time_s,amplitude\n";
  for (std::size_t i = 0; i < c.times_s.size(); ++i) {
    out += num(c.times_s[i]) + "," + num(c.amplitudes[i]);
    if (with_sigma) out += "," + num(c.sigmas[i]);
    out += "\n";
  }
  return out;
}

/// Reads `time_s,amplitude[,sigma]` rows. A non-numeric first line is taken
/// as a header; blank lines and lines starting with '#' are skipped.
inline DecayCurve read_decay_csv(std::istream& in, const std::string& name = "input") {
  DecayCurve c;
  std::string line;
  std::size_t lineno = 0, columns = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    std::vector<double> values;
    bool numeric = true;
    for (auto& s : fields) {
      try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
        if (used != s.size()) numeric = false;
        values.push_back(v);
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError(name + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    first = false;
    if (values.size() < 2 || values.size() > 3)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected 2 or 3 columns");
    if (columns == 0) columns = values.size();
    if (values.size() != columns) throw ConfigError(name + ":" + std::to_string(lineno) + ": inconsistent column count");
    c.times_s.push_back(values[0]);
    c.amplitudes.push_back(values[1]);
    if (columns == 3) c.sigmas.push_back(values[2]);
  }
  return c;
}

inline DecayCurve read_decay_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_decay_csv(in, path);
}

}  // namespace ddsim::io
