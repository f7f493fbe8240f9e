#pragma once

// Experiment configuration (JSON). Every physical quantity carries its unit
// in the key name. Validation collects all problems before reporting.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ddsim/ensemble.hpp"
#include "ddsim/sequence.hpp"
#include "ddsim/sequence_text.hpp"
#include "ddsim/spin_hamiltonian.hpp"
#include "ddsim/sweep.hpp"
#include "ddsim/tomography.hpp"

namespace ddsim {

inline constexpr int kConfigSchemaVersion = 1;

struct SequenceConfig {
  enum class Kind { text, hahn_echo, inversion_recovery, bangbang };
  Kind kind = Kind::text;
  std::string text;
  double tau_s = 0.0;
  double delay_s = 0.0;
  BangBangParams bangbang;
  PulseSpec pulses;

  PulseProgram program() const {
    switch (kind) {
      case Kind::text: return parse(text);
      case Kind::hahn_echo: return build_hahn_echo(tau_s, pulses);
      case Kind::inversion_recovery: return build_inversion_recovery(delay_s, pulses);
      case Kind::bangbang: return build_bangbang(bangbang, pulses);
    }
    return {};
  }
};

struct SweepSettings {
  std::vector<double> tau_c_s;
  double total_time_s = 10.0;
  std::size_t points_per_curve = 12;
};

struct CriticalPointSettings {
  FieldPoint b_init = FieldPoint::Zero();
  int lower = 0;
  int upper = 1;
  CriticalPointOptions options;
  std::optional<FieldPoint> reference_b_cp_g;
};

struct ExperimentConfig {
  nlohmann::json source;
  std::optional<SequenceConfig> sequence;
  EnsembleSpec ensemble = EnsembleSpec::single();
  NoiseModel noise;
  RelaxationParams relax;
  std::uint64_t seed = 1;
  BlochState initial_state{0.0, 0.0, 1.0};
  std::optional<BathCutoff> bath_cutoff;
  std::vector<std::size_t> n_list;
  std::optional<SweepSettings> sweep;
  std::optional<SpinSystem> spin;
  std::optional<CriticalPointSettings> critical_point;

  SimContext context(unsigned threads) const {
    SimContext ctx;
    ctx.ensemble = ensemble;
    ctx.noise = noise;
    ctx.relax = relax;
    ctx.seed = seed;
    ctx.options.threads = threads;
    ctx.options.initial_state = initial_state;
    return ctx;
  }
};

namespace config_detail {

using nlohmann::json;

class Reader {
 public:
  std::vector<std::string> errors;

  void error(const std::string& path, const std::string& what) { errors.push_back(path + ": " + what); }

  // Reports keys of `obj` outside `allowed`.
  void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
      error(path, "expected an object");
      return;
    }
    std::set<std::string> ok;
    for (const char* k : allowed) ok.insert(k);
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) error(path + "." + it.key(), "unknown key");
  }

  std::optional<double> number(const json& obj, const std::string& path, const char* key, bool required,
                               bool allow_inf = false) {
    if (!obj.contains(key)) {
      if (required) error(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (allow_inf && (v.is_null() || (v.is_string() && v.get<std::string>() == "inf"))) return kInf;
    if (!v.is_number()) {
      error(path + "." + key, allow_inf ? "expected a number, \"inf\" or null" : "expected a number");
      return std::nullopt;
    }
    const double d = v.get<double>();
    if (!std::isfinite(d)) {
      error(path + "." + key, "must be finite");
      return std::nullopt;
    }
    return d;
  }

  std::optional<double> positive(const json& obj, const std::string& path, const char* key, bool required) {
    auto v = number(obj, path, key, required);
    if (v && !(*v > 0.0)) {
      error(path + "." + key, "must be positive");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::uint64_t> count(const json& obj, const std::string& path, const char* key, bool required,
                                     std::uint64_t min = 0) {
    if (!obj.contains(key)) {
      if (required) error(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      error(path + "." + key, "expected a non-negative integer");
      return std::nullopt;
    }
    const auto n = v.get<std::uint64_t>();
    if (n < min) {
      error(path + "." + key, "must be at least " + std::to_string(min));
      return std::nullopt;
    }
    return n;
  }

  std::optional<std::string> string(const json& obj, const std::string& path, const char* key, bool required) {
    if (!obj.contains(key)) {
      if (required) error(path + "." + key, "missing");
      return std::nullopt;
    }
    if (!obj.at(key).is_string()) {
      error(path + "." + key, "expected a string");
      return std::nullopt;
    }
    return obj.at(key).get<std::string>();
  }

  std::optional<bool> boolean(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) return std::nullopt;
    if (!obj.at(key).is_boolean()) {
      error(path + "." + key, "expected true or false");
      return std::nullopt;
    }
    return obj.at(key).get<bool>();
  }

  std::optional<std::vector<double>> numbers(const json& obj, const std::string& path, const char* key, bool required,
                                             std::size_t exact_size = 0) {
    if (!obj.contains(key)) {
      if (required) error(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    if (!v.is_array()) {
      error(path + "." + key, "expected an array of numbers");
      return std::nullopt;
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        error(path + "." + key, "expected an array of finite numbers");
        return std::nullopt;
      }
      out.push_back(e.get<double>());
    }
    if (exact_size && out.size() != exact_size) {
      error(path + "." + key, "expected " + std::to_string(exact_size) + " entries");
      return std::nullopt;
    }
    return out;
  }

  std::optional<Eigen::Matrix3d> matrix3(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) {
      error(path + "." + key, "missing");
      return std::nullopt;
    }
    const json& v = obj.at(key);
    bool ok = v.is_array() && v.size() == 3;
    Eigen::Matrix3d m;
    for (std::size_t i = 0; ok && i < 3; ++i) {
      ok = v[i].is_array() && v[i].size() == 3;
      for (std::size_t j = 0; ok && j < 3; ++j) {
        ok = v[i][j].is_number() && std::isfinite(v[i][j].get<double>());
        if (ok) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j].get<double>();
      }
    }
    if (!ok) {
      error(path + "." + key, "expected a 3x3 array of finite numbers");
      return std::nullopt;
    }
    return m;
  }

  // Runs a validation callback, turning ConfigError into a collected error.
  template <typename Fn>
  void guard(const std::string& path, Fn&& fn) {
    try {
      fn();
    } catch (const ParseError& e) {
      error(path, std::string("sequence syntax error at ") + e.what());
    } catch (const ConfigError& e) {
      error(path, e.what());
    }
  }
};

inline void read_sequence(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "sequence";
  r.check_keys(j, path,
               {"text", "template", "tau_s", "delay_s", "tau1_s", "tau_c_s", "n_cycles", "initial_area_rad",
                "readout", "trailing_wait", "rabi_hz"});
  if (!j.is_object()) return;
  SequenceConfig s;
  if (auto rabi = r.positive(j, path, "rabi_hz", false)) s.pulses.rabi_hz = *rabi;
  const auto text = r.string(j, path, "text", false);
  const auto tmpl = r.string(j, path, "template", false);
  if (text && tmpl) r.error(path, "give either text or template, not both");
  if (!text && !tmpl) r.error(path, "needs text or template");
  if (text) {
    s.kind = SequenceConfig::Kind::text;
    s.text = *text;
    if (s.pulses.rabi_hz) r.error(path + ".rabi_hz", "only applies to templates; write finite pulses in the text");
  } else if (tmpl) {
    if (*tmpl == "hahn_echo") {
      s.kind = SequenceConfig::Kind::hahn_echo;
      if (auto t = r.positive(j, path, "tau_s", true)) s.tau_s = *t;
    } else if (*tmpl == "inversion_recovery") {
      s.kind = SequenceConfig::Kind::inversion_recovery;
      if (auto t = r.positive(j, path, "delay_s", true)) s.delay_s = *t;
    } else if (*tmpl == "bangbang") {
      s.kind = SequenceConfig::Kind::bangbang;
      auto& b = s.bangbang;
      if (auto t = r.positive(j, path, "tau1_s", false)) b.tau1_s = *t;
      if (auto t = r.positive(j, path, "tau_c_s", false)) b.tau_c_s = *t;
      if (auto n = r.count(j, path, "n_cycles", false)) b.n_cycles = *n;
      if (auto a = r.positive(j, path, "initial_area_rad", false)) b.initial_area_rad = *a;
      if (auto w = r.boolean(j, path, "trailing_wait")) b.trailing_wait = *w;
      if (auto ro = r.string(j, path, "readout", false)) {
        if (*ro == "echo")
          b.readout = BangBangReadout::echo;
        else if (*ro == "stroboscopic")
          b.readout = BangBangReadout::stroboscopic;
        else
          r.error(path + ".readout", "expected \"echo\" or \"stroboscopic\"");
      }
    } else {
      r.error(path + ".template", "unknown template '" + *tmpl + "' (hahn_echo, inversion_recovery, bangbang)");
    }
  }
  if (r.errors.empty()) r.guard(path, [&] { validate(s.program()); });
  cfg.sequence = std::move(s);
}

inline void read_ensemble(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "ensemble";
  r.check_keys(j, path, {"size", "line", "fwhm_hz", "detunings_hz", "sampling", "seed", "t2_log_spread"});
  if (!j.is_object()) return;
  EnsembleSpec e;
  e.size = 1;
  const auto line = r.string(j, path, "line", false).value_or("gaussian");
  if (line == "homogeneous") {
    if (auto n = r.count(j, path, "size", true, 1)) e = EnsembleSpec::homogeneous(*n);
    if (j.contains("fwhm_hz") || j.contains("detunings_hz")) r.error(path, "a homogeneous line takes only size");
  } else if (line == "explicit") {
    if (auto d = r.numbers(j, path, "detunings_hz", true)) {
      e.line = ExplicitDetunings{*d};
      e.size = d->size();
    }
    if (j.contains("fwhm_hz")) r.error(path + ".fwhm_hz", "not used by an explicit line");
  } else if (line == "gaussian" || line == "lorentzian") {
    const double fwhm = r.positive(j, path, "fwhm_hz", true).value_or(1.0);
    if (line == "gaussian")
      e.line = GaussianLine{fwhm};
    else
      e.line = LorentzianLine{fwhm};
    if (auto n = r.count(j, path, "size", true, 1)) e.size = *n;
    if (j.contains("detunings_hz")) r.error(path + ".detunings_hz", "only used by an explicit line");
  } else {
    r.error(path + ".line", "expected gaussian, lorentzian, explicit or homogeneous");
  }
  if (auto s = r.string(j, path, "sampling", false)) {
    if (*s == "monte_carlo")
      e.sampling = Sampling::monte_carlo;
    else if (*s == "gauss_quadrature")
      e.sampling = Sampling::gauss_quadrature;
    else
      r.error(path + ".sampling", "expected monte_carlo or gauss_quadrature");
  }
  if (auto s = r.count(j, path, "seed", false)) e.seed = *s;
  if (auto s = r.number(j, path, "t2_log_spread", false)) e.t2_log_spread = *s;
  r.guard(path, [&] { e.validate(); });
  cfg.ensemble = std::move(e);
}

inline void read_noise(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "noise";
  r.check_keys(j, path, {"dt_s", "components"});
  if (!j.is_object()) return;
  NoiseModel n;
  if (auto dt = r.positive(j, path, "dt_s", false)) n.dt_s = *dt;
  if (j.contains("components")) {
    const json& comps = j.at("components");
    if (!comps.is_array()) r.error(path + ".components", "expected an array");
    for (std::size_t i = 0; comps.is_array() && i < comps.size(); ++i) {
      const std::string cp = path + ".components[" + std::to_string(i) + "]";
      const json& c = comps[i];
      const auto kind = c.is_object() ? r.string(c, cp, "kind", true) : std::nullopt;
      if (!c.is_object()) {
        r.error(cp, "expected an object");
      } else if (kind == "ornstein_uhlenbeck") {
        r.check_keys(c, cp, {"kind", "sigma_hz", "tau_b_s"});
        const auto s = r.number(c, cp, "sigma_hz", true);
        const auto t = r.positive(c, cp, "tau_b_s", true);
        if (s && *s < 0.0) r.error(cp + ".sigma_hz", "must be non-negative");
        if (s && t) n.components.emplace_back(OrnsteinUhlenbeck{*s, *t});
      } else if (kind == "telegraph") {
        r.check_keys(c, cp, {"kind", "amplitude_hz", "flip_rate_hz"});
        const auto a = r.number(c, cp, "amplitude_hz", true);
        const auto f = r.positive(c, cp, "flip_rate_hz", true);
        if (a && *a < 0.0) r.error(cp + ".amplitude_hz", "must be non-negative");
        if (a && f) n.components.emplace_back(Telegraph{*a, *f});
      } else if (kind) {
        r.error(cp + ".kind", "expected ornstein_uhlenbeck or telegraph");
      }
    }
  }
  r.guard(path, [&] { n.validate(); });
  cfg.noise = std::move(n);
}

inline void read_relaxation(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "relaxation";
  r.check_keys(j, path, {"t1_s", "t2_s", "z_equilibrium"});
  if (!j.is_object()) return;
  RelaxationParams p;
  if (auto t = r.number(j, path, "t1_s", false, true)) p.t1_s = *t;
  if (auto t = r.number(j, path, "t2_s", false, true)) p.t2_s = *t;
  if (auto z = r.number(j, path, "z_equilibrium", false)) p.z_equilibrium = *z;
  r.guard(path, [&] { p.validate(); });
  cfg.relax = p;
}

inline void read_sweep(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "sweep";
  r.check_keys(j, path, {"tau_c_s", "total_time_s", "points_per_curve"});
  if (!j.is_object()) return;
  SweepSettings s;
  if (auto v = r.numbers(j, path, "tau_c_s", true)) {
    s.tau_c_s = *v;
    if (v->empty()) r.error(path + ".tau_c_s", "must not be empty");
    for (double t : *v)
      if (!(t > 0.0)) r.error(path + ".tau_c_s", "every tau_c must be positive");
  }
  if (auto t = r.positive(j, path, "total_time_s", false)) s.total_time_s = *t;
  if (auto n = r.count(j, path, "points_per_curve", false, 4)) s.points_per_curve = *n;
  cfg.sweep = std::move(s);
}

inline void read_spin(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "spin_system";
  r.check_keys(j, path, {"q_tensor_hz", "m_tensor_hz_per_g"});
  if (!j.is_object()) return;
  SpinSystem s;
  const auto q = r.matrix3(j, path, "q_tensor_hz");
  const auto m = r.matrix3(j, path, "m_tensor_hz_per_g");
  if (q) s.q_tensor_hz = *q;
  if (m) s.m_tensor_hz_per_g = *m;
  if (q && m) r.guard(path, [&] { s.validate(); });
  cfg.spin = s;
}

inline void read_critical_point(Reader& r, const json& j, ExperimentConfig& cfg) {
  const std::string path = "critical_point";
  r.check_keys(j, path,
               {"b_init_g", "levels", "starts", "box_half_width_g", "tolerance_hz_per_g", "initial_step_g",
                "max_iterations", "seed", "degeneracy_threshold_hz", "reference_b_cp_g"});
  if (!j.is_object()) return;
  CriticalPointSettings s;
  if (auto b = r.numbers(j, path, "b_init_g", true, 3)) s.b_init = FieldPoint((*b)[0], (*b)[1], (*b)[2]);
  if (auto b = r.numbers(j, path, "reference_b_cp_g", false, 3)) s.reference_b_cp_g = FieldPoint((*b)[0], (*b)[1], (*b)[2]);
  if (auto lv = r.numbers(j, path, "levels", true, 2)) {
    const double a = (*lv)[0], b = (*lv)[1];
    if (a != std::floor(a) || b != std::floor(b) || a < 0 || b > 5 || a >= b)
      r.error(path + ".levels", "expected two level indices 0 <= i < j <= 5");
    else {
      s.lower = static_cast<int>(a);
      s.upper = static_cast<int>(b);
    }
  }
  auto& o = s.options;
  if (auto n = r.count(j, path, "starts", false, 1)) o.starts = *n;
  if (auto v = r.positive(j, path, "box_half_width_g", false)) o.box_half_width_g = *v;
  if (auto v = r.positive(j, path, "tolerance_hz_per_g", false)) o.tolerance_hz_per_g = *v;
  if (auto v = r.positive(j, path, "initial_step_g", false)) o.initial_step_g = *v;
  if (auto n = r.count(j, path, "max_iterations", false, 1)) o.max_iterations = *n;
  if (auto n = r.count(j, path, "seed", false)) o.seed = *n;
  if (auto v = r.positive(j, path, "degeneracy_threshold_hz", false)) o.degeneracy_threshold_hz = *v;
  cfg.critical_point = std::move(s);
}

}  // namespace config_detail

/// Parses and validates a configuration document; throws ConfigError listing
/// every problem found.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  config_detail::Reader r;
  ExperimentConfig cfg;
  cfg.source = j;
  r.check_keys(j, "config",
               {"schema_version", "description", "sequence", "ensemble", "noise", "relaxation", "seed",
                "initial_state", "bath_cutoff_rad_per_s", "tomography", "sweep", "spin_system", "critical_point"});
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  if (auto v = r.count(j, "config", "schema_version", false))
    if (*v != kConfigSchemaVersion) r.error("config.schema_version", "unsupported version " + std::to_string(*v));
  if (j.contains("description") && !j.at("description").is_string())
    r.error("config.description", "expected a string");
  if (j.contains("sequence")) config_detail::read_sequence(r, j.at("sequence"), cfg);
  if (j.contains("ensemble")) config_detail::read_ensemble(r, j.at("ensemble"), cfg);
  if (j.contains("noise")) config_detail::read_noise(r, j.at("noise"), cfg);
  if (j.contains("relaxation")) config_detail::read_relaxation(r, j.at("relaxation"), cfg);
  if (auto s = r.count(j, "config", "seed", false)) cfg.seed = *s;
  if (auto v = r.numbers(j, "config", "initial_state", false, 3)) {
    cfg.initial_state = {(*v)[0], (*v)[1], (*v)[2]};
    if (cfg.initial_state.norm() > 1.0 + 1e-9) r.error("config.initial_state", "Bloch vector norm exceeds 1");
  }
  if (auto w = r.positive(j, "config", "bath_cutoff_rad_per_s", false)) cfg.bath_cutoff = BathCutoff{*w};
  if (j.contains("tomography")) {
    const auto& t = j.at("tomography");
    r.check_keys(t, "tomography", {"n_list"});
    if (t.is_object() && t.contains("n_list")) {
      const auto& l = t.at("n_list");
      bool ok = l.is_array() && !l.empty();
      for (std::size_t i = 0; ok && i < l.size(); ++i) {
        ok = l[i].is_number_unsigned();
        if (ok) cfg.n_list.push_back(l[i].get<std::size_t>());
      }
      if (!ok) r.error("tomography.n_list", "expected a non-empty array of non-negative integers");
      for (std::size_t i = 1; ok && i < cfg.n_list.size(); ++i)
        if (cfg.n_list[i] < cfg.n_list[i - 1]) {
          r.error("tomography.n_list", "must be sorted ascending");
          break;
        }
    }
  }
  if (j.contains("sweep")) config_detail::read_sweep(r, j.at("sweep"), cfg);
  if (j.contains("spin_system")) config_detail::read_spin(r, j.at("spin_system"), cfg);
  if (j.contains("critical_point")) config_detail::read_critical_point(r, j.at("critical_point"), cfg);

  if (!r.errors.empty()) {
    std::string msg = "invalid configuration (" + std::to_string(r.errors.size()) + " problem" +
                      (r.errors.size() == 1 ? "" : "s") + "):";
    for (const auto& e : r.errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Non-fatal findings: decoupling criterion and readout notes.
inline std::vector<std::string> config_warnings(const ExperimentConfig& cfg) {
  std::vector<std::string> out;
  std::vector<double> taus;
  if (cfg.sequence && cfg.sequence->kind == SequenceConfig::Kind::bangbang) taus.push_back(cfg.sequence->bangbang.tau_c_s);
  if (cfg.sweep) taus.insert(taus.end(), cfg.sweep->tau_c_s.begin(), cfg.sweep->tau_c_s.end());
  // piecewise-constant noise cancels against the toggling frame when dt ~ tau_c
  if (cfg.noise.active())
    for (double t : taus)
      if (cfg.noise.resolved_dt() > t / 10.0 * (1.0 + 1e-12)) {
        std::ostringstream s;
        s << "noise step dt = " << cfg.noise.resolved_dt() << " s is coarser than tau_c / 10 at tau_c = " << t
          << " s; decoupling will be overestimated";
        out.push_back(s.str());
      }
  if (cfg.bath_cutoff) {
    for (double t : taus) {
      const auto check = validate_bangbang(*cfg.bath_cutoff, t);
      if (!check.pass) {
        std::ostringstream s;
        s << "decoupling criterion violated: omega_c * tau_c = " << check.product << " > 1 at tau_c = " << t << " s";
        out.push_back(s.str());
      }
    }
  }
  return out;
}

}  // namespace ddsim
