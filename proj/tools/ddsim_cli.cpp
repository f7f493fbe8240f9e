#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ddsim/config.hpp"
#include "ddsim/io.hpp"

namespace fs = std::filesystem;
using namespace ddsim;

namespace {

struct Common {
  std::string config;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool validate_only = false;
};

void add_common(CLI::App* sub, Common& c, bool needs_config = true) {
  if (needs_config) sub->add_option("--config", c.config, "experiment config (JSON)")->required();
  sub->add_option("--out-dir", c.out_dir, "directory for output files")->capture_default_str();
  sub->add_option("--seed", c.seed, "override the master seed");
  sub->add_option("--threads", c.threads, "worker threads (0 = all cores); results do not depend on it");
  sub->add_flag("--validate-only", c.validate_only, "check the config and exit");
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Loads, applies CLI overrides and reports warnings. Returns nullopt after a
// successful --validate-only check.
std::optional<ExperimentConfig> prepare(const Common& c) {
  ExperimentConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  for (const auto& w : config_warnings(cfg)) std::cerr << "warning: " << w << "\n";
  if (c.validate_only) {
    std::cout << "config OK: " << c.config << "\n";
    return std::nullopt;
  }
  return cfg;
}

nlohmann::json config_echo(const ExperimentConfig& cfg) {
  nlohmann::json j = cfg.source;
  j["seed"] = cfg.seed;
  return j;
}

const SequenceConfig& require_sequence(const ExperimentConfig& cfg) {
  if (!cfg.sequence) throw ConfigError("config has no sequence section");
  return *cfg.sequence;
}

std::vector<std::size_t> parse_n_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) throw ConfigError("malformed --n-list '" + text + "': empty entry");
    item = item.substr(b, e - b + 1);
    if (item.find_first_not_of("0123456789") != std::string::npos || item.size() > 18)
      throw ConfigError("malformed --n-list '" + text + "': '" + item + "' is not a non-negative integer");
    out.push_back(std::stoull(item));
  }
  if (out.empty()) throw ConfigError("malformed --n-list '" + text + "': no entries");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i] < out[i - 1]) throw ConfigError("malformed --n-list '" + text + "': must be ascending");
  return out;
}

int cmd_simulate(const Common& c) {
  auto cfg = prepare(c);
  if (!cfg) return 0;
  const auto& seq = require_sequence(*cfg);
  const auto program = seq.program();
  const auto ctx = cfg->context(c.threads);
  const auto result = run_program(program, ctx.ensemble, ctx.noise, ctx.relax, ctx.seed, ctx.options);

  const fs::path dir(c.out_dir);
  io::write_atomic(dir / "trajectory.csv", io::trajectory_csv(result));
  io::write_atomic(dir / "result.json", io::dump(io::simulation_json(result, config_echo(*cfg))));

  std::cout << "members: " << result.members << "\n";
  std::cout << "duration_s: " << fixed(result.duration_s) << "\n";
  for (const auto& a : result.acquisitions) {
    const auto e = transverse_amplitude(a.mean);
    std::cout << "acquire '" << a.label << "' at " << fixed(a.time_s) << " s: echo amplitude " << fixed(e.magnitude)
              << ", phase " << fixed(e.phase_rad) << " rad, mz " << fixed(a.mean.z) << "\n";
  }
  std::cout << "wrote " << (dir / "trajectory.csv").string() << ", " << (dir / "result.json").string() << "\n";
  return 0;
}

int cmd_tomography(const Common& c, const std::string& n_list_text) {
  std::optional<std::vector<std::size_t>> cli_n;
  if (!n_list_text.empty()) cli_n = parse_n_list(n_list_text);
  auto cfg = prepare(c);
  if (!cfg) return 0;
  const auto& seq = require_sequence(*cfg);
  const auto ctx = cfg->context(c.threads);
  const fs::path dir(c.out_dir);
  const auto echo = config_echo(*cfg);

  if (seq.kind != SequenceConfig::Kind::bangbang) {
    if (cli_n || !cfg->n_list.empty()) throw ConfigError("an N list needs the bangbang sequence template");
    const auto r = run_process_tomography(strip_preparation(seq.program()), ctx);
    io::write_atomic(dir / "ptm.json", io::dump(io::ptm_json(r, std::nullopt, echo)));
    io::write_atomic(dir / "ptm.csv", io::ptm_csv(r.ptm));
    std::cout << "process fidelity " << fixed(r.fidelity, 3) << "\n";
    return 0;
  }

  std::vector<std::size_t> n_list = cli_n ? *cli_n : cfg->n_list;
  if (n_list.empty()) n_list = {seq.bangbang.n_cycles};
  const auto rs = tomography_series(seq.bangbang, n_list, ctx, seq.pulses);
  std::cout << "N,fidelity,xx,yy,zz\n";
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const std::string stem = "ptm_N" + std::to_string(n_list[i]);
    io::write_atomic(dir / (stem + ".json"), io::dump(io::ptm_json(rs[i], n_list[i], echo)));
    io::write_atomic(dir / (stem + ".csv"), io::ptm_csv(rs[i].ptm));
    std::cout << n_list[i] << "," << fixed(rs[i].fidelity, 3) << "," << fixed(rs[i].ptm.xx(), 3) << ","
              << fixed(rs[i].ptm.yy(), 3) << "," << fixed(rs[i].ptm.zz(), 3) << "\n";
  }
  io::write_atomic(dir / "fidelity_summary.csv", io::fidelity_summary_csv(n_list, rs));
  return 0;
}

int cmd_sweep(const Common& c) {
  auto cfg = prepare(c);
  if (!cfg) return 0;
  if (!cfg->sweep) throw ConfigError("config has no sweep section");
  SweepConfig sc;
  if (cfg->sequence) {
    if (cfg->sequence->kind != SequenceConfig::Kind::bangbang)
      throw ConfigError("sweep needs the bangbang sequence template (or no sequence section)");
    sc.base = cfg->sequence->bangbang;
    sc.pulses = cfg->sequence->pulses;
  }
  sc.context = cfg->context(c.threads);
  sc.total_time_s = cfg->sweep->total_time_s;
  sc.points_per_curve = cfg->sweep->points_per_curve;
  const auto rows = sweep_t2_vs_tauc(cfg->sweep->tau_c_s, sc);

  const fs::path dir(c.out_dir);
  io::write_atomic(dir / "sweep.csv", io::sweep_csv(rows));
  io::write_atomic(dir / "sweep_curves.csv", io::sweep_curves_csv(rows));
  std::cout << "tau_c_s,t2_s,status\n";
  for (const auto& r : rows)
    std::cout << io::num(r.tau_c_s) << "," << (r.no_decay ? std::string("no decay") : io::num(r.t2_s)) << ","
              << (r.status.empty() ? "ok" : r.status) << "\n";
  return 0;
}

int cmd_critical_point(const Common& c) {
  auto cfg = prepare(c);
  if (!cfg) return 0;
  if (!cfg->spin) throw ConfigError("config has no spin_system section");
  if (!cfg->critical_point) throw ConfigError("config has no critical_point section");
  const auto& cp = *cfg->critical_point;
  CriticalPointOptions opts = cp.options;
  opts.threads = c.threads;
  if (c.seed) opts.seed = *c.seed;
  const auto r = find_critical_point(*cfg->spin, cp.b_init, cp.lower, cp.upper, opts);
  io::write_atomic(fs::path(c.out_dir) / "critical_point.json",
                   io::dump(io::critical_point_json(r, cp.lower, cp.upper, cp.reference_b_cp_g, config_echo(*cfg))));
  std::cout << "b_cp_g: (" << fixed(r.b_cp[0], 3) << ", " << fixed(r.b_cp[1], 3) << ", " << fixed(r.b_cp[2], 3)
            << ")\n";
  std::cout << "frequency_hz: " << fixed(r.frequency_hz, 3) << "\n";
  std::cout << "residual_gradient_hz_per_g: " << io::num(r.residual_gradient_norm) << " (tolerance "
            << io::num(r.tolerance_hz_per_g) << ")\n";
  if (cp.reference_b_cp_g)
    std::cout << "distance_to_reference_g: " << fixed((r.b_cp - *cp.reference_b_cp_g).norm(), 3) << "\n";
  if (!r.converged) {
    std::cerr << "no critical point within tolerance; best point reported\n";
    return 2;
  }
  return 0;
}

int cmd_fit(const Common& c, const std::string& csv, const std::string& model_text) {
  const DecayModel model = parse_model(model_text);
  const auto curve = io::read_decay_csv(csv);
  const auto fit = fit_decay(curve, model);
  io::write_atomic(fs::path(c.out_dir) / "fit.json", io::dump(io::fit_json(fit, csv)));
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "model: " << model_name(fit.model) << "\n";
  for (const auto& p : fit.parameters)
    std::cout << p.name << ": " << io::num(p.value) << " +- " << io::num(p.sigma) << "\n";
  switch (fit.model) {
    case DecayModel::single_exp:
      if (fit.no_decay)
        std::cout << "t2=inf (no decay)\n";
      else
        std::cout << "t2=" << fixed(fit.value("t2_s"), 4) << "\n";
      break;
    case DecayModel::stretched:
      std::cout << "t_m=" << fixed(fit.value("t_m_s"), 4) << " x=" << fixed(fit.value("exponent"), 4) << "\n";
      break;
    case DecayModel::inv_recovery:
      std::cout << "t1=" << fixed(fit.value("t1_s"), 4) << "\n";
      break;
  }
  return 0;
}

int cmd_validate(const Common& c) {
  Common v = c;
  v.validate_only = true;
  prepare(v);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bloch-ensemble simulator for dynamical decoupling of nuclear spin memories"};
  app.require_subcommand(1);

  Common sim, tomo, sweep, cp, fit, val;
  std::string n_list, csv, model = "single_exp";

  auto* s_sim = app.add_subcommand("simulate", "run a pulse program over the ensemble");
  add_common(s_sim, sim);
  auto* s_tomo = app.add_subcommand("tomography", "process tomography, one PTM per cycle count");
  add_common(s_tomo, tomo);
  s_tomo->add_option("--n-list", n_list, "comma-separated cycle counts, e.g. 1,10,100,1000");
  auto* s_sweep = app.add_subcommand("sweep", "Bang-Bang T2 versus cycling time");
  add_common(s_sweep, sweep);
  auto* s_cp = app.add_subcommand("critical-point", "locate a zero first-order Zeeman point");
  add_common(s_cp, cp);
  auto* s_fit = app.add_subcommand("fit", "fit a decay curve from CSV");
  add_common(s_fit, fit, false);
  s_fit->add_option("--csv", csv, "input CSV: time_s,amplitude[,sigma]")->required();
  s_fit->add_option("--model", model, "single_exp | stretched | inv_recovery")->capture_default_str();
  auto* s_val = app.add_subcommand("validate", "check a config and report warnings");
  add_common(s_val, val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*s_sim) return cmd_simulate(sim);
    if (*s_tomo) return cmd_tomography(tomo, n_list);
    if (*s_sweep) return cmd_sweep(sweep);
    if (*s_cp) return cmd_critical_point(cp);
    if (*s_fit) return cmd_fit(fit, csv, model);
    if (*s_val) return cmd_validate(val);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: sequence syntax error at " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
