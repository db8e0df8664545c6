// Command-line front end: emit / interfere / sweep / preset / version.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.
// Data files (CSV, windowed.json) are byte-identical across reruns of the
// same invocation; manifest.json additionally carries wall-clock timings.
#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cartsim/experiments.hpp"
#include "cartsim/io.hpp"

namespace {

using namespace cartsim;
using nlohmann::json;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// Options shared by emit/interfere/sweep. Node parameters arrive through
// three channels, applied in order: preset (or the generic default), config
// file, inline overrides.
struct CommonOptions {
  std::string preset;
  std::string config_file;
  std::string out_dir = ".";
  std::string encoding = "frequency";
  int samples = 0;     // 0: subcommand default
  double t1 = 0.0;     // 0: automatic horizon
  double rel_tol = 0.0;

  // Inline overrides, collected as config keys so they share the config-file
  // semantics (delta_units, geometry-derived kappa, ...).
  ConfigSection override_both, override_a, override_b;
};

void add_common_options(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--preset", opt.preset, "Hardware preset: ca40, ra225 or generic");
  cmd->add_option("--config", opt.config_file,
                  "Config file (key = value; sections [node], [node_a], [node_b])");
  cmd->add_option("-o,--out", opt.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--encoding", opt.encoding, "Photonic qubit encoding")
      ->check(CLI::IsMember({"frequency", "polarization"}))
      ->capture_default_str();
  cmd->add_option("--samples", opt.samples, "Wavepacket grid samples");
  cmd->add_option("--t1", opt.t1, "Grid horizon in us (0: extend until emission completes)");

  auto stash = [](ConfigSection& sec, const char* key) {
    return std::function<void(const std::string&)>(
        [&sec, key](const std::string& val) { sec[key] = val; });
  };
  cmd->add_option_function<std::string>("--g1", stash(opt.override_both, "g_1"),
                                        "Coupling g_1 (2pi MHz)");
  cmd->add_option_function<std::string>("--g2", stash(opt.override_both, "g_2"),
                                        "Coupling g_2 (2pi MHz)");
  cmd->add_option_function<std::string>("--kappa", stash(opt.override_both, "kappa"),
                                        "Cavity decay kappa (2pi MHz)");
  cmd->add_option_function<std::string>("--omega1", stash(opt.override_both, "Omega_1"),
                                        "Drive Omega_1 (2pi MHz)");
  cmd->add_option_function<std::string>("--omega2", stash(opt.override_both, "Omega_2"),
                                        "Drive Omega_2 (2pi MHz)");
  cmd->add_option_function<std::string>("--delta1", stash(opt.override_both, "Delta_1"),
                                        "Drive detuning Delta_1 (2pi MHz)");
  cmd->add_option_function<std::string>("--delta2", stash(opt.override_both, "Delta_2"),
                                        "Drive detuning Delta_2 (2pi MHz)");
  cmd->add_option_function<std::string>("--theta", stash(opt.override_both, "theta"),
                                        "Relative drive phase (rad)");
  cmd->add_option_function<std::string>("--gamma-ie", stash(opt.override_both, "gamma_ie"),
                                        "Decay |e> -> |i> (2pi MHz)");
  cmd->add_option_function<std::string>("--gamma-xe", stash(opt.override_both, "gamma_xe"),
                                        "Decay |e> -> elsewhere (2pi MHz)");
  cmd->add_option_function<std::string>("--axis", stash(opt.override_both, "axis"),
                                        "Birefringence axis: x, y, z or ax,ay,az");
  cmd->add_option_function<std::string>("--delta", stash(opt.override_both, "delta"),
                                        "Birefringence splitting, both nodes");
  cmd->add_option_function<std::string>("--delta-a", stash(opt.override_a, "delta"),
                                        "Birefringence splitting, node A only");
  cmd->add_option_function<std::string>("--delta-b", stash(opt.override_b, "delta"),
                                        "Birefringence splitting, node B only");
  cmd->add_option_function<std::string>("--delta-units", stash(opt.override_both, "delta_units"),
                                        "Units of --delta values: MHz or kappa")
      ->check(CLI::IsMember({"MHz", "kappa"}));
}

Encoding parse_encoding(const std::string& s) {
  return s == "polarization" ? Encoding::polarization : Encoding::frequency;
}

ConfigSection merged(const ConfigSection& lo, const ConfigSection& hi) {
  ConfigSection out = lo;
  for (const auto& [k, v] : hi) out[k] = v;
  return out;
}

// Resolves the two node configurations from preset/config/overrides.
struct ResolvedNodes {
  NodeSettings a, b;
  std::string preset_name;
};

ResolvedNodes resolve_nodes(const CommonOptions& opt) {
  if (!opt.preset.empty() && !opt.config_file.empty())
    throw std::invalid_argument("give either --preset or --config, not both");

  ResolvedNodes r;
  r.preset_name = opt.preset.empty() && opt.config_file.empty() ? "generic" : opt.preset;
  NodeSettings base =
      r.preset_name.empty() ? NodeSettings{} : preset_settings(load_preset(r.preset_name));

  ConfigSection shared, sec_a, sec_b;
  if (!opt.config_file.empty()) {
    const auto sections = read_config_file(opt.config_file);
    for (const auto& [name, sec] : sections) {
      if (name == "" || name == "node") {
        for (const auto& [k, v] : sec)
          if (!shared.emplace(k, v).second)
            throw std::invalid_argument("config key '" + k +
                                        "' given both at top level and in [node]");
      } else if (name == "node_a") {
        sec_a = sec;
      } else if (name == "node_b") {
        sec_b = sec;
      } else {
        throw std::invalid_argument("unknown config section [" + name + "]");
      }
    }
  }

  const NodeSettings common = parse_node_section(shared, base);
  r.a = parse_node_section(merged(opt.override_both, opt.override_a),
                           parse_node_section(sec_a, common));
  r.b = parse_node_section(merged(opt.override_both, opt.override_b),
                           parse_node_section(sec_b, common));
  r.a.node.validate();
  r.b.node.validate();
  return r;
}

IntegratorOptions integrator_options(const CommonOptions& opt) {
  IntegratorOptions io;
  if (opt.rel_tol > 0.0) {
    io.rel_tol = opt.rel_tol;
    io.abs_tol = 1e-3 * opt.rel_tol;
  }
  return io;
}

TimeGrid requested_grid(const CommonOptions& opt, int default_samples) {
  const int n = opt.samples > 0 ? opt.samples : default_samples;
  if (opt.t1 > 0.0) return TimeGrid{0.0, opt.t1, n};
  return TimeGrid{0.0, 0.0, 0};  // automatic
}

std::string out_path(const CommonOptions& opt, const std::string& file) {
  std::filesystem::create_directories(opt.out_dir);
  return (std::filesystem::path(opt.out_dir) / file).string();
}

json node_json(const NodeSettings& s) {
  json j{{"node", s.node}};
  if (s.geometry_given) j["geometry"] = s.geometry;
  if (s.quoted_fsr > 0.0) j["FSR"] = s.quoted_fsr;
  return j;
}

json manifest_skeleton(const std::string& command, const CommonOptions& opt,
                       const ResolvedNodes& nodes) {
  json j;
  j["artifact"] = artifact_name;
  j["version"] = artifact_version;
  j["command"] = command;
  j["config"]["preset"] = nodes.preset_name.empty() ? json(nullptr) : json(nodes.preset_name);
  if (!opt.config_file.empty()) j["config"]["config_file"] = opt.config_file;
  j["config"]["encoding"] = opt.encoding;
  j["config"]["node_a"] = node_json(nodes.a);
  j["config"]["node_b"] = node_json(nodes.b);
  if (opt.rel_tol > 0.0) j["config"]["rel_tol"] = opt.rel_tol;
  return j;
}

json record_summary(const EmissionRecord& rec) {
  json j;
  j["pure_weight"] = rec.pure_weight;
  j["emitted_pure"] = rec.emitted_pure;
  j["emitted_total"] = rec.emitted_total;
  j["xe_loss"] = rec.xe_loss;
  j["unreleased"] = rec.unreleased;
  j["grid"] = rec.wavepacket.grid;
  const auto& labels = channel_labels(rec.wavepacket.encoding);
  for (int c = 0; c < n_channels; ++c)
    j["channel_norms"][labels[c]] = rec.wavepacket.channel_norm(c);
  if (rec.grid_truncated) j["warning"] = rec.warning;
  return j;
}

int cmd_emit(const CommonOptions& opt) {
  const Timer timer;
  const ResolvedNodes nodes = resolve_nodes(opt);
  const Encoding enc = parse_encoding(opt.encoding);
  const int samples = opt.samples > 0 ? opt.samples : 2048;

  const EmissionRecord rec = simulate_emission_extended(
      nodes.a.node, enc, requested_grid(opt, samples), samples, integrator_options(opt));
  if (rec.grid_truncated) std::cerr << "warning: " << rec.warning << "\n";
  const double sim_s = timer.seconds();

  write_wavepacket_csv(out_path(opt, "wavepacket.csv"), rec.wavepacket);
  write_density_csv(out_path(opt, "density.csv"), rec);
  write_reexcitation_csv(out_path(opt, "reexcitation.csv"), rec);

  json manifest = manifest_skeleton("emit", opt, nodes);
  manifest["config"]["samples"] = samples;
  manifest["results"] = record_summary(rec);
  manifest["timings"] = {{"emission_s", sim_s}, {"total_s", timer.seconds()}};
  write_json(out_path(opt, "manifest.json"), manifest);
  return 0;
}

struct InterfereOptions {
  CommonOptions common;
  int scheme = 3;
  bool reexcitation = false;
  bool full_map = false;
  std::vector<double> windows;
};

int cmd_interfere(const InterfereOptions& opt) {
  const Timer timer;
  const ResolvedNodes nodes = resolve_nodes(opt.common);
  const Encoding enc = parse_encoding(opt.common.encoding);
  const int samples = opt.common.samples > 0 ? opt.common.samples : 2048;
  const IntegratorOptions io = integrator_options(opt.common);
  const TimeGrid req = requested_grid(opt.common, samples);

  // Both records must live on one grid: probe each node's natural horizon,
  // then simulate both on the longer one.
  const bool same_node = json(nodes.a.node) == json(nodes.b.node);
  EmissionRecord rec_a = simulate_emission_extended(nodes.a.node, enc, req, samples, io);
  EmissionRecord rec_b_own;
  if (!same_node) {
    rec_b_own = simulate_emission_extended(nodes.b.node, enc, req, samples, io);
    if (!(rec_b_own.wavepacket.grid == rec_a.wavepacket.grid)) {
      TimeGrid common = rec_a.wavepacket.grid;
      common.t1 = std::max(common.t1, rec_b_own.wavepacket.grid.t1);
      rec_a = simulate_emission(nodes.a.node, common, enc, io);
      rec_b_own = simulate_emission(nodes.b.node, common, enc, io);
    }
  }
  const EmissionRecord& rec_b = same_node ? rec_a : rec_b_own;
  if (rec_a.grid_truncated) std::cerr << "warning: " << rec_a.warning << "\n";
  if (!same_node && rec_b.grid_truncated)
    std::cerr << "warning: " << rec_b.warning << "\n";
  const double emission_s = timer.seconds();

  const CoincidenceMap map =
      enc == Encoding::frequency
          ? coincidence_map_frequency(rec_a, rec_b,
                                      static_cast<DetectionScheme>(opt.scheme),
                                      opt.reexcitation)
          : coincidence_map_polarization(rec_a, rec_b, opt.reexcitation);
  const double map_s = timer.seconds() - emission_s;

  std::vector<double> windows = opt.windows;
  if (windows.empty()) {
    const TimeGrid& g = map.grid_r;
    for (int k = 0; k <= 40; ++k) windows.push_back((g.t1 - g.t0) * k / 40.0);
    windows.push_back(std::numeric_limits<double>::infinity());
  }
  const std::vector<WindowedResult> results = window_aggregate(map, windows);
  const WindowedResult unbounded =
      window_aggregate(map, {std::numeric_limits<double>::infinity()}).front();

  write_coincidence_csv(out_path(opt.common, "coincidence.csv"), map,
                        opt.full_map ? 0 : 257);
  write_json(out_path(opt.common, "windowed.json"), windowed_results_json(results));

  json manifest = manifest_skeleton("interfere", opt.common, nodes);
  manifest["config"]["scheme"] = opt.scheme;
  manifest["config"]["reexcitation"] = opt.reexcitation;
  manifest["config"]["samples"] = samples;
  manifest["config"]["windows"] = windowed_results_json(results);
  manifest["results"]["node_a"] = record_summary(rec_a);
  manifest["results"]["node_b"] = record_summary(rec_b);
  manifest["results"]["total_probability"] = map.total_probability();
  manifest["results"]["asymptotic_fidelity"] = unbounded.fidelity;
  manifest["results"]["asymptotic_visibility"] = unbounded.visibility;
  manifest["results"]["bell_phase"] = map.bell_phase;
  manifest["timings"] = {{"emission_s", emission_s},
                         {"map_s", map_s},
                         {"total_s", timer.seconds()}};
  write_json(out_path(opt.common, "manifest.json"), manifest);
  return 0;
}

struct SweepOptions {
  CommonOptions common;
  double delta_min = 0.0;
  double delta_max = 2.0;
  int resolution = 21;
  int scheme = 3;
  bool reexcitation = false;
  int jobs = 1;
  std::vector<double> windows;
};

int cmd_sweep(const SweepOptions& opt) {
  const Timer timer;
  const ResolvedNodes nodes = resolve_nodes(opt.common);

  SweepSpec spec;
  spec.delta_min = opt.delta_min;
  spec.delta_max = opt.delta_max;
  spec.resolution = opt.resolution;
  spec.windows = opt.windows;
  spec.encoding = parse_encoding(opt.common.encoding);
  spec.scheme = static_cast<DetectionScheme>(opt.scheme);
  spec.reexcitation = opt.reexcitation;
  spec.jobs = opt.jobs;
  spec.grid = requested_grid(opt.common, opt.common.samples > 0 ? opt.common.samples : 1024);
  spec.grid_samples = opt.common.samples > 0 ? opt.common.samples : 1024;

  const HeatmapResult hm = run_birefringence_heatmap(nodes.a.node, spec);
  write_heatmap_csv(out_path(opt.common, "heatmap.csv"), hm);

  int failed = 0;
  for (const HeatmapCell& c : hm.cells) failed += c.ok ? 0 : 1;
  if (failed > 0) std::cerr << "warning: " << failed << " heatmap cells failed\n";

  json manifest = manifest_skeleton("sweep", opt.common, nodes);
  manifest["config"]["delta_min"] = spec.delta_min;
  manifest["config"]["delta_max"] = spec.delta_max;
  manifest["config"]["resolution"] = spec.resolution;
  manifest["config"]["scheme"] = opt.scheme;
  manifest["config"]["reexcitation"] = spec.reexcitation;
  manifest["config"]["jobs"] = spec.jobs;
  manifest["config"]["samples"] = spec.grid_samples;
  manifest["config"]["window"] =
      spec.windows.empty() ? 5.0 / nodes.a.node.kappa : spec.windows.front();
  manifest["config"]["grid"] = hm.grid;
  manifest["results"]["cells"] = hm.cells.size();
  manifest["results"]["failed_cells"] = failed;
  manifest["timings"] = {{"total_s", timer.seconds()}};
  write_json(out_path(opt.common, "manifest.json"), manifest);
  return 0;
}

int cmd_preset(const std::string& name) {
  const Preset p = load_preset(name);
  json j = p;
  if (p.geometry.length_mm > 0.0) {
    const GeometryDerived d = derive_geometry(p.geometry);
    j["derived"] = {{"FSR", d.fsr}, {"kappa", d.kappa}, {"waist_um", d.waist_um}};
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cavity-assisted Raman transition (CART) entanglement simulator"};
  app.require_subcommand(1);

  CommonOptions emit_opt;
  CLI::App* emit = app.add_subcommand(
      "emit", "Simulate one node's photon emission and write the wavepacket");
  add_common_options(emit, emit_opt);
  emit->add_option("--rel-tol", emit_opt.rel_tol, "Integrator relative tolerance");

  InterfereOptions intf_opt;
  CLI::App* interfere = app.add_subcommand(
      "interfere", "Interfere two nodes' photons and write coincidence data");
  add_common_options(interfere, intf_opt.common);
  interfere->add_option("--rel-tol", intf_opt.common.rel_tol,
                        "Integrator relative tolerance");
  interfere->add_option("--scheme", intf_opt.scheme,
                        "Detection: 1 plain, 2 polarization-filtered, 3 dichroic")
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  interfere->add_flag("--reexcitation", intf_opt.reexcitation,
                      "Include re-excitation (multi-photon) statistics");
  interfere->add_flag("--full-map", intf_opt.full_map,
                      "Write the full coincidence grid (default: <= 257 samples per axis)");
  interfere->add_option("--window", intf_opt.windows,
                        "Coincidence window T in us (repeatable; default: 41-step ladder plus inf)");

  SweepOptions sweep_opt;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Fidelity/efficiency heatmap over the birefringence plane");
  add_common_options(sweep, sweep_opt.common);
  sweep->add_option("--delta-min", sweep_opt.delta_min, "Axis start, units of kappa")
      ->capture_default_str();
  sweep->add_option("--delta-max", sweep_opt.delta_max, "Axis end, units of kappa")
      ->capture_default_str();
  sweep->add_option("--resolution", sweep_opt.resolution, "Samples per delta axis")
      ->capture_default_str();
  sweep->add_option("--scheme", sweep_opt.scheme,
                    "Detection: 1 plain, 2 polarization-filtered, 3 dichroic")
      ->check(CLI::Range(1, 3))
      ->capture_default_str();
  sweep->add_flag("--reexcitation", sweep_opt.reexcitation,
                  "Include re-excitation (multi-photon) statistics");
  sweep->add_option("--jobs", sweep_opt.jobs, "Worker threads (never changes results)")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
  sweep->add_option("--window", sweep_opt.windows,
                    "Coincidence window T in us (first entry used; default 5/kappa)");

  std::string preset_name;
  CLI::App* preset = app.add_subcommand("preset", "Print a hardware preset");
  preset->add_option("name", preset_name, "ca40, ra225 or generic")->required();

  CLI::App* version = app.add_subcommand("version", "Print the artifact version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (version->parsed()) {
      std::cout << artifact_name << " " << artifact_version << "\n";
      return 0;
    }
    if (preset->parsed()) return cmd_preset(preset_name);
    if (emit->parsed()) return cmd_emit(emit_opt);
    if (interfere->parsed()) return cmd_interfere(intf_opt);
    if (sweep->parsed()) return cmd_sweep(sweep_opt);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const IntegratorFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
