// Data-file surface: CSV writers for wavepackets, coincidence maps and
// heatmaps, JSON serialization of configs and results, and the sectioned
// key = value config-file reader used by the command-line tool.
#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cartsim/experiments.hpp"

namespace cartsim {

// All numeric output goes through this: shortest representation with 17
// significant digits, so reruns are byte-identical and values round-trip.
std::string format_sig17(double x);

// CSV schemas. Every file has one header row; all numbers are format_sig17.
//   wavepacket:   t, re_<c0>, im_<c0>, ..., re_<c3>, im_<c3>   (channel labels)
//   density:      t, n_<c0>, ..., n_<c3>                       (|phi|^2, 1/us)
//   reexcitation: s, P                                          (delay density)
//   coincidence:  t_r, t_b, p, F     (F is nan where masked; axes decimated
//                                     to at most max_per_axis samples when > 0)
//   heatmap:      delta_a_over_kappa, delta_b_over_kappa, fidelity,
//                 efficiency         (nan row for failed cells)
void write_wavepacket_csv(const std::string& path, const Wavepacket& wp);
void write_density_csv(const std::string& path, const EmissionRecord& rec);
void write_reexcitation_csv(const std::string& path, const EmissionRecord& rec);
void write_coincidence_csv(const std::string& path, const CoincidenceMap& map,
                           int max_per_axis = 0);
void write_heatmap_csv(const std::string& path, const HeatmapResult& hm);

// JSON forms (enables nlohmann implicit conversion, json j = value).
void to_json(nlohmann::json& j, const BirefringenceSpec& b);
void to_json(nlohmann::json& j, const DriveConfig& d);
void to_json(nlohmann::json& j, const NodeConfig& c);
void to_json(nlohmann::json& j, const CavityGeometry& g);
void to_json(nlohmann::json& j, const TimeGrid& g);
void to_json(nlohmann::json& j, const WindowedResult& r);
void to_json(nlohmann::json& j, const Preset& p);

// Windowed results as an array of {"T", "efficiency", "fidelity",
// "visibility", "bell_phase"} records; the unbounded-window row carries
// "T": null.
nlohmann::json windowed_results_json(const std::vector<WindowedResult>& results);

void write_json(const std::string& path, const nlohmann::json& j);

// Reads sectioned "key = value" text: '#' or ';' start comments, section
// headers are "[name]", keys before any header land in section "". Values
// keep internal whitespace; keys and section names are taken verbatim.
// Throws std::invalid_argument with a line number on malformed lines or
// duplicate keys.
using ConfigSection = std::map<std::string, std::string>;
std::map<std::string, ConfigSection> read_config_file(const std::string& path);

// One node as read from a config-file section. Accepts the hardware-table
// column names verbatim: l, R_c, F, FSR, lambda (cavity geometry, from which
// kappa is derived unless given), g_1, g_2, kappa, Omega_1, Omega_2,
// Delta_1, Delta_2 (or Delta for both), gamma_ie, gamma_xe, delta,
// delta_units (MHz | kappa), theta, axis (x | y | z | "ax,ay,az").
// Unknown keys are rejected with the key name in the message.
struct NodeSettings {
  NodeConfig node;
  CavityGeometry geometry;
  bool geometry_given = false;
  double quoted_fsr = 0.0;
};

NodeSettings parse_node_section(const ConfigSection& entries,
                                const NodeSettings& base = {});

NodeSettings preset_settings(const Preset& p);

}  // namespace cartsim
