// CSV/JSON writers and the config-file reader.
#include "cartsim/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cartsim {

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_number(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty())
    throw std::invalid_argument("config key '" + key + "': not a number: '" + value + "'");
  return v;
}

// Indices 0, ..., n-1 thinned to at most m entries, endpoints kept.
std::vector<int> decimate(int n, int m) {
  std::vector<int> idx;
  if (m <= 0 || m >= n) {
    idx.resize(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    return idx;
  }
  idx.reserve(m);
  for (int i = 0; i < m; ++i)
    idx.push_back(static_cast<int>(std::lround(double(i) * (n - 1) / (m - 1))));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace

std::string format_sig17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_wavepacket_csv(const std::string& path, const Wavepacket& wp) {
  std::ofstream out = open_output(path);
  const auto& labels = channel_labels(wp.encoding);
  out << "t";
  for (int c = 0; c < n_channels; ++c)
    out << ",re_" << labels[c] << ",im_" << labels[c];
  out << "\n";
  for (int k = 0; k < wp.grid.n; ++k) {
    out << format_sig17(wp.grid.time(k));
    for (int c = 0; c < n_channels; ++c)
      out << "," << format_sig17(wp.channels[c][k].real()) << ","
          << format_sig17(wp.channels[c][k].imag());
    out << "\n";
  }
}

void write_density_csv(const std::string& path, const EmissionRecord& rec) {
  std::ofstream out = open_output(path);
  const Wavepacket& wp = rec.wavepacket;
  const auto& labels = channel_labels(wp.encoding);
  out << "t";
  for (int c = 0; c < n_channels; ++c) out << ",n_" << labels[c];
  out << "\n";
  for (int k = 0; k < wp.grid.n; ++k) {
    out << format_sig17(wp.grid.time(k));
    for (int c = 0; c < n_channels; ++c)
      out << "," << format_sig17(std::norm(wp.channels[c][k]));
    out << "\n";
  }
}

void write_reexcitation_csv(const std::string& path, const EmissionRecord& rec) {
  std::ofstream out = open_output(path);
  out << "s,P\n";
  const int n = static_cast<int>(rec.reexcitation_density.size());
  for (int k = 0; k < n; ++k)
    out << format_sig17(rec.delay_grid.time(k)) << ","
        << format_sig17(rec.reexcitation_density[k]) << "\n";
}

void write_coincidence_csv(const std::string& path, const CoincidenceMap& map,
                           int max_per_axis) {
  std::ofstream out = open_output(path);
  out << "t_r,t_b,p,F\n";
  const std::vector<int> ri = decimate(map.grid_r.n, max_per_axis);
  const std::vector<int> bi = decimate(map.grid_b.n, max_per_axis);
  for (int i : ri) {
    const size_t row = static_cast<size_t>(i) * map.grid_b.n;
    for (int j : bi)
      out << format_sig17(map.grid_r.time(i)) << ","
          << format_sig17(map.grid_b.time(j)) << ","
          << format_sig17(map.p[row + j]) << "," << format_sig17(map.f[row + j])
          << "\n";
  }
}

void write_heatmap_csv(const std::string& path, const HeatmapResult& hm) {
  std::ofstream out = open_output(path);
  out << "delta_a_over_kappa,delta_b_over_kappa,fidelity,efficiency\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const HeatmapCell& cell : hm.cells)
    out << format_sig17(cell.delta_a) << "," << format_sig17(cell.delta_b) << ","
        << format_sig17(cell.ok ? cell.result.fidelity : nan) << ","
        << format_sig17(cell.ok ? cell.result.efficiency : nan) << "\n";
}

void to_json(nlohmann::json& j, const BirefringenceSpec& b) {
  j = nlohmann::json{{"delta", b.delta}, {"axis", {b.axis[0], b.axis[1], b.axis[2]}}};
}

void to_json(nlohmann::json& j, const DriveConfig& d) {
  j = nlohmann::json{{"Omega_1", d.omega1},
                     {"Omega_2", d.omega2},
                     {"Delta_1", d.delta1},
                     {"Delta_2", d.delta2},
                     {"theta", d.theta}};
}

void to_json(nlohmann::json& j, const NodeConfig& c) {
  j = nlohmann::json{{"g_1", c.g1},
                     {"g_2", c.g2},
                     {"kappa", c.kappa},
                     {"gamma_ie", c.gamma_ie},
                     {"gamma_xe", c.gamma_xe},
                     {"drive", c.drive},
                     {"birefringence", c.birefringence}};
}

void to_json(nlohmann::json& j, const CavityGeometry& g) {
  j = nlohmann::json{{"l", g.length_mm},
                     {"R_c", g.curvature_mm},
                     {"F", g.finesse},
                     {"lambda", g.wavelength_nm}};
}

void to_json(nlohmann::json& j, const TimeGrid& g) {
  j = nlohmann::json{{"t0", g.t0}, {"t1", g.t1}, {"n", g.n}};
}

void to_json(nlohmann::json& j, const WindowedResult& r) {
  j = nlohmann::json{{"T", nullptr},
                     {"efficiency", r.efficiency},
                     {"fidelity", r.fidelity},
                     {"visibility", r.visibility},
                     {"bell_phase", r.bell_phase}};
  if (std::isfinite(r.window)) j["T"] = r.window;
}

void to_json(nlohmann::json& j, const Preset& p) {
  j = nlohmann::json{{"name", p.name}, {"node", p.node}};
  if (p.geometry.length_mm > 0.0) j["geometry"] = p.geometry;
  if (p.fsr > 0.0) j["FSR"] = p.fsr;
  if (!p.notes.empty()) j["notes"] = p.notes;
}

nlohmann::json windowed_results_json(const std::vector<WindowedResult>& results) {
  nlohmann::json arr = nlohmann::json::array();
  for (const WindowedResult& r : results) arr.push_back(r);
  return arr;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out = open_output(path);
  out << j.dump(2) << "\n";
}

std::map<std::string, ConfigSection> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  std::map<std::string, ConfigSection> out;
  std::string section;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& what) {
    throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      out[section];
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (!out[section].emplace(key, value).second)
      fail("duplicate key '" + key + "'");
  }
  return out;
}

NodeSettings parse_node_section(const ConfigSection& entries, const NodeSettings& base) {
  NodeSettings s = base;
  bool kappa_given = false;
  bool geometry_in_section = false;
  bool delta_given = false;
  double delta_value = 0.0;
  std::string delta_units = "MHz";

  for (const auto& [key, value] : entries) {
    if (key == "l") {
      s.geometry.length_mm = parse_number(key, value);
      geometry_in_section = true;
    } else if (key == "R_c") {
      s.geometry.curvature_mm = parse_number(key, value);
      geometry_in_section = true;
    } else if (key == "F") {
      s.geometry.finesse = parse_number(key, value);
      geometry_in_section = true;
    } else if (key == "lambda") {
      s.geometry.wavelength_nm = parse_number(key, value);
      geometry_in_section = true;
    } else if (key == "FSR") {
      s.quoted_fsr = parse_number(key, value);
    } else if (key == "g_1") {
      s.node.g1 = parse_number(key, value);
    } else if (key == "g_2") {
      s.node.g2 = parse_number(key, value);
    } else if (key == "kappa") {
      s.node.kappa = parse_number(key, value);
      kappa_given = true;
    } else if (key == "Omega_1") {
      s.node.drive.omega1 = parse_number(key, value);
    } else if (key == "Omega_2") {
      s.node.drive.omega2 = parse_number(key, value);
    } else if (key == "Delta_1") {
      s.node.drive.delta1 = parse_number(key, value);
    } else if (key == "Delta_2") {
      s.node.drive.delta2 = parse_number(key, value);
    } else if (key == "Delta") {
      s.node.drive.delta1 = s.node.drive.delta2 = parse_number(key, value);
    } else if (key == "theta") {
      s.node.drive.theta = parse_number(key, value);
    } else if (key == "gamma_ie") {
      s.node.gamma_ie = parse_number(key, value);
    } else if (key == "gamma_xe") {
      s.node.gamma_xe = parse_number(key, value);
    } else if (key == "delta") {
      delta_value = parse_number(key, value);
      delta_given = true;
    } else if (key == "delta_units") {
      if (value != "MHz" && value != "kappa")
        throw std::invalid_argument("config key 'delta_units': expected MHz or kappa, got '" +
                                    value + "'");
      delta_units = value;
    } else if (key == "axis") {
      if (value == "x") {
        s.node.birefringence.axis = {1.0, 0.0, 0.0};
      } else if (value == "y") {
        s.node.birefringence.axis = {0.0, 1.0, 0.0};
      } else if (value == "z") {
        s.node.birefringence.axis = {0.0, 0.0, 1.0};
      } else {
        std::array<double, 3> a{};
        size_t begin = 0;
        for (int i = 0; i < 3; ++i) {
          const size_t end = i < 2 ? value.find(',', begin) : std::string::npos;
          if (i < 2 && end == std::string::npos)
            throw std::invalid_argument("config key 'axis': expected x, y, z or ax,ay,az");
          a[i] = parse_number(key, trim(value.substr(begin, end - begin)));
          begin = end + 1;
        }
        s.node.birefringence.axis = a;
      }
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }

  if (geometry_in_section) s.geometry_given = true;
  // kappa comes out of the mirror parameters unless quoted directly.
  if (geometry_in_section && !kappa_given)
    s.node.kappa = derive_geometry(s.geometry).kappa;
  if (delta_given)
    s.node.birefringence.delta =
        delta_units == "kappa" ? delta_value * s.node.kappa : delta_value;
  return s;
}

NodeSettings preset_settings(const Preset& p) {
  NodeSettings s;
  s.node = p.node;
  s.geometry = p.geometry;
  s.geometry_given = p.geometry.length_mm > 0.0;
  s.quoted_fsr = p.fsr;
  return s;
}

}  // namespace cartsim
