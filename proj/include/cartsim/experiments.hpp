// Experiment drivers: hardware parameter presets, drive balancing, and the
// sweep routines that regenerate the reference data sets (birefringence
// heatmaps, coincidence-window curves).
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cartsim/emission.hpp"
#include "cartsim/interference.hpp"
#include "cartsim/node.hpp"
#include "cartsim/types.hpp"

namespace cartsim {

// A named hardware configuration. ca40 and ra225 carry the published
// ion-cavity numbers verbatim (all rates in 2*pi*MHz) plus the cavity
// geometry; "generic" is the idealized lossless configuration used for the
// birefringence studies. notes documents where each field's number comes
// from. fsr is the quoted free spectral range (0 when not applicable);
// derive_geometry(geometry) reproduces it from the length to within a few
// permille.
struct Preset {
  std::string name;
  NodeConfig node;
  CavityGeometry geometry;
  double fsr = 0.0;
  std::map<std::string, std::string> notes;
};

// Throws std::invalid_argument for unknown names. Known names: "ca40",
// "ra225", "generic".
Preset load_preset(const std::string& name);
std::vector<std::string> preset_names();

// Axes and options of a sweep. Birefringence values are in units of the
// node's kappa; windows are in us (empty list = default 5/kappa plus
// infinity). resolution is the sample count per delta axis.
struct SweepSpec {
  double delta_min = 0.0;
  double delta_max = 2.0;
  int resolution = 21;
  std::vector<double> windows;
  Encoding encoding = Encoding::frequency;
  DetectionScheme scheme = DetectionScheme::dichroic;
  bool reexcitation = false;
  int jobs = 1;
  // Emission grid; n == 0 means choose automatically (10/kappa horizon,
  // extended until the emission has actually finished).
  TimeGrid grid{0.0, 0.0, 0};
  int grid_samples = 2048;

  void validate() const;
};

// Runs fn(0..n-1) on up to `jobs` worker threads. Results must be written to
// preallocated, index-addressed storage; the partitioning never affects the
// values. The first exception thrown by fn is rethrown in the caller after
// all workers finish.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

// [0, 10/kappa] with n samples, the horizon heuristic used when no grid is
// given. Drivers extend it (doubling t1) until simulate_emission reports the
// emission complete.
TimeGrid default_emission_grid(const NodeConfig& cfg, int n = 2048);

// simulate_emission on an automatically extended grid: starts from
// default_emission_grid (or `grid` if n > 0) and doubles the horizon until
// the record is not truncated (at most `max_doublings` times).
EmissionRecord simulate_emission_extended(const NodeConfig& cfg, Encoding enc,
                                          TimeGrid grid = {0.0, 0.0, 0},
                                          int n = 2048,
                                          const IntegratorOptions& opt = {},
                                          int max_doublings = 6);

// Sets the free Rabi frequency so the red and blue wavepacket envelopes
// overlap maximally (golden-section search, 1e-4 relative tolerance). With
// equal detunings the two drive tones merge and the overlap is exactly
// flat in the split; the search detects this and falls back to the Raman
// rate-matching condition Omega_1 g_1 / Delta_1 = Omega_2 g_2 / Delta_2,
// which is the condition the published drive values satisfy.
enum class FixedDrive { omega1, omega2 };

struct BalanceResult {
  NodeConfig config;
  double overlap = 0.0;         // achieved normalized envelope overlap
  double norm_ratio = 0.0;      // red norm / blue norm at the optimum
  int evaluations = 0;
  bool flat_objective = false;  // analytic fallback used
};

BalanceResult balance_drives(const NodeConfig& cfg,
                             FixedDrive fix = FixedDrive::omega2,
                             Encoding enc = Encoding::frequency,
                             const IntegratorOptions& opt = {});

// One cell of a birefringence sweep. Failures are caught per cell and
// reported with the cell coordinates; the sweep continues.
struct HeatmapCell {
  double delta_a = 0.0;  // units of kappa
  double delta_b = 0.0;
  bool ok = false;
  std::string error;
  WindowedResult result;
};

struct HeatmapResult {
  SweepSpec spec;
  NodeConfig base;
  TimeGrid grid;
  std::vector<HeatmapCell> cells;  // row-major, delta_a outer, delta_b inner
};

// Fidelity/efficiency over the (delta_A, delta_B) plane at the spec's first
// window. Node emissions are cached per distinct delta value, so a
// resolution-R sweep costs R emissions, not R^2.
HeatmapResult run_birefringence_heatmap(const NodeConfig& base, const SweepSpec& spec);

// Efficiency, fidelity, and visibility versus coincidence window for two
// identical nodes at a preset. The last entry is the whole-map (T = inf)
// aggregate; its fidelity is the asymptotic value.
struct WindowCurves {
  Preset preset;
  TimeGrid grid;
  bool reexcitation = false;
  std::vector<WindowedResult> results;
  double asymptotic_fidelity = 0.0;
  double asymptotic_efficiency_window = 0.0;  // T beyond which efficiency > 0.99
  double bell_phase = 0.0;
};

WindowCurves run_window_curves(const Preset& preset, const SweepSpec& spec);

}  // namespace cartsim
