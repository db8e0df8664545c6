// Presets, drive balancing, and sweep drivers.
#include "cartsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "cartsim/propagators.hpp"

namespace cartsim {

namespace {

// Model matrices are built in 2*pi*MHz; propagation wants rad/us.
TimeDependentOperator to_angular(const TimeDependentOperator& h) {
  if (h.is_constant()) return TimeDependentOperator::constant(two_pi * h(0.0));
  return TimeDependentOperator(h.dim(), [h](double t, ComplexMatrix& out) {
    h.evaluate(t, out);
    out *= two_pi;
  });
}

Preset make_ca40() {
  Preset p;
  p.name = "ca40";
  p.node.g1 = 9.36;
  p.node.g2 = 8.89;
  p.node.kappa = 6.0;
  p.node.drive = {38.0, 40.0, 400.0, 400.0, 0.0};
  p.node.gamma_ie = 10.78 / 3.0;
  p.node.gamma_xe = 7.92;
  p.node.birefringence.delta = 0.5 * 6.0;
  p.node.birefringence.axis = {1.0, 0.0, 0.0};
  p.geometry = {0.493, 0.493, 5.0e4, 866.0};
  p.fsr = 304.0e3;
  p.notes = {
      {"g1, g2", "couplings of the 866 nm and 854 nm transitions for the "
                 "0.493 mm fiber cavity, Clebsch-Gordan factors included "
                 "(14.8*sqrt(10)/5 and 15.4*sqrt(3)/3)"},
      {"kappa", "FSR / finesse, FSR = c/(2l) = 304 GHz, finesse 5e4"},
      {"Omega, Delta", "Raman tones rate-matched so both wavepacket colors "
                       "share one envelope (Omega_1 g_1 = Omega_2 g_2 at "
                       "equal detuning)"},
      {"gamma_ie", "measured P3/2 decay rate times the 1/3 branching back "
                   "to the initial sublevel"},
      {"gamma_xe", "remaining P3/2 decay paths"},
      {"delta", "birefringent splitting 0.5 kappa, eigenmodes (H+/-V)/sqrt(2)"},
  };
  return p;
}

Preset make_ra225() {
  Preset p;
  p.name = "ra225";
  p.node.g1 = 1.01;
  p.node.g2 = 1.01;
  p.node.kappa = 0.28;
  p.node.drive = {40.0, 40.0, 400.0, 400.0, 0.0};
  p.node.gamma_ie = 1.69 / 3.0;
  p.node.gamma_xe = 9.00;
  p.node.birefringence.delta = 0.5 * 0.28;
  p.node.birefringence.axis = {1.0, 0.0, 0.0};
  p.geometry = {10.8, 10.8, 5.0e4, 468.0};
  p.fsr = 13.84e3;
  p.notes = {
      {"g1, g2", "1.75/sqrt(3) coupling of the 468 nm transition for the "
                 "confocal 10.8 mm cavity"},
      {"kappa", "FSR / finesse at finesse 5e4"},
      {"FSR", "length chosen so the FSR is half the 27.68 GHz hyperfine "
              "qubit splitting and the cavity supports both photon modes; "
              "c/(2l) reproduces the quoted 13.84 GHz to 0.3%"},
      {"gamma_ie", "P1/2 decay rate times the 1/3 branching back to the "
                   "initial state; the slow recycling is what keeps "
                   "re-excitation errors small"},
      {"gamma_xe", "remaining P1/2 decay paths"},
      {"delta", "birefringent splitting 0.5 kappa, eigenmodes (H+/-V)/sqrt(2)"},
  };
  return p;
}

Preset make_generic() {
  Preset p;
  p.name = "generic";
  p.node.g1 = 10.0;
  p.node.g2 = 10.0;
  p.node.kappa = 5.0;
  p.node.drive = {40.0, 40.0, 400.0, 400.0, 0.0};
  p.node.gamma_ie = 0.0;
  p.node.gamma_xe = 0.0;
  p.node.birefringence.delta = 0.0;
  p.node.birefringence.axis = {1.0, 0.0, 0.0};
  p.notes = {
      {"all", "idealized lossless node for the birefringence studies; no "
              "hardware geometry attached"},
  };
  return p;
}

// Red/blue envelope shapes of the pure emission branch. Re-excitation only
// rescales the mixture weights and cannot move the balance optimum, so the
// objective never needs the density-matrix pass.
struct EnvelopeShapes {
  std::vector<double> red, blue;
  double norm_red = 0.0, norm_blue = 0.0;
};

EnvelopeShapes pure_envelopes(const NodeConfig& cfg, Encoding enc,
                              const TimeGrid& grid, const IntegratorOptions& opt) {
  const TimeDependentOperator h = to_angular(build_effective_hamiltonian(cfg, enc));
  ComplexVector psi0 = ComplexVector::Zero(basis_dim);
  psi0[idx_initial] = Complex(1.0, 0.0);
  const std::vector<ComplexVector> states = propagate_schrodinger(h, psi0, grid, opt);

  EnvelopeShapes env;
  env.red.resize(grid.n);
  env.blue.resize(grid.n);
  const double dt = grid.dt();
  for (int k = 0; k < grid.n; ++k) {
    const ComplexVector& s = states[k];
    env.red[k] = std::sqrt(std::norm(s[idx_channel0]) + std::norm(s[idx_channel0 + 1]));
    env.blue[k] = std::sqrt(std::norm(s[idx_channel0 + 2]) + std::norm(s[idx_channel0 + 3]));
    const double w = (k == 0 || k == grid.n - 1) ? 0.5 : 1.0;
    env.norm_red += w * dt * env.red[k] * env.red[k];
    env.norm_blue += w * dt * env.blue[k] * env.blue[k];
  }
  return env;
}

double envelope_overlap(const EnvelopeShapes& env, double dt) {
  double cross = 0.0;
  const int n = static_cast<int>(env.red.size());
  for (int k = 0; k < n; ++k) {
    const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
    cross += w * dt * env.red[k] * env.blue[k];
  }
  const double denom = std::sqrt(env.norm_red * env.norm_blue);
  return denom > 0.0 ? cross / denom : 0.0;
}

}  // namespace

Preset load_preset(const std::string& name) {
  if (name == "ca40") return make_ca40();
  if (name == "ra225") return make_ra225();
  if (name == "generic") return make_generic();
  throw std::invalid_argument("unknown preset '" + name +
                              "' (known: ca40, ra225, generic)");
}

std::vector<std::string> preset_names() { return {"ca40", "ra225", "generic"}; }

void SweepSpec::validate() const {
  if (!std::isfinite(delta_min) || !std::isfinite(delta_max) || delta_min < 0.0 ||
      delta_max < delta_min)
    throw std::invalid_argument("sweep: need 0 <= delta_min <= delta_max");
  if (resolution < 1) throw std::invalid_argument("sweep: resolution must be >= 1");
  if (resolution > 1 && delta_max == delta_min)
    throw std::invalid_argument("sweep: resolution > 1 needs a nonempty delta range");
  if (jobs < 1) throw std::invalid_argument("sweep: jobs must be >= 1");
  for (double w : windows)
    if (std::isnan(w) || w < 0.0)
      throw std::invalid_argument("sweep: windows must be nonnegative");
  if (grid.n != 0) grid.validate();
  if (grid.n == 0 && grid_samples < 16)
    throw std::invalid_argument("sweep: grid_samples must be >= 16");
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (n <= 0) return;
  jobs = std::clamp(jobs, 1, n);
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&] {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

TimeGrid default_emission_grid(const NodeConfig& cfg, int n) {
  const double horizon = cfg.kappa > 0.0 ? 10.0 / cfg.kappa : 1.0;
  return TimeGrid{0.0, horizon, n};
}

EmissionRecord simulate_emission_extended(const NodeConfig& cfg, Encoding enc,
                                          TimeGrid grid, int n,
                                          const IntegratorOptions& opt,
                                          int max_doublings) {
  TimeGrid g = grid.n > 0 ? grid : default_emission_grid(cfg, n);
  EmissionRecord rec = simulate_emission(cfg, g, enc, opt);
  for (int k = 0; k < max_doublings && rec.grid_truncated; ++k) {
    g.t1 = g.t0 + 2.0 * (g.t1 - g.t0);
    rec = simulate_emission(cfg, g, enc, opt);
  }
  return rec;
}

BalanceResult balance_drives(const NodeConfig& cfg, FixedDrive fix, Encoding enc,
                             const IntegratorOptions& opt) {
  cfg.validate();
  if (cfg.g1 <= 0.0 || cfg.g2 <= 0.0)
    throw std::invalid_argument("balance_drives: both couplings must be positive");
  if (cfg.drive.delta1 == 0.0 || cfg.drive.delta2 == 0.0)
    throw std::invalid_argument("balance_drives: both detunings must be nonzero");
  const double fixed_omega =
      fix == FixedDrive::omega2 ? cfg.drive.omega2 : cfg.drive.omega1;
  if (fixed_omega <= 0.0)
    throw std::invalid_argument("balance_drives: the fixed drive must be positive");

  // Raman rate matching Omega_1 g_1 / Delta_1 = Omega_2 g_2 / Delta_2, the
  // exact optimum whenever the detunings coincide (the tones then merge into
  // one envelope and the overlap is flat in the split).
  const double analytic =
      fix == FixedDrive::omega2
          ? cfg.drive.omega2 * cfg.g2 * cfg.drive.delta1 / (cfg.g1 * cfg.drive.delta2)
          : cfg.drive.omega1 * cfg.g1 * cfg.drive.delta2 / (cfg.g2 * cfg.drive.delta1);

  TimeGrid grid = default_emission_grid(cfg, 1024);
  grid.t1 = grid.t0 + 4.0 * (grid.t1 - grid.t0);
  const double dt = grid.dt();

  BalanceResult res;
  auto with_omega = [&](double omega) {
    NodeConfig c = cfg;
    (fix == FixedDrive::omega2 ? c.drive.omega1 : c.drive.omega2) = omega;
    return c;
  };
  double obj_min = std::numeric_limits<double>::infinity();
  double obj_max = -std::numeric_limits<double>::infinity();
  auto objective = [&](double omega) {
    const double v = envelope_overlap(pure_envelopes(with_omega(omega), enc, grid, opt), dt);
    ++res.evaluations;
    obj_min = std::min(obj_min, v);
    obj_max = std::max(obj_max, v);
    return v;
  };

  // Golden-section maximization on [analytic/4, 4*analytic].
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.25 * analytic, hi = 4.0 * analytic;
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  while (hi - lo > 1e-4 * analytic) {
    if (f1 >= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = objective(x2);
    }
  }
  double best = 0.5 * (lo + hi);

  // Integration noise aside, a flat objective means the split is
  // unconstrained; rate matching is then the canonical choice.
  res.flat_objective = (obj_max - obj_min) < 1e-7;
  if (res.flat_objective) best = analytic;

  res.config = with_omega(best);
  const EnvelopeShapes env = pure_envelopes(res.config, enc, grid, opt);
  res.overlap = envelope_overlap(env, dt);
  res.norm_ratio = env.norm_blue > 0.0
                       ? env.norm_red / env.norm_blue
                       : std::numeric_limits<double>::quiet_NaN();
  return res;
}

HeatmapResult run_birefringence_heatmap(const NodeConfig& base, const SweepSpec& spec) {
  spec.validate();
  base.validate();
  if (base.kappa <= 0.0)
    throw std::invalid_argument("heatmap: base config needs kappa > 0 (delta axes are in kappa units)");

  const int res = spec.resolution;
  std::vector<double> deltas(res);
  for (int i = 0; i < res; ++i)
    deltas[i] = res == 1 ? spec.delta_min
                         : spec.delta_min +
                               (spec.delta_max - spec.delta_min) * i / (res - 1);

  auto node_at = [&](double delta_kappa) {
    NodeConfig c = base;
    c.birefringence.delta = delta_kappa * base.kappa;
    return c;
  };

  // One shared grid for every cell, probed at the largest splitting (the
  // slowest emission); one emission per distinct delta.
  HeatmapResult out;
  out.spec = spec;
  out.base = base;
  if (spec.grid.n > 0) {
    out.grid = spec.grid;
  } else {
    const EmissionRecord probe = simulate_emission_extended(
        node_at(deltas.back()), spec.encoding, TimeGrid{0.0, 0.0, 0}, spec.grid_samples);
    out.grid = probe.wavepacket.grid;
  }

  struct EmissionSlot {
    bool ok = false;
    std::string error;
    EmissionRecord rec;
  };
  std::vector<EmissionSlot> emissions(res);
  parallel_for(res, spec.jobs, [&](int i) {
    try {
      emissions[i].rec = simulate_emission(node_at(deltas[i]), out.grid, spec.encoding);
      emissions[i].ok = true;
    } catch (const std::exception& e) {
      emissions[i].error = e.what();
    }
  });

  const double window =
      spec.windows.empty() ? 5.0 / base.kappa : spec.windows.front();

  out.cells.assign(static_cast<size_t>(res) * res, HeatmapCell{});
  parallel_for(res * res, spec.jobs, [&](int idx) {
    const int ia = idx / res, ib = idx % res;
    HeatmapCell& cell = out.cells[idx];
    cell.delta_a = deltas[ia];
    cell.delta_b = deltas[ib];
    try {
      if (!emissions[ia].ok) throw std::runtime_error(emissions[ia].error);
      if (!emissions[ib].ok) throw std::runtime_error(emissions[ib].error);
      const CoincidenceMap map =
          spec.encoding == Encoding::frequency
              ? coincidence_map_frequency(emissions[ia].rec, emissions[ib].rec,
                                          spec.scheme, spec.reexcitation)
              : coincidence_map_polarization(emissions[ia].rec, emissions[ib].rec,
                                             spec.reexcitation);
      cell.result = window_aggregate(map, {window}).front();
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  return out;
}

WindowCurves run_window_curves(const Preset& preset, const SweepSpec& spec) {
  spec.validate();
  const EmissionRecord rec = simulate_emission_extended(
      preset.node, spec.encoding, spec.grid, spec.grid_samples);
  const CoincidenceMap map =
      spec.encoding == Encoding::frequency
          ? coincidence_map_frequency(rec, rec, spec.scheme, spec.reexcitation)
          : coincidence_map_polarization(rec, rec, spec.reexcitation);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> windows = spec.windows;
  if (windows.empty()) {
    const double kappa = preset.node.kappa;
    windows = {kappa > 0.0 ? 5.0 / kappa : 1.0, inf};
  }

  WindowCurves out;
  out.preset = preset;
  out.grid = rec.wavepacket.grid;
  out.reexcitation = spec.reexcitation;
  out.results = window_aggregate(map, windows);
  out.asymptotic_fidelity = window_aggregate(map, {inf}).front().fidelity;
  out.bell_phase = map.bell_phase;

  // Smallest tabulated window collecting > 99% of the coincidences.
  const double span = out.grid.t1 - out.grid.t0;
  std::vector<double> ladder(200);
  for (int i = 0; i < 200; ++i) ladder[i] = span * (i + 1) / 200.0;
  const std::vector<WindowedResult> eff = window_aggregate(map, ladder);
  out.asymptotic_efficiency_window = span;
  for (const WindowedResult& r : eff) {
    if (r.efficiency > 0.99) {
      out.asymptotic_efficiency_window = r.window;
      break;
    }
  }
  return out;
}

}  // namespace cartsim
