// Release gate: the quantitative results the simulator must reproduce, one
// numbered check per claim. Run with no argument for the whole gate, or with
// a single index 1..9 to run one check (the ctest registrations do the
// latter). Each check prints one [PASS]/[FAIL] line and the exit code is the
// number of failures.
//
// Checks 5 and 6 pin the published saturation fidelities of the two hardware
// presets. With the parameter tables as implemented the model saturates at
// 0.936 (ca40) and 0.960 (ra225) instead, so those two checks currently
// fail; the targets stay pinned rather than being widened to match.
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cartsim/emission.hpp"
#include "cartsim/experiments.hpp"
#include "cartsim/interference.hpp"
#include "cartsim/node.hpp"
#include "cartsim/propagators.hpp"
#include "cartsim/types.hpp"
#include "oracles.hpp"

using namespace cartsim;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double x) {
  std::ostringstream ss;
  ss << x;
  return ss.str();
}

// T = 0, steps equal fractions of t1, and infinity.
std::vector<double> window_ladder(double t1, int steps = 20) {
  std::vector<double> w;
  for (int k = 0; k <= steps; ++k) w.push_back(t1 * k / steps);
  w.push_back(inf);
  return w;
}

// Both records on one shared grid, same policy as the command-line driver:
// let each node pick its horizon, then rerun both on the longer one.
std::pair<EmissionRecord, EmissionRecord> emit_pair(const NodeConfig& a,
                                                    const NodeConfig& b, Encoding enc,
                                                    const TimeGrid& req, int n) {
  EmissionRecord ra = simulate_emission_extended(a, enc, req, n);
  EmissionRecord rb = simulate_emission_extended(b, enc, req, n);
  if (!(ra.wavepacket.grid == rb.wavepacket.grid)) {
    TimeGrid common = ra.wavepacket.grid;
    common.t1 = std::max(common.t1, rb.wavepacket.grid.t1);
    ra = simulate_emission(a, common, enc);
    rb = simulate_emission(b, common, enc);
  }
  return {ra, rb};
}

CoincidenceMap build_map(const EmissionRecord& a, const EmissionRecord& b,
                         Encoding enc, bool reexcitation = false,
                         DetectionScheme scheme = DetectionScheme::dichroic) {
  return enc == Encoding::frequency
             ? coincidence_map_frequency(a, b, scheme, reexcitation)
             : coincidence_map_polarization(a, b, reexcitation);
}

// Identical nodes, no polarization splitting: every coincidence heralds the
// Bell state exactly, in both encodings and at every window.
Outcome criterion_1() {
  const Stopwatch timer;
  const NodeConfig cfg = load_preset("generic").node;
  const TimeGrid grid{0.0, 16.0, 513};
  double worst = 0.0;
  for (const Encoding enc : {Encoding::frequency, Encoding::polarization}) {
    const EmissionRecord rec = simulate_emission(cfg, grid, enc);
    const CoincidenceMap map = build_map(rec, rec, enc);
    for (const WindowedResult& r : window_aggregate(map, window_ladder(grid.t1)))
      worst = std::max(worst, std::abs(r.fidelity - 1.0));
  }
  const double elapsed = timer.seconds();
  Outcome o;
  o.pass = worst <= 1e-6 && elapsed < 10.0;
  o.detail = "identical unsplit nodes, both encodings: max |F - 1| = " + fmt(worst) +
             " (want <= 1e-6) in " + fmt(elapsed) + " s (want < 10)";
  return o;
}

// A splitting common to both nodes leaves the frequency encoding unaffected.
Outcome criterion_2() {
  const Stopwatch timer;
  NodeConfig cfg = load_preset("generic").node;
  cfg.birefringence.delta = cfg.kappa;
  const EmissionRecord rec =
      simulate_emission_extended(cfg, Encoding::frequency, TimeGrid{0.0, 16.0, 513}, 513);
  const CoincidenceMap map = build_map(rec, rec, Encoding::frequency);
  double worst = 0.0;
  for (const WindowedResult& r : window_aggregate(map, window_ladder(map.grid_r.t1)))
    worst = std::max(worst, std::abs(r.fidelity - 1.0));
  const double elapsed = timer.seconds();
  Outcome o;
  o.pass = worst <= 1e-3 && elapsed < 30.0;
  o.detail = "common splitting delta = kappa, frequency encoding: max |F - 1| = " +
             fmt(worst) + " (want <= 1e-3) in " + fmt(elapsed) + " s (want < 30)";
  return o;
}

// One split node against one unsplit node degrades the frequency encoding
// to about 60 % at delta_B = 2 kappa.
Outcome criterion_3() {
  const NodeConfig a = load_preset("generic").node;
  NodeConfig b = a;
  b.birefringence.delta = 2.0 * b.kappa;
  const auto [ra, rb] = emit_pair(a, b, Encoding::frequency, TimeGrid{0.0, 16.0, 1025}, 1025);
  const CoincidenceMap map = build_map(ra, rb, Encoding::frequency);
  const double f = window_aggregate(map, {inf}).front().fidelity;
  Outcome o;
  o.pass = std::abs(f - 0.60) <= 0.05;
  o.detail = "splittings (0, 2 kappa), frequency encoding: large-T F = " + fmt(f) +
             " (want 0.60 +- 0.05)";
  return o;
}

// The polarization encoding already suffers at a small common splitting.
Outcome criterion_4() {
  NodeConfig cfg = load_preset("generic").node;
  cfg.birefringence.delta = 0.3 * cfg.kappa;
  const EmissionRecord rec = simulate_emission_extended(
      cfg, Encoding::polarization, TimeGrid{0.0, 16.0, 1025}, 1025);
  const CoincidenceMap map = build_map(rec, rec, Encoding::polarization);
  const double f = window_aggregate(map, {inf}).front().fidelity;
  Outcome o;
  o.pass = std::abs(f - 0.85) <= 0.05;
  o.detail = "common splitting 0.3 kappa, polarization encoding: large-T F = " + fmt(f) +
             " (want 0.85 +- 0.05)";
  return o;
}

// ca40 with re-excitation: fidelity starts at 1 for narrow windows and
// saturates at the published asymptote.
Outcome criterion_5() {
  const Stopwatch timer;
  SweepSpec spec;
  spec.reexcitation = true;
  spec.windows = {0.0, inf};
  spec.grid = TimeGrid{0.0, 8.0, 1025};
  const WindowCurves curves = run_window_curves(load_preset("ca40"), spec);
  const double f0 = curves.results.front().fidelity;
  const double fa = curves.asymptotic_fidelity;
  const double elapsed = timer.seconds();
  Outcome o;
  o.pass = std::abs(fa - 0.966) <= 0.01 && std::abs(f0 - 1.0) <= 5e-3 && elapsed < 300.0;
  o.detail = "ca40 with re-excitation: asymptotic F = " + fmt(fa) +
             " (want 0.966 +- 0.01), F(T -> 0+) = " + fmt(f0) +
             " (want 1 +- 5e-3) in " + fmt(elapsed) + " s (want < 300)";
  return o;
}

// ra225 with re-excitation: the slow, well-protected emitter keeps almost
// all of its asymptotic fidelity.
Outcome criterion_6() {
  SweepSpec spec;
  spec.reexcitation = true;
  spec.windows = {inf};
  spec.grid = TimeGrid{0.0, 80.0, 1025};
  const WindowCurves curves = run_window_curves(load_preset("ra225"), spec);
  const double fa = curves.asymptotic_fidelity;
  Outcome o;
  o.pass = std::abs(fa - 0.998) <= 0.002;
  o.detail = "ra225 with re-excitation: asymptotic F = " + fmt(fa) +
             " (want 0.998 +- 0.002)";
  return o;
}

// Cavity geometry: waist and field decay rate from mirror parameters.
Outcome criterion_7() {
  const GeometryDerived ca = derive_geometry(load_preset("ca40").geometry);
  const GeometryDerived ra = derive_geometry(load_preset("ra225").geometry);
  Outcome o;
  o.pass = std::abs(ca.waist_um - 8.24) <= 0.02 && std::abs(ra.waist_um - 28.0) <= 1.0 &&
           std::abs(ca.kappa - 6.0) <= 0.1 && std::abs(ra.kappa - 0.28) <= 0.01;
  o.detail = "geometry: w0(ca40) = " + fmt(ca.waist_um) + " um (want 8.24 +- 0.02), " +
             "w0(ra225) = " + fmt(ra.waist_um) + " um (want 28 +- 1), kappa(ca40) = " +
             fmt(ca.kappa) + " (want 6.0 +- 0.1), kappa(ra225) = " + fmt(ra.kappa) +
             " (want 0.28 +- 0.01)";
  return o;
}

// Numerics against independent oracles: Schrodinger propagation versus a
// Taylor matrix exponential, and the emission probability bookkeeping
// closing to 1 at both hardware presets.
Outcome criterion_8() {
  std::mt19937 rng(20260815);
  double worst_prop = 0.0;
  for (int k = 0; k < 100; ++k) {
    const ComplexMatrix h = testing::random_matrix(rng, basis_dim, 2.0);
    const ComplexVector psi0 = testing::random_unit_vector(rng, basis_dim);
    const auto traj = propagate_schrodinger(TimeDependentOperator::constant(h), psi0,
                                            TimeGrid{0.0, 1.0, 3}, {1e-11, 1e-14});
    for (int s = 1; s < 3; ++s) {
      const double t = 0.5 * s;
      const ComplexVector want =
          testing::expm_taylor(Complex(0.0, -t) * h) * psi0;
      worst_prop =
          std::max(worst_prop, (traj[s] - want).lpNorm<Eigen::Infinity>());
    }
  }

  double worst_closure = 0.0;
  const EmissionRecord ca =
      simulate_emission(load_preset("ca40").node, TimeGrid{0.0, 8.0, 1025});
  const EmissionRecord ra =
      simulate_emission(load_preset("ra225").node, TimeGrid{0.0, 80.0, 1025});
  for (const EmissionRecord* rec : {&ca, &ra})
    worst_closure = std::max(
        worst_closure,
        std::abs(rec->emitted_total + rec->xe_loss + rec->unreleased - 1.0));

  Outcome o;
  o.pass = worst_prop <= 1e-8 && worst_closure <= 1e-6;
  o.detail = "oracles: propagation vs expm on 100 random instances, max err = " +
             fmt(worst_prop) + " (want <= 1e-8); bookkeeping closure err = " +
             fmt(worst_closure) + " (want <= 1e-6)";
  return o;
}

NodeConfig random_config(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NodeConfig c;
  c.g1 = 5.0 + 10.0 * u(rng);
  c.g2 = 5.0 + 10.0 * u(rng);
  c.kappa = 2.0 + 6.0 * u(rng);
  c.drive.omega1 = 20.0 + 40.0 * u(rng);
  c.drive.omega2 = 20.0 + 40.0 * u(rng);
  c.drive.delta1 = 300.0 + 200.0 * u(rng);
  c.drive.delta2 = u(rng) < 0.5 ? c.drive.delta1 : c.drive.delta1 + 30.0;
  c.gamma_ie = 3.0 * u(rng);
  c.gamma_xe = 3.0 * u(rng);
  c.birefringence.delta = 2.0 * c.kappa * u(rng);
  return c;
}

EmissionRecord gauss_record(const TimeGrid& grid, double t0, double w) {
  EmissionRecord rec;
  rec.wavepacket.grid = grid;
  rec.delay_grid = TimeGrid{0.0, grid.t1 - grid.t0, grid.n};
  for (auto& ch : rec.wavepacket.channels) ch.assign(grid.n, Complex(0.0, 0.0));
  const double amp = std::sqrt(0.5 / (w * std::sqrt(two_pi)));
  for (int k = 0; k < grid.n; ++k) {
    const double t = grid.time(k);
    const double env = amp * std::exp(-(t - t0) * (t - t0) / (4.0 * w * w));
    rec.wavepacket.channels[0][k] = env;
    rec.wavepacket.channels[2][k] = env;
  }
  return rec;
}

// Structural properties that must hold everywhere, checked on randomized
// configurations and on targeted corners.
Outcome criterion_9() {
  std::vector<std::string> bad;
  const NodeConfig generic = load_preset("generic").node;

  // Coincidence rates are nonnegative and windowed fidelities/efficiencies
  // stay in [0, 1] for random configurations, with and without
  // re-excitation, both encodings.
  std::mt19937 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    const Encoding enc = trial % 2 == 0 ? Encoding::frequency : Encoding::polarization;
    const TimeGrid grid{0.0, 12.0, 257};
    const EmissionRecord ra = simulate_emission(random_config(rng), grid, enc);
    const EmissionRecord rb = simulate_emission(random_config(rng), grid, enc);
    const CoincidenceMap map = build_map(ra, rb, enc, trial > 0);
    for (const double p : map.p)
      if (p < 0.0) bad.push_back("negative coincidence rate");
    for (const WindowedResult& r : window_aggregate(map, window_ladder(grid.t1, 8))) {
      if (!(r.fidelity >= 0.0 && r.fidelity <= 1.0)) bad.push_back("F outside [0,1]");
      if (!(r.efficiency >= 0.0 && r.efficiency <= 1.0))
        bad.push_back("efficiency outside [0,1]");
    }
  }

  // Swapping the nodes never changes the heralded fidelity.
  for (const Encoding enc : {Encoding::frequency, Encoding::polarization}) {
    NodeConfig a = generic, b = generic;
    a.birefringence.delta = 0.3 * a.kappa;
    b.birefringence.delta = 1.2 * b.kappa;
    const auto [ra, rb] = emit_pair(a, b, enc, TimeGrid{0.0, 16.0, 513}, 513);
    const double f_ab = window_aggregate(build_map(ra, rb, enc), {inf}).front().fidelity;
    const double f_ba = window_aggregate(build_map(rb, ra, enc), {inf}).front().fidelity;
    if (std::abs(f_ab - f_ba) > 1e-9) bad.push_back("node-swap asymmetry");

    // Windowed efficiency grows monotonically from 0 to 1.
    const std::vector<WindowedResult> results =
        window_aggregate(build_map(ra, rb, enc), window_ladder(ra.wavepacket.grid.t1, 25));
    if (results.front().efficiency != 0.0) bad.push_back("nonzero T = 0 efficiency");
    for (size_t k = 1; k < results.size(); ++k)
      if (results[k].efficiency < results[k - 1].efficiency - 1e-12)
        bad.push_back("efficiency not monotone");
    if (std::abs(results.back().efficiency - 1.0) > 1e-12)
      bad.push_back("whole-map efficiency != 1");
  }

  // Two-photon interference: identical pure photons bunch completely,
  // photons without common support not at all.
  const TimeGrid grid{0.0, 16.0, 513};
  const EmissionRecord twin = simulate_emission(generic, grid, Encoding::frequency);
  if (std::abs(hom_visibility(twin, twin, false) - 1.0) > 1e-9)
    bad.push_back("HOM V != 1 for twins");
  const EmissionRecord early = gauss_record(grid, 3.0, 0.4);
  const EmissionRecord late = gauss_record(grid, 13.0, 0.4);
  if (hom_visibility(early, late, false) > 1e-10)
    bad.push_back("HOM V != 0 for disjoint photons");

  // No splitting means no amplitude in the rotated-polarization channels.
  for (const Encoding enc : {Encoding::frequency, Encoding::polarization}) {
    const EmissionRecord rec = simulate_emission(generic, grid, enc);
    if (rec.wavepacket.channel_norm(1) + rec.wavepacket.channel_norm(3) > 1e-12)
      bad.push_back("rotated channels populated at delta = 0");
    if (rec.wavepacket.channel_norm(0) + rec.wavepacket.channel_norm(2) < 0.1)
      bad.push_back("principal channels empty");
  }

  // Filtering the rotated polarizations raises fidelity and costs
  // heralding rate.
  {
    NodeConfig b = generic;
    b.birefringence.delta = b.kappa;
    const auto [ra, rb] =
        emit_pair(generic, b, Encoding::frequency, TimeGrid{0.0, 16.0, 513}, 513);
    const CoincidenceMap filtered =
        build_map(ra, rb, Encoding::frequency, false, DetectionScheme::filtered);
    const CoincidenceMap dichroic =
        build_map(ra, rb, Encoding::frequency, false, DetectionScheme::dichroic);
    const double f2 = window_aggregate(filtered, {inf}).front().fidelity;
    const double f3 = window_aggregate(dichroic, {inf}).front().fidelity;
    if (f2 < f3 - 1e-12) bad.push_back("filtering lowered fidelity");
    if (filtered.total_probability() >= dichroic.total_probability())
      bad.push_back("filtering did not cost rate");
  }

  Outcome o;
  o.pass = bad.empty();
  if (o.pass) {
    o.detail = "positivity, bounds, node swap, efficiency growth, interference "
               "identities, channel selection and scheme ordering all hold";
  } else {
    o.detail = "violated:";
    for (const std::string& b : bad) o.detail += " [" + b + "]";
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  using Check = Outcome (*)();
  const Check checks[] = {criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                          criterion_6, criterion_7, criterion_8, criterion_9};
  int lo = 1, hi = 9;
  if (argc > 1) {
    const int id = std::atoi(argv[1]);
    if (id < 1 || id > 9) {
      std::cerr << "usage: acceptance [1-9]\n";
      return 64;
    }
    lo = hi = id;
  }
  int failures = 0;
  for (int id = lo; id <= hi; ++id) {
    const Outcome o = checks[id - 1]();
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << o.detail
              << "\n";
    if (!o.pass) ++failures;
  }
  return failures;
}
