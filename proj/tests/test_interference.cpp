// Two-photon interference: beam-splitter algebra, Bell fidelity in the
// matched and mismatched birefringence regimes, detection-scheme ordering,
// window aggregation, node-swap symmetry, HOM visibility against the
// mixture-overlap formula, and input validation.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "cartsim/emission.hpp"
#include "cartsim/interference.hpp"
#include "cartsim/node.hpp"

using namespace cartsim;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

NodeConfig generic_config(double delta_over_kappa) {
  NodeConfig cfg;
  cfg.g1 = cfg.g2 = 10.0;
  cfg.kappa = 5.0;
  cfg.drive = {40.0, 40.0, 400.0, 400.0, 0.0};
  cfg.birefringence.delta = delta_over_kappa * cfg.kappa;
  cfg.birefringence.axis = {1.0, 0.0, 0.0};
  return cfg;
}

NodeConfig table_ca() {
  NodeConfig cfg;
  cfg.g1 = 9.36;
  cfg.g2 = 8.89;
  cfg.kappa = 6.0;
  cfg.gamma_ie = 10.78 / 3.0;
  cfg.gamma_xe = 7.92;
  cfg.drive = {38.0, 40.0, 400.0, 400.0, 0.0};
  cfg.birefringence.delta = 0.5 * cfg.kappa;
  cfg.birefringence.axis = {1.0, 0.0, 0.0};
  return cfg;
}

const TimeGrid coarse_grid{0.0, 16.0, 513};
const TimeGrid fine_grid{0.0, 16.0, 1025};

double windowed_fidelity(const CoincidenceMap& map, double t) {
  return window_aggregate(map, {t}).front().fidelity;
}

// Record with a single Gaussian amplitude exp(-(t-t0)^2/4w^2) e^{i slope t}
// of squared norm `power` in one channel.
EmissionRecord gauss_record(const TimeGrid& grid, int channel, double power,
                            double t0, double w, double slope,
                            Encoding enc = Encoding::frequency) {
  EmissionRecord rec;
  rec.wavepacket.grid = grid;
  rec.wavepacket.encoding = enc;
  rec.delay_grid = TimeGrid{0.0, grid.t1 - grid.t0, grid.n};
  for (auto& ch : rec.wavepacket.channels) ch.assign(grid.n, Complex(0.0, 0.0));
  const double amp = std::sqrt(power / (w * std::sqrt(two_pi)));
  for (int k = 0; k < grid.n; ++k) {
    const double t = grid.time(k);
    const double env = amp * std::exp(-(t - t0) * (t - t0) / (4.0 * w * w));
    rec.wavepacket.channels[channel][k] =
        env * Complex(std::cos(slope * t), std::sin(slope * t));
  }
  return rec;
}

double grid_overlap_sq(const std::vector<Complex>& u, const std::vector<Complex>& v,
                       const TimeGrid& grid, int shift_u, int shift_v) {
  Complex ov(0.0, 0.0);
  for (int k = 0; k < grid.n; ++k) {
    const double w = (k == 0 || k == grid.n - 1) ? 0.5 : 1.0;
    const Complex us = (k - shift_u >= 0) ? u[k - shift_u] : Complex(0.0, 0.0);
    const Complex vs = (k - shift_v >= 0) ? v[k - shift_v] : Complex(0.0, 0.0);
    ov += w * std::conj(us) * vs;
  }
  return std::norm(ov * grid.dt());
}

}  // namespace

TEST_CASE("beam splitter is unitary and splits a single photon evenly") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Complex a(dist(rng), dist(rng)), b(dist(rng), dist(rng));
    const auto [c, d] = beam_splitter_transform(a, b);
    CHECK(std::norm(c) + std::norm(d) ==
          doctest::Approx(std::norm(a) + std::norm(b)).epsilon(1e-14));
  }
  const auto [c, d] = beam_splitter_transform(Complex(1.0, 0.0), Complex(0.0, 0.0));
  CHECK(std::norm(c) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(c + d) < 1e-15);  // the reflected port picks up the minus sign

  CHECK_THROWS_AS(beam_splitter_transform(std::vector<Complex>(3),
                                          std::vector<Complex>(4)),
                  std::invalid_argument);
}

TEST_CASE("identical unsplit nodes herald a perfect Bell state") {
  const std::vector<double> windows = {0.0, 0.5, 2.0, 8.0, inf};
  const EmissionRecord freq = simulate_emission(generic_config(0.0), coarse_grid);
  const EmissionRecord pol =
      simulate_emission(generic_config(0.0), coarse_grid, Encoding::polarization);

  const CoincidenceMap mf =
      coincidence_map_frequency(freq, freq, DetectionScheme::dichroic, false);
  const CoincidenceMap mp = coincidence_map_polarization(pol, pol, false);
  for (const CoincidenceMap* map : {&mf, &mp}) {
    int live = 0;
    for (double f : map->f) {
      if (std::isnan(f)) continue;
      ++live;
      CHECK(f > 1.0 - 1e-6);
    }
    CHECK(live > map->rows());
    // Dichroic detection compares photons within one frequency, where they
    // are identical: V = 1. The polarization HOM sees the photon's reduced
    // state, a 50/50 H/V mixture when it is maximally entangled with the
    // atom, so its visibility saturates at 1/2 even for a perfect pair.
    const double v_want = map->encoding == Encoding::frequency ? 1.0 : 0.5;
    for (const WindowedResult& r : window_aggregate(*map, windows)) {
      CHECK(r.fidelity == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(r.visibility == doctest::Approx(v_want).epsilon(1e-6));
    }
  }
}

TEST_CASE("common birefringence on both nodes keeps the fidelity at one") {
  const EmissionRecord rec = simulate_emission(generic_config(1.0), coarse_grid);
  const CoincidenceMap map =
      coincidence_map_frequency(rec, rec, DetectionScheme::dichroic, false);
  for (const WindowedResult& r : window_aggregate(map, {0.0, 1.0, 4.0, inf}))
    CHECK(r.fidelity == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("one-sided birefringence mismatch lands in the expected band") {
  // delta_A = 0, delta_B = 2 kappa, frequency encoding: strong splitting on
  // one node dephases the Bell coherence across detection-time offsets.
  const EmissionRecord a = simulate_emission(generic_config(0.0), fine_grid);
  const EmissionRecord b = simulate_emission(generic_config(2.0), fine_grid);
  const CoincidenceMap map =
      coincidence_map_frequency(a, b, DetectionScheme::dichroic, false);
  const double f = windowed_fidelity(map, 2.0);
  CHECK(f > 0.55);
  CHECK(f < 0.65);
}

TEST_CASE("matched moderate birefringence in polarization encoding lands in the expected band") {
  // delta = 0.3 kappa on both nodes; unlike frequency encoding the two
  // branches rotate oppositely, so even a common splitting costs fidelity.
  const EmissionRecord rec =
      simulate_emission(generic_config(0.3), fine_grid, Encoding::polarization);
  const CoincidenceMap map = coincidence_map_polarization(rec, rec, false);
  const double f = windowed_fidelity(map, 2.0);
  CHECK(f > 0.80);
  CHECK(f < 0.90);
}

TEST_CASE("polarization encoding is hit harder than frequency encoding by a common splitting") {
  const EmissionRecord freq = simulate_emission(generic_config(1.0), coarse_grid);
  const EmissionRecord pol =
      simulate_emission(generic_config(1.0), coarse_grid, Encoding::polarization);
  const double f_freq = windowed_fidelity(
      coincidence_map_frequency(freq, freq, DetectionScheme::dichroic, false), inf);
  const double f_pol =
      windowed_fidelity(coincidence_map_polarization(pol, pol, false), inf);
  CHECK(f_freq > 0.999);
  CHECK(f_pol < f_freq - 0.1);
}

TEST_CASE("filtering trades heralding rate for fidelity") {
  const EmissionRecord a = simulate_emission(generic_config(0.0), coarse_grid);
  const EmissionRecord b = simulate_emission(generic_config(2.0), coarse_grid);
  const CoincidenceMap filtered =
      coincidence_map_frequency(a, b, DetectionScheme::filtered, false);
  const CoincidenceMap dichroic =
      coincidence_map_frequency(a, b, DetectionScheme::dichroic, false);
  CHECK(windowed_fidelity(filtered, inf) >= windowed_fidelity(dichroic, inf) - 1e-12);
  CHECK(filtered.total_probability() < dichroic.total_probability());
}

TEST_CASE("plain detectors halve the heralding rate and never beat dichroic fidelity") {
  // At zero splitting the same-frequency false heralds vanish (perfect HOM
  // suppression), so the direct rate is exactly half of dichroic and the
  // fidelity stays at one.
  const EmissionRecord ideal = simulate_emission(generic_config(0.0), coarse_grid);
  const CoincidenceMap direct0 =
      coincidence_map_frequency(ideal, ideal, DetectionScheme::direct, false);
  const CoincidenceMap dichroic0 =
      coincidence_map_frequency(ideal, ideal, DetectionScheme::dichroic, false);
  CHECK(direct0.total_probability() ==
        doctest::Approx(0.5 * dichroic0.total_probability()).epsilon(1e-9));
  CHECK(windowed_fidelity(direct0, inf) == doctest::Approx(1.0).epsilon(1e-6));

  // With a mismatch the false heralds dilute the fidelity below dichroic.
  const EmissionRecord a = simulate_emission(generic_config(0.0), coarse_grid);
  const EmissionRecord b = simulate_emission(generic_config(2.0), coarse_grid);
  const CoincidenceMap direct =
      coincidence_map_frequency(a, b, DetectionScheme::direct, false);
  const CoincidenceMap dichroic =
      coincidence_map_frequency(a, b, DetectionScheme::dichroic, false);
  CHECK(windowed_fidelity(direct, inf) < windowed_fidelity(dichroic, inf));
  CHECK(direct.total_probability() > 0.5 * dichroic.total_probability());
}

TEST_CASE("windowed efficiency grows from zero to one") {
  const EmissionRecord a = simulate_emission(generic_config(0.0), coarse_grid);
  const EmissionRecord b = simulate_emission(generic_config(2.0), coarse_grid);
  const CoincidenceMap map =
      coincidence_map_frequency(a, b, DetectionScheme::dichroic, false);
  const std::vector<double> windows = {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, inf};
  const auto results = window_aggregate(map, windows);
  CHECK(results.front().efficiency == 0.0);
  CHECK(results.back().efficiency == doctest::Approx(1.0).epsilon(1e-12));
  for (size_t k = 1; k < results.size(); ++k)
    CHECK(results[k].efficiency >= results[k - 1].efficiency);
  for (const WindowedResult& r : results) {
    CHECK(r.fidelity >= 0.0);
    CHECK(r.fidelity <= 1.0);
    CHECK(r.visibility >= 0.0);
    CHECK(r.visibility <= 1.0);
  }
}

TEST_CASE("maps are positive, bounded, and masked where empty") {
  const EmissionRecord a = simulate_emission(generic_config(0.3), coarse_grid);
  const EmissionRecord b = simulate_emission(generic_config(1.2), coarse_grid);
  const CoincidenceMap map =
      coincidence_map_frequency(a, b, DetectionScheme::dichroic, false);
  int masked = 0;
  for (size_t idx = 0; idx < map.p.size(); ++idx) {
    CHECK(map.p[idx] >= 0.0);
    CHECK(map.pf[idx] <= map.p[idx] * (1.0 + 1e-9) + 1e-15);
    if (std::isnan(map.f[idx])) {
      ++masked;
    } else {
      CHECK(map.f[idx] >= 0.0);
      CHECK(map.f[idx] <= 1.0);
    }
  }
  // t = t' = 0 has no amplitude yet, so at least the origin is masked.
  CHECK(std::isnan(map.f[0]));
  CHECK(masked < static_cast<int>(map.p.size()));
}

TEST_CASE("swapping the nodes changes nothing observable") {
  const EmissionRecord fa = simulate_emission(generic_config(0.3), coarse_grid);
  const EmissionRecord fb = simulate_emission(generic_config(1.2), coarse_grid);
  const CoincidenceMap mab =
      coincidence_map_frequency(fa, fb, DetectionScheme::dichroic, false);
  const CoincidenceMap mba =
      coincidence_map_frequency(fb, fa, DetectionScheme::dichroic, false);
  double scale = 0.0;
  for (double v : mab.p) scale = std::max(scale, v);
  for (size_t idx = 0; idx < mab.p.size(); ++idx)
    CHECK(std::abs(mab.p[idx] - mba.p[idx]) < 1e-12 * scale);

  const Encoding pe = Encoding::polarization;
  const EmissionRecord pa = simulate_emission(generic_config(0.2), coarse_grid, pe);
  const EmissionRecord pb = simulate_emission(generic_config(0.8), coarse_grid, pe);
  for (const double t : {1.0, inf}) {
    const auto rab = window_aggregate(coincidence_map_polarization(pa, pb, false), {t});
    const auto rba = window_aggregate(coincidence_map_polarization(pb, pa, false), {t});
    CHECK(rab.front().fidelity == doctest::Approx(rba.front().fidelity).epsilon(1e-9));
    CHECK(rab.front().efficiency == doctest::Approx(rba.front().efficiency).epsilon(1e-9));
    CHECK(rab.front().visibility == doctest::Approx(rba.front().visibility).epsilon(1e-9));
  }
}

TEST_CASE("a phase slipped into one node's blue channels moves the Bell phase, not the fidelity") {
  const double alpha = 0.7;
  const EmissionRecord a = simulate_emission(generic_config(0.0), coarse_grid);
  EmissionRecord b = a;
  const Complex rot(std::cos(alpha), std::sin(alpha));
  for (int c : {2, 3})
    for (Complex& v : b.wavepacket.channels[c]) v *= rot;

  const CoincidenceMap map =
      coincidence_map_frequency(a, b, DetectionScheme::dichroic, false);
  const auto r = window_aggregate(map, {inf}).front();
  CHECK(r.fidelity == doctest::Approx(1.0).epsilon(1e-6));
  // bell_coh picks up the conjugate of the blue-channel phase.
  CHECK(std::abs(std::remainder(r.bell_phase + alpha, two_pi)) < 1e-9);
  CHECK(std::abs(std::remainder(map.bell_phase + alpha, two_pi)) < 1e-9);
}

TEST_CASE("re-excitation can only degrade the asymptotic fidelity") {
  const EmissionRecord rec = simulate_emission(table_ca(), TimeGrid{0.0, 8.0, 769});
  const CoincidenceMap with =
      coincidence_map_frequency(rec, rec, DetectionScheme::dichroic, true);
  const CoincidenceMap without =
      coincidence_map_frequency(rec, rec, DetectionScheme::dichroic, false);
  const double f_with = windowed_fidelity(with, inf);
  const double f_without = windowed_fidelity(without, inf);
  // Identical nodes with common birefringence are perfect until the delayed
  // second photon is mixed in.
  CHECK(f_without > 0.99);
  CHECK(f_with < f_without - 1e-3);
}

TEST_CASE("hom visibility is one for twins and zero for strangers") {
  const EmissionRecord twin = simulate_emission(generic_config(0.5), coarse_grid);
  CHECK(hom_visibility(twin, twin, false) == doctest::Approx(1.0).epsilon(1e-9));

  const TimeGrid grid{0.0, 2.0, 513};
  const EmissionRecord early = gauss_record(grid, 0, 0.4, 0.35, 0.05, 0.0);
  const EmissionRecord late = gauss_record(grid, 0, 0.4, 1.55, 0.05, 0.0);
  CHECK(hom_visibility(early, late, false) < 1e-10);
}

TEST_CASE("hom visibility of pure wavepackets is the squared overlap") {
  const TimeGrid grid{0.0, 2.0, 513};
  const EmissionRecord u = gauss_record(grid, 0, 0.4, 0.80, 0.12, 0.0);
  const EmissionRecord v = gauss_record(grid, 0, 0.4, 0.95, 0.12, 2.1);
  const double nu = u.wavepacket.channel_norm(0);
  const double nv = v.wavepacket.channel_norm(0);
  const double want = grid_overlap_sq(u.wavepacket.channels[0],
                                      v.wavepacket.channels[0], grid, 0, 0) /
                      (nu * nv);
  CHECK(hom_visibility(u, v, false) == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("hom visibility of a delay mixture matches the overlap sum") {
  // Node A emits a two-component mixture: weight 0.7 undelayed, weight 0.3
  // delayed by an exact number of grid steps (a single spike in the delay
  // density). V = sum_s w_s |<u_s|v>|^2 / (N_A N_B).
  const TimeGrid grid{0.0, 2.0, 513};
  EmissionRecord a = gauss_record(grid, 0, 0.5, 0.55, 0.10, 1.3);
  const EmissionRecord b = gauss_record(grid, 0, 0.5, 0.70, 0.10, 0.0);
  const int shift = 64;
  a.pure_weight = 0.7;
  a.reexcitation_density.assign(grid.n, 0.0);
  a.reexcitation_density[shift] = 0.3 / grid.dt();

  const auto& ua = a.wavepacket.channels[0];
  const auto& ub = b.wavepacket.channels[0];
  const double na = a.wavepacket.channel_norm(0);  // delay preserves the norm
  const double nb = b.wavepacket.channel_norm(0);
  const double want = (0.7 * grid_overlap_sq(ua, ub, grid, 0, 0) +
                       0.3 * grid_overlap_sq(ua, ub, grid, shift, 0)) /
                      (na * nb);
  CHECK(hom_visibility(a, b, true) == doctest::Approx(want).epsilon(1e-9));
  // With the mixture ignored the visibility reverts to the pure overlap.
  const double pure = grid_overlap_sq(ua, ub, grid, 0, 0) / (na * nb);
  CHECK(hom_visibility(a, b, false) == doctest::Approx(pure).epsilon(1e-9));
}

TEST_CASE("coincidence maps reject inconsistent records") {
  const TimeGrid grid{0.0, 2.0, 257};
  const EmissionRecord pol =
      simulate_emission(generic_config(0.2), grid, Encoding::polarization);
  CHECK_THROWS_AS(coincidence_map_frequency(pol, pol, DetectionScheme::dichroic, false),
                  std::invalid_argument);
  CHECK_THROWS_AS(coincidence_map_polarization(
                      simulate_emission(generic_config(0.2), grid), pol, false),
                  std::invalid_argument);

  const EmissionRecord a = simulate_emission(generic_config(0.2), grid);
  const EmissionRecord other =
      simulate_emission(generic_config(0.2), TimeGrid{0.0, 2.0, 129});
  CHECK_THROWS_AS(coincidence_map_frequency(a, other, DetectionScheme::dichroic, false),
                  std::invalid_argument);

  EmissionRecord hot = gauss_record(grid, 0, 1.2, 0.8, 0.15, 0.0);
  CHECK_THROWS_AS(coincidence_map_frequency(hot, hot, DetectionScheme::dichroic, false),
                  std::invalid_argument);
}

TEST_CASE("window aggregation rejects bad windows and empty maps") {
  const EmissionRecord rec =
      simulate_emission(generic_config(0.0), TimeGrid{0.0, 2.0, 257});
  const CoincidenceMap map =
      coincidence_map_frequency(rec, rec, DetectionScheme::dichroic, false);
  CHECK_THROWS_AS(window_aggregate(map, {-0.5}), std::invalid_argument);
  CHECK_THROWS_AS(window_aggregate(map, {std::nan("")}), std::invalid_argument);

  CoincidenceMap zero;
  zero.grid_r = zero.grid_b = TimeGrid{0.0, 1.0, 4};
  zero.p.assign(16, 0.0);
  zero.bell_diag.assign(16, 0.0);
  zero.bell_coh.assign(16, Complex(0.0, 0.0));
  zero.hom_q.assign(16, 0.0);
  zero.hom_d.assign(16, 0.0);
  CHECK_THROWS_AS(window_aggregate(zero, {1.0}), std::invalid_argument);

  zero.grid_b = TimeGrid{0.0, 1.0, 5};
  CHECK_THROWS_AS(window_aggregate(zero, {1.0}), std::invalid_argument);
}
