// Photon emission from a single node: integrates the node dynamics, extracts
// the output wavepacket per channel, and along with it the re-excitation
// delay distribution and the probability bookkeeping an interference
// calculation needs.
#pragma once

#include <array>
#include <string>
#include <vector>

#include "cartsim/node.hpp"
#include "cartsim/types.hpp"

namespace cartsim {

// Output-field amplitudes phi_c(t) = sqrt(2 kappa) <c|psi(t)>, with kappa
// converted to rad/us, sampled on the grid for each of the four photon
// channels. |phi_c(t)|^2 is a detection-rate density (1/us) and
// integral |phi_c|^2 dt is the probability the photon leaves in channel c,
// so channel_norm sums to the total emission probability.
struct Wavepacket {
  TimeGrid grid;
  Encoding encoding = Encoding::frequency;
  std::array<std::vector<Complex>, n_channels> channels;

  double channel_norm(int c) const;
  double total_norm() const;
};

// Everything simulate_emission learns about one attempt.
//
// The atom can scatter |e> -> |i> and be re-excited, so the emitted photon
// is a mixture: with probability pure_weight the emission happened on the
// first pass (amplitude phi_c(t)), and with density
// reexcitation_density(s) * ds the whole wavepacket is delayed by s
// (phi_c(t - s), incoherent between different s). reexcitation_density is
// sampled on delay_grid (same spacing as wavepacket.grid, starting at 0) and
// pure_weight + integral reexcitation_density ds = 1. First-order treatment:
// a single re-excitation delay, accurate for small gamma_ie.
struct EmissionRecord {
  Wavepacket wavepacket;
  TimeGrid delay_grid;
  std::vector<double> reexcitation_density;
  double pure_weight = 1.0;

  // Probability bookkeeping, summing to 1 with the population still inside
  // the node at the end of the grid:
  double emitted_pure = 0.0;   // photon out, no scattering ever (= wavepacket norm)
  double emitted_total = 0.0;  // photon out, with or without prior |e>->|i> scattering
  double xe_loss = 0.0;        // atom decayed out of the lambda system
  double unreleased = 0.0;     // excitation still inside the node at t1

  bool grid_truncated = false;  // emission had not finished by grid.t1
  std::string warning;          // human-readable note when grid_truncated
};

// Runs one emission attempt: |psi(0)> = |i>, evolve under the effective
// Hamiltonian of cfg, extract the four channel wavepackets, and (when
// gamma_ie > 0) evolve the master equation as well to get the re-excitation
// delay distribution P(s) proportional to the scatter rate
// 2 gamma_ie <e|rho(s)|e>. When gamma_ie == 0 the master-equation pass is
// skipped and the record is exact.
//
// Warns (record.warning, record.grid_truncated) when a non-negligible
// excitation remains at grid.t1; callers that control the grid should extend
// it and re-run.
EmissionRecord simulate_emission(const NodeConfig& cfg, const TimeGrid& grid,
                                 Encoding enc = Encoding::frequency,
                                 const IntegratorOptions& opt = {});

// Two-time channel correlator of the emitted (mixed) field,
//   K_{c,c'}(t, t') = pure_weight * phi_c(t) conj(phi_c'(t'))
//                   + integral P(s) phi_c(t-s) conj(phi_c'(t'-s)) ds,
// the quantity two-photon coincidence rates are built from. phi_c is read
// from rec_a and phi_c' from rec_b; the delay distribution (pure_weight and
// P) is rec_a's, so the usual per-node correlator is
// mixed_channel_correlator(rec, rec, ...). Both records must share the same
// grid. Evaluates one (t, t') point by quadrature over P with linear
// interpolation of the shifted wavepackets; the map-level routines in the
// interference module compute whole diagonals of K at once by FFT instead
// of calling this in a loop.
Complex mixed_channel_correlator(const EmissionRecord& rec_a,
                                 const EmissionRecord& rec_b, int c,
                                 int c_prime, double t, double t_prime);

}  // namespace cartsim
