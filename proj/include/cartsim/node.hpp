// Single-node model: the atom-cavity level structure, its effective
// Hamiltonian and Lindblad generator, and cavity geometry relations.
//
// The node is a six-level system in the rotating frame: the atom starts in
// |i>, a bichromatic Raman drive couples |i> to the excited state |e>
// (far off resonance, detunings Delta_1/Delta_2), and |e> decays through two
// cavity-enhanced channels into the final qubit states |up>/|down>, emitting
// one photon whose frequency (red/blue) or polarization (H/V) is entangled
// with the qubit. Mirror birefringence splits and mixes the two polarization
// eigenmodes of each cavity resonance; kappa takes photons out through the
// mirror.
//
// Unit convention: every rate/frequency parameter below is quoted in
// 2*pi*MHz (the numbers hardware tables list). Builders return matrices in
// the same convention; the propagation layer multiplies by 2*pi once to get
// angular frequencies in rad/us.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "cartsim/propagators.hpp"
#include "cartsim/types.hpp"

namespace cartsim {

// Mirror birefringence of one cavity resonance. The polarization eigenmodes
// are split by 2*delta and lie along +-axis on the Poincare sphere;
// axis = (1,0,0) means linear eigenmodes at 45 degrees to H/V (maximal H<->V
// mixing), axis = (0,0,1) means H/V themselves are the eigenmodes (pure
// splitting, no mixing).
struct BirefringenceSpec {
  double delta = 0.0;                        // half-splitting, 2*pi*MHz
  std::array<double, 3> axis = {1.0, 0.0, 0.0};

  // Cartesian components delta * axis / |axis|; zero vector if delta == 0.
  std::array<double, 3> components() const;
};

// Bichromatic Raman drive Omega(t) = Omega_1 + Omega_2 exp(i[(Delta_2-Delta_1)t + theta]).
// With Delta_1 == Delta_2 the two tones merge into one constant drive.
struct DriveConfig {
  double omega1 = 0.0;   // 2*pi*MHz
  double omega2 = 0.0;   // 2*pi*MHz
  double delta1 = 0.0;   // detuning of tone 1 from |i> -> |e>, 2*pi*MHz
  double delta2 = 0.0;   // detuning of tone 2, 2*pi*MHz
  double theta = 0.0;    // relative phase of tone 2, rad

  bool is_monochromatic_equivalent() const { return delta1 == delta2; }
};

// Full parameter set of one node.
struct NodeConfig {
  DriveConfig drive;
  double g1 = 0.0;        // cavity coupling on the "up" branch, 2*pi*MHz
  double g2 = 0.0;        // cavity coupling on the "down" branch, 2*pi*MHz
  double kappa = 0.0;     // cavity field decay rate, 2*pi*MHz
  double gamma_ie = 0.0;  // |e> -> |i> spontaneous decay (recycled), 2*pi*MHz
  double gamma_xe = 0.0;  // |e> -> outside decay (lost), 2*pi*MHz
  BirefringenceSpec birefringence;

  // Throws std::invalid_argument on unphysical values (negative rates,
  // a drive tone with zero detuning, ...).
  void validate() const;

  // Second-order light shift of |i> from both drive tones, 2*pi*MHz.
  double stark_shift() const;
};

// Near-concentric (or general two-mirror symmetric) cavity geometry.
struct CavityGeometry {
  double length_mm = 0.0;        // mirror separation l
  double curvature_mm = 0.0;     // mirror radius of curvature R_c
  double finesse = 0.0;
  double wavelength_nm = 0.0;    // of the photon the cavity supports
};

struct GeometryDerived {
  double fsr = 0.0;       // free spectral range, 2*pi*MHz (c / 2l as a frequency)
  double kappa = 0.0;     // field decay rate FSR / (2 F)... see derive_geometry
  double waist_um = 0.0;  // TEM00 mode waist at the cavity center
};

// fsr = c/(2l) quoted in 2*pi*MHz; kappa = fsr / finesse (the full cavity
// linewidth is fsr/F and kappa is its half, but in the field-decay
// convention used throughout both halvings cancel: l = 0.493 mm, F = 5e4
// gives kappa = 6.08 in 2*pi*MHz). The waist obeys
// w0^2 = (lambda l / 2 pi) sqrt(2 R_c / l - 1). Throws
// std::invalid_argument for geometrically unstable configurations
// (2 R_c <= l).
GeometryDerived derive_geometry(const CavityGeometry& geom);

// Effective (non-Hermitian) single-excitation Hamiltonian of one node in the
// basis of types.hpp, in 2*pi*MHz. Row/column 1 (|e>) carries the full
// excited-state width -i(gamma_ie + gamma_xe); rows 2..5 carry -i*kappa.
// For Encoding::frequency the four photon channels are |up,rH>, |up,rV>,
// |down,bH>, |down,bV> and each frequency pair gets the birefringence block;
// for Encoding::polarization the channels are |up,H>, |up,V>, |down,V>,
// |down,H> sharing a single frequency.
TimeDependentOperator build_effective_hamiltonian(const NodeConfig& cfg,
                                                  Encoding enc = Encoding::frequency);

// Hermitian Hamiltonian plus collapse channels of the same node, suitable for
// propagate_lindblad. The channels are: |e> -> |i> at 2*gamma_ie (refill:
// population returns to |i> and can be re-excited), |e> -> outside at
// 2*gamma_xe (no refill) and one photon-loss channel per cavity mode at
// 2*kappa (no refill). Consistency: hamiltonian - (i/2) sum L^+ L equals
// build_effective_hamiltonian for the same config.
struct LindbladGenerator {
  TimeDependentOperator hamiltonian;
  std::vector<CollapseChannel> channels;
};

LindbladGenerator build_lindblad_generator(const NodeConfig& cfg,
                                           Encoding enc = Encoding::frequency);

}  // namespace cartsim
