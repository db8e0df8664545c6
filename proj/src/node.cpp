// Node-model builders: Hamiltonians, collapse channels, cavity geometry.
#include "cartsim/node.hpp"

#include <cmath>

namespace cartsim {

namespace {

constexpr double speed_of_light = 299792458.0;  // m/s

// Everything except the drive entries (0,1)/(1,0), which carry the only time
// dependence. `effective` adds the non-Hermitian widths (-i(gamma_ie +
// gamma_xe) on |e>, -i kappa on the photon channels).
ComplexMatrix static_part(const NodeConfig& cfg, Encoding enc, bool effective) {
  ComplexMatrix h = ComplexMatrix::Zero(basis_dim, basis_dim);
  h(idx_initial, idx_initial) = cfg.stark_shift();
  h(idx_excited, idx_excited) =
      Complex(-cfg.drive.delta1, effective ? -(cfg.gamma_ie + cfg.gamma_xe) : 0.0);

  // The atom emits H-polarized light on both branches: g1 into channel 2 and
  // g2 into channel 4 (|up,rH>/|down,bH> for frequency encoding, |up,H> and
  // |down,V> for polarization encoding, where the "down" photon's native
  // polarization is vertical and channel 4 is |down,V>).
  h(idx_excited, 2) = cfg.g1;
  h(2, idx_excited) = cfg.g1;
  h(idx_excited, 4) = cfg.g2;
  h(4, idx_excited) = cfg.g2;

  // Birefringence block in the (H, V) basis of one cavity resonance:
  //   [ delta_z          delta_x - i delta_y ]
  //   [ delta_x + i d_y  -delta_z            ]
  const std::array<double, 3> d = cfg.birefringence.components();
  const Complex off_hv(d[0], -d[1]);  // (H,V) entry
  const Complex off_vh(d[0], d[1]);
  // Two-tone rotating frame: the second resonance sits at Delta_2 - Delta_1.
  const double beat = cfg.drive.delta2 - cfg.drive.delta1;

  if (enc == Encoding::frequency) {
    // channels (2,3) = red (H,V); (4,5) = blue (H,V)
    h(2, 2) += d[2];
    h(3, 3) += -d[2];
    h(2, 3) = off_hv;
    h(3, 2) = off_vh;
    h(4, 4) += d[2] + beat;
    h(5, 5) += -d[2] + beat;
    h(4, 5) = off_hv;
    h(5, 4) = off_vh;
  } else {
    // channels (2,3) = up branch (H,V); (4,5) = down branch in (V,H) order,
    // which flips the block layout
    h(2, 2) += d[2];
    h(3, 3) += -d[2];
    h(2, 3) = off_hv;
    h(3, 2) = off_vh;
    h(4, 4) += -d[2] + beat;
    h(5, 5) += d[2] + beat;
    h(4, 5) = off_vh;
    h(5, 4) = off_hv;
  }

  if (effective)
    for (int c = 0; c < n_channels; ++c)
      h(idx_channel0 + c, idx_channel0 + c) += Complex(0.0, -cfg.kappa);
  return h;
}

Complex drive_amplitude_static(const DriveConfig& dr) {
  return dr.omega1 + dr.omega2 * std::exp(Complex(0.0, dr.theta));
}

TimeDependentOperator hamiltonian_with_drive(const NodeConfig& cfg, Encoding enc,
                                             bool effective) {
  ComplexMatrix h0 = static_part(cfg, enc, effective);
  const DriveConfig dr = cfg.drive;
  if (dr.omega2 == 0.0 || dr.is_monochromatic_equivalent()) {
    const Complex omega = drive_amplitude_static(dr);
    h0(idx_initial, idx_excited) = 0.5 * omega;
    h0(idx_excited, idx_initial) = 0.5 * std::conj(omega);
    return TimeDependentOperator::constant(std::move(h0));
  }
  // Matrix entries stay in 2*pi*MHz; only the beat phase needs the angular
  // conversion because it multiplies a time in us.
  const double beat = two_pi * (dr.delta2 - dr.delta1);
  return TimeDependentOperator(basis_dim, [h0, dr, beat](double t, ComplexMatrix& out) {
    out = h0;
    const Complex omega =
        dr.omega1 + dr.omega2 * std::exp(Complex(0.0, beat * t + dr.theta));
    out(idx_initial, idx_excited) = 0.5 * omega;
    out(idx_excited, idx_initial) = 0.5 * std::conj(omega);
  });
}

}  // namespace

std::array<double, 3> BirefringenceSpec::components() const {
  if (delta == 0.0) return {0.0, 0.0, 0.0};
  const double norm =
      std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (norm == 0.0)
    throw std::invalid_argument("BirefringenceSpec: axis must be nonzero when delta > 0");
  return {delta * axis[0] / norm, delta * axis[1] / norm, delta * axis[2] / norm};
}

void NodeConfig::validate() const {
  if (kappa < 0.0 || gamma_ie < 0.0 || gamma_xe < 0.0)
    throw std::invalid_argument("NodeConfig: decay rates must be nonnegative");
  if (birefringence.delta < 0.0)
    throw std::invalid_argument("NodeConfig: birefringence delta must be nonnegative");
  birefringence.components();  // checks the axis
  if (drive.omega1 != 0.0 && drive.delta1 == 0.0)
    throw std::invalid_argument("NodeConfig: drive tone 1 is on resonance (Delta_1 = 0)");
  if (drive.omega2 != 0.0 && drive.delta2 == 0.0)
    throw std::invalid_argument("NodeConfig: drive tone 2 is on resonance (Delta_2 = 0)");
}

double NodeConfig::stark_shift() const {
  double s = 0.0;
  if (drive.omega1 != 0.0) s += drive.omega1 * drive.omega1 / (4.0 * drive.delta1);
  if (drive.omega2 != 0.0) s += drive.omega2 * drive.omega2 / (4.0 * drive.delta2);
  return s;
}

GeometryDerived derive_geometry(const CavityGeometry& geom) {
  if (geom.length_mm <= 0.0 || geom.finesse <= 0.0 || geom.wavelength_nm <= 0.0 ||
      geom.curvature_mm <= 0.0)
    throw std::invalid_argument("CavityGeometry: length, curvature, finesse and wavelength must be positive");
  const double l = geom.length_mm * 1e-3;
  const double rc = geom.curvature_mm * 1e-3;
  const double stability = 2.0 * rc / l - 1.0;
  if (stability <= 0.0)
    throw std::invalid_argument("CavityGeometry: unstable resonator (2 R_c <= l)");

  GeometryDerived out;
  out.fsr = speed_of_light / (2.0 * l) / 1e6;  // MHz, quoted as 2*pi*MHz
  out.kappa = out.fsr / geom.finesse;
  const double lambda = geom.wavelength_nm * 1e-9;
  out.waist_um = std::sqrt(lambda * l / two_pi * std::sqrt(stability)) * 1e6;
  return out;
}

TimeDependentOperator build_effective_hamiltonian(const NodeConfig& cfg, Encoding enc) {
  cfg.validate();
  return hamiltonian_with_drive(cfg, enc, true);
}

LindbladGenerator build_lindblad_generator(const NodeConfig& cfg, Encoding enc) {
  cfg.validate();
  LindbladGenerator gen{hamiltonian_with_drive(cfg, enc, false), {}};

  auto lowering = [](int target, int source, double rate) {
    ComplexMatrix l = ComplexMatrix::Zero(basis_dim, basis_dim);
    l(target, source) = std::sqrt(2.0 * rate);
    return l;
  };

  if (cfg.gamma_ie > 0.0)
    gen.channels.push_back({lowering(idx_initial, idx_excited, cfg.gamma_ie), true});
  if (cfg.gamma_xe > 0.0)
    // Decay out of the lambda system: no refill, so only L^+L enters the
    // dynamics and the nominal target state is immaterial.
    gen.channels.push_back({lowering(idx_initial, idx_excited, cfg.gamma_xe), false});
  if (cfg.kappa > 0.0)
    for (int c = 0; c < n_channels; ++c)
      // Photon transmission through the mirror; likewise target-free.
      gen.channels.push_back({lowering(idx_initial, idx_channel0 + c, cfg.kappa), false});
  return gen;
}

}  // namespace cartsim
