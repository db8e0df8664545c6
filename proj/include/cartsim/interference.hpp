// Two-photon interference of the emissions from two nodes at a 50:50 beam
// splitter: coincidence probability densities, heralded atom-atom Bell
// fidelity, Hong-Ou-Mandel visibility, and aggregation over coincidence
// windows |t - t'| <= T.
#pragma once

#include <utility>
#include <vector>

#include "cartsim/emission.hpp"
#include "cartsim/types.hpp"

namespace cartsim {

// How the two photons behind the beam splitter are detected when they are
// frequency-encoded:
//   direct   - plain photodetectors, no frequency information; heralds on
//              cross-port clicks, which costs half the events (same-port
//              red-blue pairs are indistinguishable from same-frequency
//              pairs and must be discarded)
//   filtered - one polarization is filtered out before detection
//   dichroic - frequency-resolving (dichroic mirror per port), polarization
//              insensitive; every red-blue pair heralds
enum class DetectionScheme { direct = 1, filtered = 2, dichroic = 3 };

// Coincidence data on the product of the two detection-time axes. For
// frequency encoding the rows are the red-photon detection time t_r and the
// columns the blue-photon time t_b; for polarization encoding the axes are
// the H and V detection times. All arrays are row-major n_r x n_b.
//
// The overlap of the heralded two-atom state at one cell with the Bell state
// (|up,down> + e^{i chi}|down,up>)/sqrt(2) is
//
//   bell_diag(t, t') + Re[e^{-i chi} bell_coh(t, t')],
//
// where bell_diag is the chi-independent half (the |up,down> and |down,up>
// populations) and bell_coh the coherence between them. Aggregating a region
// keeps one chi for the whole mixed state, so the coherence adds as a complex
// sum before taking the modulus; relative phase drift of bell_coh across
// detection times is exactly the indistinguishability penalty.
//
//   p   coincidence probability density (1/us^2); integrates to the
//       heralding probability per attempt
//   f   per-cell fidelity (bell_diag + |bell_coh|) / p, chi optimized cell by
//       cell; NaN where p is below mask_threshold * max(p)
//   pf  the raw per-cell numerator bell_diag + |bell_coh| (f is the masked
//       ratio view)
//
// hom_q / hom_d are the same-frequency cross-port coincidence densities with
// quantum interference on / with the photons treated as distinguishable;
// their ratio gives the Hong-Ou-Mandel visibility.
struct CoincidenceMap {
  TimeGrid grid_r;
  TimeGrid grid_b;
  Encoding encoding = Encoding::frequency;
  DetectionScheme scheme = DetectionScheme::dichroic;
  bool reexcitation = false;

  std::vector<double> p;
  std::vector<double> f;
  std::vector<double> pf;
  std::vector<double> bell_diag;
  std::vector<Complex> bell_coh;
  std::vector<double> hom_q;
  std::vector<double> hom_d;

  // chi of the optimized Bell state, reported at the peak of p.
  double bell_phase = 0.0;

  static constexpr double mask_threshold = 1e-15;

  int rows() const { return grid_r.n; }
  int cols() const { return grid_b.n; }
  double at_p(int ir, int ib) const { return p[static_cast<size_t>(ir) * grid_b.n + ib]; }
  double at_f(int ir, int ib) const { return f[static_cast<size_t>(ir) * grid_b.n + ib]; }

  // Trapezoid double integral of p over the whole map.
  double total_probability() const;
};

// Efficiency / fidelity / visibility of heralding restricted to coincidences
// with |t - t'| <= window.
struct WindowedResult {
  double window = 0.0;      // us; infinity selects the whole map
  double efficiency = 0.0;  // windowed fraction of all coincidences
  double fidelity = 0.0;    // overlap with the best single Bell state
  double visibility = 0.0;  // 1 - windowed hom_q / hom_d
  double bell_phase = 0.0;  // chi of that Bell state
};

// 50:50 beam splitter, input ports a/b to output ports c/d, applied per mode
// label: a -> (c - d)/sqrt(2), b -> (c + d)/sqrt(2).
std::pair<Complex, Complex> beam_splitter_transform(Complex a, Complex b);
std::pair<std::vector<Complex>, std::vector<Complex>> beam_splitter_transform(
    const std::vector<Complex>& a, const std::vector<Complex>& b);

// Coincidence map for frequency-encoded photons under the given detection
// scheme. include_reexcitation folds each node's re-excitation delay
// distribution into every two-time correlator (separable convolutions per
// node, evaluated diagonal-by-diagonal with FFTs).
CoincidenceMap coincidence_map_frequency(const EmissionRecord& rec_a,
                                         const EmissionRecord& rec_b,
                                         DetectionScheme scheme,
                                         bool include_reexcitation);

// Coincidence map for polarization-encoded photons (one click in each
// polarization behind the beam splitter, same output port or not). The
// heralded state keeps the birefringence-induced |up,up> and |down,down>
// admixtures, which is what degrades F away from delta = 0.
CoincidenceMap coincidence_map_polarization(const EmissionRecord& rec_a,
                                            const EmissionRecord& rec_b,
                                            bool include_reexcitation);

// Aggregates a map over a list of coincidence windows (us). Requires the two
// axes to share one grid. The windowed fidelity keeps one chi for the whole
// window (complex coherence sum, modulus last), so it is the overlap of the
// full windowed mixture with a single Bell state rather than the mean of the
// per-cell fidelities. T = 0 has zero efficiency (measure-zero diagonal)
// but reports the T -> 0+ limits of fidelity and visibility.
std::vector<WindowedResult> window_aggregate(const CoincidenceMap& map,
                                             const std::vector<double>& windows);

// Hong-Ou-Mandel visibility V = 1 - C_quantum / C_distinguishable of the
// whole emission, where C is the total same-frequency cross-port coincidence
// probability with interference on versus with the two photons fully
// distinguishable. Throws when the distinguishable rate is zero.
double hom_visibility(const EmissionRecord& rec_a, const EmissionRecord& rec_b,
                      bool include_reexcitation);

}  // namespace cartsim
