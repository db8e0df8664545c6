// Two-photon interference: coincidence maps, Bell fidelity, HOM visibility,
// coincidence-window aggregation.
//
// All two-time quantities reduce to per-node correlators
//   K_{c,c'}(t, t') = pw phi_c(t) phi_c'(t')^*
//                   + integral P(s) phi_c(t-s) phi_c'(t'-s)^* ds
// Because the delay s shifts both times together, K is a 1-D causal
// convolution along every diagonal t - t' = const, which is evaluated with
// FFTs; without re-excitation K collapses to the plain product and the maps
// assemble from outer products.
#include "cartsim/interference.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>

namespace cartsim {

namespace {

double trapezoid_weight(int k, int n) { return (k == 0 || k == n - 1) ? 0.5 : 1.0; }

// FFTW plan creation/destruction is not thread-safe (execution on distinct
// buffers is); sweep cells build maps concurrently.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

// Causal discrete convolutions out[j] = sum_{k<=j} p[k] v[j-k] by
// zero-padded FFT. Caches plans per transform size and the transform of the
// delay density per size; one instance serves one map build.
class FftConvolver {
 public:
  FftConvolver() = default;
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  ~FftConvolver() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    for (auto& [m, pl] : plans_) {
      fftw_destroy_plan(pl.fwd);
      fftw_destroy_plan(pl.inv);
      fftw_free(pl.in);
      fftw_free(pl.freq);
    }
  }

  // p and v are read on [0, len); out gets the first len convolution values.
  void causal_convolve(const std::vector<double>& p, const Complex* v, int len,
                       Complex* out) {
    const int m = transform_size(len);
    Plans& pl = plans_for(m);
    const std::vector<Complex>& pf = density_fft(p, m, pl);
    std::copy(v, v + len, pl.in);
    std::fill(pl.in + len, pl.in + m, Complex(0.0, 0.0));
    fftw_execute(pl.fwd);
    const double scale = 1.0 / m;
    for (int i = 0; i < m; ++i) pl.freq[i] *= pf[i] * scale;
    fftw_execute(pl.inv);
    std::copy(pl.in, pl.in + len, out);
  }

 private:
  struct Plans {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
    Complex* in = nullptr;
    Complex* freq = nullptr;
  };

  // Power of two with at least half the transform zero, so the circular
  // convolution never wraps into the used range.
  static int transform_size(int len) {
    int m = 32;
    while (m < 2 * len) m <<= 1;
    return m;
  }

  Plans& plans_for(int m) {
    auto it = plans_.find(m);
    if (it != plans_.end()) return it->second;
    Plans pl;
    {
      std::lock_guard<std::mutex> lock(fftw_mutex());
      pl.in = static_cast<Complex*>(fftw_malloc(sizeof(fftw_complex) * m));
      pl.freq = static_cast<Complex*>(fftw_malloc(sizeof(fftw_complex) * m));
      pl.fwd = fftw_plan_dft_1d(m, reinterpret_cast<fftw_complex*>(pl.in),
                                reinterpret_cast<fftw_complex*>(pl.freq),
                                FFTW_FORWARD, FFTW_ESTIMATE);
      pl.inv = fftw_plan_dft_1d(m, reinterpret_cast<fftw_complex*>(pl.freq),
                                reinterpret_cast<fftw_complex*>(pl.in),
                                FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    return plans_.emplace(m, pl).first->second;
  }

  const std::vector<Complex>& density_fft(const std::vector<double>& p, int m,
                                          Plans& pl) {
    const auto key = std::make_pair(p.data(), m);
    auto it = density_ffts_.find(key);
    if (it != density_ffts_.end()) return it->second;
    const int keep = std::min(static_cast<int>(p.size()), m / 2);
    for (int k = 0; k < keep; ++k) pl.in[k] = Complex(p[k], 0.0);
    std::fill(pl.in + keep, pl.in + m, Complex(0.0, 0.0));
    fftw_execute(pl.fwd);
    return density_ffts_.emplace(key, std::vector<Complex>(pl.freq, pl.freq + m))
        .first->second;
  }

  std::map<int, Plans> plans_;
  std::map<std::pair<const double*, int>, std::vector<Complex>> density_ffts_;
};

// Per-node ingredients of a map build.
struct NodeData {
  TimeGrid grid;
  int n = 0;
  double dt = 0.0;
  double pw = 1.0;                            // pure weight (1 when reex off)
  bool reex = false;
  const std::vector<double>* density = nullptr;
  std::array<const std::vector<Complex>*, n_channels> u{};  // amplitudes
  std::array<std::vector<double>, n_channels> nrate;        // mixed |phi|^2
  std::array<bool, n_channels> empty{};
};

NodeData make_node_data(const EmissionRecord& rec, bool include_reex,
                        FftConvolver& fft) {
  NodeData nd;
  nd.grid = rec.wavepacket.grid;
  nd.n = nd.grid.n;
  nd.dt = nd.grid.dt();

  double density_weight = 0.0;
  for (double v : rec.reexcitation_density) density_weight += v;
  nd.reex = include_reex && density_weight > 0.0;
  if (nd.reex) {
    nd.pw = rec.pure_weight;
    nd.density = &rec.reexcitation_density;
  }

  std::vector<Complex> scratch(nd.n);
  for (int c = 0; c < n_channels; ++c) {
    nd.u[c] = &rec.wavepacket.channels[c];
    nd.nrate[c].resize(nd.n);
    double peak = 0.0;
    for (int k = 0; k < nd.n; ++k) {
      const double a = std::abs((*nd.u[c])[k]);
      nd.nrate[c][k] = a * a;
      peak = std::max(peak, a);
    }
    nd.empty[c] = peak == 0.0;
    if (nd.reex && !nd.empty[c]) {
      // n_c(t) = K_cc(t,t) = pw |phi_c(t)|^2 + (P * |phi_c|^2)(t)
      for (int k = 0; k < nd.n; ++k) scratch[k] = Complex(nd.nrate[c][k], 0.0);
      std::vector<Complex> conv(nd.n);
      fft.causal_convolve(*nd.density, scratch.data(), nd.n, conv.data());
      for (int k = 0; k < nd.n; ++k)
        nd.nrate[c][k] = nd.pw * nd.nrate[c][k] + nd.dt * conv[k].real();
    }
  }
  return nd;
}

bool same_records(const EmissionRecord& a, const EmissionRecord& b) {
  if (&a == &b) return true;
  if (!(a.wavepacket.grid == b.wavepacket.grid)) return false;
  if (a.pure_weight != b.pure_weight) return false;
  if (a.reexcitation_density != b.reexcitation_density) return false;
  for (int c = 0; c < n_channels; ++c)
    if (a.wavepacket.channels[c] != b.wavepacket.channels[c]) return false;
  return true;
}

// K_{c_row, c_col} along the diagonal i = j + d: out[j], j in [0, n).
// src arrays may be the amplitudes or the envelopes.
void corr_diag(const NodeData& nd, const std::vector<Complex>& row,
               const std::vector<Complex>& col, bool row_empty, bool col_empty,
               int d, std::vector<Complex>& scratch, std::vector<Complex>& out,
               FftConvolver& fft) {
  const int n = nd.n;
  out.assign(n, Complex(0.0, 0.0));
  if (row_empty || col_empty) return;
  scratch.resize(n);
  const int j_lo = std::max(0, -d);
  const int j_hi = std::min(n - 1, n - 1 - d);
  for (int j = 0; j < n; ++j)
    scratch[j] = (j >= j_lo && j <= j_hi) ? row[j + d] * std::conj(col[j])
                                          : Complex(0.0, 0.0);
  if (!nd.reex) {
    out = scratch;
    return;
  }
  fft.causal_convolve(*nd.density, scratch.data(), n, out.data());
  for (int j = 0; j < n; ++j) out[j] = nd.pw * scratch[j] + nd.dt * out[j];
}

void check_pair(const EmissionRecord& rec_a, const EmissionRecord& rec_b,
                Encoding expected) {
  if (!(rec_a.wavepacket.grid == rec_b.wavepacket.grid))
    throw std::invalid_argument("coincidence map: records on different grids");
  if (rec_a.wavepacket.encoding != expected || rec_b.wavepacket.encoding != expected)
    throw std::invalid_argument("coincidence map: record encoding does not match the requested map");
  // Catches genuinely unnormalized inputs; the slack covers trapezoid
  // quadrature of legitimate records on coarse grids.
  for (const EmissionRecord* r : {&rec_a, &rec_b}) {
    if (r->wavepacket.total_norm() > 1.0 + 1e-2)
      throw std::invalid_argument("coincidence map: wavepacket norm exceeds 1 (unnormalized record)");
  }
}

// Tiny negative rounding residue from the interference cross terms is
// floored to zero; anything larger is a genuine bug and stays visible.
void clamp_roundoff(std::vector<double>& a) {
  double peak = 0.0;
  for (double v : a) peak = std::max(peak, std::abs(v));
  const double floor = -1e-12 * peak;
  for (double& v : a)
    if (v < 0.0 && v >= floor) v = 0.0;
}

void finalize_map(CoincidenceMap& map) {
  clamp_roundoff(map.p);
  clamp_roundoff(map.hom_q);

  double peak = 0.0;
  size_t peak_idx = 0;
  for (size_t idx = 0; idx < map.p.size(); ++idx) {
    if (map.p[idx] > peak) {
      peak = map.p[idx];
      peak_idx = idx;
    }
  }

  map.pf.resize(map.p.size());
  map.f.assign(map.p.size(), std::numeric_limits<double>::quiet_NaN());
  const double threshold = CoincidenceMap::mask_threshold * peak;
  for (size_t idx = 0; idx < map.p.size(); ++idx) {
    map.pf[idx] = map.bell_diag[idx] + std::abs(map.bell_coh[idx]);
    if (map.p[idx] > threshold && map.p[idx] > 0.0)
      map.f[idx] = std::min(map.pf[idx] / map.p[idx], 1.0);
  }

  const Complex coh_peak = peak > 0.0 ? map.bell_coh[peak_idx] : Complex(0.0, 0.0);
  map.bell_phase = coh_peak == Complex(0.0, 0.0) ? 0.0 : std::arg(coh_peak);
}

}  // namespace

std::pair<Complex, Complex> beam_splitter_transform(Complex a, Complex b) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  return {(a + b) * inv_sqrt2, (b - a) * inv_sqrt2};
}

std::pair<std::vector<Complex>, std::vector<Complex>> beam_splitter_transform(
    const std::vector<Complex>& a, const std::vector<Complex>& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("beam_splitter_transform: port arrays differ in length");
  std::pair<std::vector<Complex>, std::vector<Complex>> out;
  out.first.resize(a.size());
  out.second.resize(a.size());
  for (size_t k = 0; k < a.size(); ++k) {
    const auto [c, d] = beam_splitter_transform(a[k], b[k]);
    out.first[k] = c;
    out.second[k] = d;
  }
  return out;
}

double CoincidenceMap::total_probability() const {
  const int nr = grid_r.n, nb = grid_b.n;
  const double cell = grid_r.dt() * grid_b.dt();
  double sum = 0.0;
  for (int i = 0; i < nr; ++i) {
    const double wi = trapezoid_weight(i, nr);
    for (int j = 0; j < nb; ++j)
      sum += wi * trapezoid_weight(j, nb) * p[static_cast<size_t>(i) * nb + j];
  }
  return sum * cell;
}

CoincidenceMap coincidence_map_frequency(const EmissionRecord& rec_a,
                                         const EmissionRecord& rec_b,
                                         DetectionScheme scheme,
                                         bool include_reexcitation) {
  check_pair(rec_a, rec_b, Encoding::frequency);
  FftConvolver fft;
  const NodeData a = make_node_data(rec_a, include_reexcitation, fft);
  const bool identical = same_records(rec_a, rec_b);
  const NodeData b_own = identical ? NodeData{} : make_node_data(rec_b, include_reexcitation, fft);
  const NodeData& b = identical ? a : b_own;

  const int n = a.n;
  const size_t cells = static_cast<size_t>(n) * n;
  CoincidenceMap map;
  map.grid_r = map.grid_b = a.grid;
  map.encoding = Encoding::frequency;
  map.scheme = scheme;
  map.reexcitation = include_reexcitation;
  map.p.assign(cells, 0.0);
  map.bell_diag.assign(cells, 0.0);
  map.bell_coh.assign(cells, Complex(0.0, 0.0));
  map.hom_q.assign(cells, 0.0);
  map.hom_d.assign(cells, 0.0);

  const bool filtered = scheme == DetectionScheme::filtered;

  // 1-D totals: per-frequency detection rates, with the filtered scheme
  // passing only the H component into the heralding rates.
  std::vector<double> na_r(n, 0.0), na_b(n, 0.0), nb_r(n, 0.0), nb_b(n, 0.0);
  std::vector<double> ha_r(n, 0.0), ha_b(n, 0.0), hb_r(n, 0.0), hb_b(n, 0.0);
  for (int k = 0; k < n; ++k) {
    ha_r[k] = a.nrate[0][k] + a.nrate[1][k];
    ha_b[k] = a.nrate[2][k] + a.nrate[3][k];
    hb_r[k] = b.nrate[0][k] + b.nrate[1][k];
    hb_b[k] = b.nrate[2][k] + b.nrate[3][k];
    na_r[k] = filtered ? a.nrate[0][k] : ha_r[k];
    na_b[k] = filtered ? a.nrate[2][k] : ha_b[k];
    nb_r[k] = filtered ? b.nrate[0][k] : hb_r[k];
    nb_b[k] = filtered ? b.nrate[2][k] : hb_b[k];
  }

  // Separable parts: p (its half is the chi-independent Bell weight), and
  // the no-interference part of the HOM rates (which always see both
  // polarizations; the same-frequency rates are not filtered).
  for (int i = 0; i < n; ++i) {
    double* prow = map.p.data() + static_cast<size_t>(i) * n;
    double* bdrow = map.bell_diag.data() + static_cast<size_t>(i) * n;
    double* hqrow = map.hom_q.data() + static_cast<size_t>(i) * n;
    double* hdrow = map.hom_d.data() + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double pv = na_r[i] * nb_b[j] + na_b[j] * nb_r[i];
      prow[j] = pv;
      bdrow[j] = 0.5 * pv;
      const double hd = 0.25 * (ha_r[i] * hb_r[j] + ha_r[j] * hb_r[i] +
                                ha_b[i] * hb_b[j] + ha_b[j] * hb_b[i]);
      hdrow[j] = hd;
      hqrow[j] = hd;
    }
  }

  // Diagonal pass: cross-node correlator products for the Bell coherence
  //   coh(t_r, t_b) = sum_xy K^A_{rx,by}(t_r, t_b)^* K^B_{rx,by}(t_r, t_b)
  // and complex correlators for the HOM suppression term.
  std::vector<Complex> scratch(n), ca(n), cb(n);
  // coherence pairs (red x, blue y); filtered keeps only (H, H)
  const int pair_lim = filtered ? 1 : 2;
  for (int d = -(n - 1); d <= n - 1; ++d) {
    const int j_lo = std::max(0, -d);
    const int j_hi = std::min(n - 1, n - 1 - d);

    for (int x = 0; x < pair_lim; ++x) {
      for (int y = 0; y < pair_lim; ++y) {
        corr_diag(a, *a.u[x], *a.u[2 + y], a.empty[x], a.empty[2 + y], d,
                  scratch, ca, fft);
        if (identical) {
          cb = ca;
        } else {
          corr_diag(b, *b.u[x], *b.u[2 + y], b.empty[x], b.empty[2 + y], d,
                    scratch, cb, fft);
        }
        for (int j = j_lo; j <= j_hi; ++j)
          map.bell_coh[static_cast<size_t>(j + d) * n + j] += std::conj(ca[j]) * cb[j];
      }
    }

    // HOM: same-frequency pairs (f x, f y); the (V, H) term is the (H, V)
    // term of the transposed cell and is accumulated there.
    for (int f = 0; f < 2; ++f) {
      const int c0 = 2 * f, c1 = 2 * f + 1;
      const int combos[3][2] = {{c0, c0}, {c1, c1}, {c0, c1}};
      for (const auto& combo : combos) {
        const int cr = combo[0], cc = combo[1];
        corr_diag(a, *a.u[cr], *a.u[cc], a.empty[cr], a.empty[cc], d, scratch, ca, fft);
        if (identical) {
          cb = ca;
        } else {
          corr_diag(b, *b.u[cr], *b.u[cc], b.empty[cr], b.empty[cc], d, scratch, cb, fft);
        }
        const bool cross = cr != cc;
        for (int j = j_lo; j <= j_hi; ++j) {
          const double term = 0.5 * (ca[j] * std::conj(cb[j])).real();
          map.hom_q[static_cast<size_t>(j + d) * n + j] -= term;
          if (cross) map.hom_q[static_cast<size_t>(j) * n + (j + d)] -= term;
        }
      }
    }
  }

  if (scheme == DetectionScheme::direct) {
    // Plain detectors: both time orders of the red-blue pattern land on the
    // same cross-port click pair, same-port pairs are discarded (halving the
    // heralding rate for distinguishable frequencies), and same-frequency
    // cross-port pairs are false heralds that dilute the fidelity (they
    // herald |up,up> or |down,down> and contribute nothing to the Bell
    // weight).
    std::vector<double> p3 = map.p, bd3 = map.bell_diag;
    std::vector<Complex> coh3 = map.bell_coh;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const size_t ij = static_cast<size_t>(i) * n + j;
        const size_t ji = static_cast<size_t>(j) * n + i;
        map.p[ij] = 0.25 * (p3[ij] + p3[ji]) + map.hom_q[ij];
        map.bell_diag[ij] = 0.25 * (bd3[ij] + bd3[ji]);
        map.bell_coh[ij] = 0.25 * (coh3[ij] + coh3[ji]);
      }
    }
  }

  finalize_map(map);
  return map;
}

CoincidenceMap coincidence_map_polarization(const EmissionRecord& rec_a,
                                            const EmissionRecord& rec_b,
                                            bool include_reexcitation) {
  check_pair(rec_a, rec_b, Encoding::polarization);
  FftConvolver fft;
  const NodeData a = make_node_data(rec_a, include_reexcitation, fft);
  const bool identical = same_records(rec_a, rec_b);
  const NodeData b_own = identical ? NodeData{} : make_node_data(rec_b, include_reexcitation, fft);
  const NodeData& b = identical ? a : b_own;

  const int n = a.n;
  const size_t cells = static_cast<size_t>(n) * n;
  CoincidenceMap map;
  map.grid_r = map.grid_b = a.grid;  // rows: H detection time, cols: V
  map.encoding = Encoding::polarization;
  map.scheme = DetectionScheme::dichroic;
  map.reexcitation = include_reexcitation;
  map.p.assign(cells, 0.0);
  map.bell_diag.assign(cells, 0.0);
  map.bell_coh.assign(cells, Complex(0.0, 0.0));
  map.hom_q.assign(cells, 0.0);
  map.hom_d.assign(cells, 0.0);

  // Channel layout: 0 = up/H, 1 = up/V, 2 = down/V, 3 = down/H; the second
  // letter is the detected polarization.
  std::vector<double> na_h(n), na_v(n), nb_h(n), nb_v(n);
  for (int k = 0; k < n; ++k) {
    na_h[k] = a.nrate[0][k] + a.nrate[3][k];
    na_v[k] = a.nrate[1][k] + a.nrate[2][k];
    nb_h[k] = b.nrate[0][k] + b.nrate[3][k];
    nb_v[k] = b.nrate[1][k] + b.nrate[2][k];
  }

  // Equal-time cross-branch correlators entering the Bell coherence.
  auto equal_time_corr = [&](const NodeData& nd, int c, int cp, std::vector<Complex>& out) {
    out.assign(n, Complex(0.0, 0.0));
    if (nd.empty[c] || nd.empty[cp]) return;
    std::vector<Complex> v(n);
    for (int k = 0; k < n; ++k) v[k] = (*nd.u[c])[k] * std::conj((*nd.u[cp])[k]);
    if (!nd.reex) {
      out = v;
      return;
    }
    fft.causal_convolve(*nd.density, v.data(), n, out.data());
    for (int k = 0; k < n; ++k) out[k] = nd.pw * v[k] + nd.dt * out[k];
  };
  std::vector<Complex> da1, db1, da2, db2;
  equal_time_corr(a, 0, 3, da1);  // up/H with down/H at t_H
  equal_time_corr(b, 2, 1, db1);  // down/V with up/V at t_V
  equal_time_corr(a, 1, 2, da2);  // up/V with down/V at t_V
  equal_time_corr(b, 3, 0, db2);  // down/H with up/H at t_H

  // Separable parts of p and the HOM rates.
  for (int i = 0; i < n; ++i) {
    double* prow = map.p.data() + static_cast<size_t>(i) * n;
    double* hqrow = map.hom_q.data() + static_cast<size_t>(i) * n;
    double* hdrow = map.hom_d.data() + static_cast<size_t>(i) * n;
    const double nta = na_h[i] + na_v[i];
    for (int j = 0; j < n; ++j) {
      prow[j] = na_h[i] * nb_v[j] + na_v[j] * nb_h[i];
      const double ntb = nb_h[j] + nb_v[j];
      const double hd = 0.25 * (nta * ntb + (na_h[j] + na_v[j]) * (nb_h[i] + nb_v[i]));
      hdrow[j] = hd;
      hqrow[j] = hd;
    }
  }

  // Diagonal pass. Per node: the same-branch polarization coherences
  // kp_up = K_{up H, up V}, kp_dn = K_{down H, down V} (their sum feeds both
  // the cc interference term of p and the HOM suppression), the
  // cross-branch coherences k1 = K_{up H, down V}, k2 = K_{down H, up V}
  // entering the Bell term, and the same-polarization HOM pairs.
  std::vector<Complex> scratch(n);
  std::vector<Complex> kup_a(n), kdn_a(n), k1_a(n), k2_a(n);
  std::vector<Complex> kup_b(n), kdn_b(n), k1_b(n), k2_b(n);
  std::vector<Complex> hha(n), hhb(n), vva(n), vvb(n), hom_tmp(n);
  for (int d = -(n - 1); d <= n - 1; ++d) {
    const int j_lo = std::max(0, -d);
    const int j_hi = std::min(n - 1, n - 1 - d);

    auto diag = [&](const NodeData& nd, int cr, int cc, std::vector<Complex>& out) {
      corr_diag(nd, *nd.u[cr], *nd.u[cc], nd.empty[cr], nd.empty[cc], d, scratch, out, fft);
    };
    diag(a, 0, 1, kup_a);
    diag(a, 3, 2, kdn_a);
    diag(a, 0, 2, k1_a);
    diag(a, 3, 1, k2_a);
    if (identical) {
      kup_b = kup_a;
      kdn_b = kdn_a;
      k1_b = k1_a;
      k2_b = k2_a;
    } else {
      diag(b, 0, 1, kup_b);
      diag(b, 3, 2, kdn_b);
      diag(b, 0, 2, k1_b);
      diag(b, 3, 1, k2_b);
    }

    // HOM same-polarization sums K_hat_xx = sum over branches.
    auto hom_same = [&](const NodeData& nd, int c1, int c2, std::vector<Complex>& out) {
      diag(nd, c1, c1, out);
      diag(nd, c2, c2, hom_tmp);
      for (int j = j_lo; j <= j_hi; ++j) out[j] += hom_tmp[j];
    };
    hom_same(a, 0, 3, hha);
    hom_same(a, 1, 2, vva);
    if (identical) {
      hhb = hha;
      vvb = vva;
    } else {
      hom_same(b, 0, 3, hhb);
      hom_same(b, 1, 2, vvb);
    }

    for (int j = j_lo; j <= j_hi; ++j) {
      const int i = j + d;
      const size_t ij = static_cast<size_t>(i) * n + j;
      const size_t ji = static_cast<size_t>(j) * n + i;

      const Complex kpa = kup_a[j] + kdn_a[j];
      const Complex kpb = kup_b[j] + kdn_b[j];
      map.p[ij] += 2.0 * (kpa * std::conj(kpb)).real();

      // Heralded-state components: d_ud and d_du are the diagonal weights of
      // the |up,down> / |down,up> populations, m = <up,down|rho|down,up> the
      // coherence between them (bell_coh stores its conjugate, matching the
      // e^{-i chi} convention of the map).
      const double d_ud = a.nrate[0][i] * b.nrate[2][j] + a.nrate[1][j] * b.nrate[3][i] +
                          2.0 * (kup_a[j] * std::conj(kdn_b[j])).real();
      const double d_du = a.nrate[3][i] * b.nrate[1][j] + a.nrate[2][j] * b.nrate[0][i] +
                          2.0 * (kdn_a[j] * std::conj(kup_b[j])).real();
      const Complex m = da1[i] * db1[j] + k1_a[j] * std::conj(k1_b[j]) +
                        std::conj(k2_a[j]) * k2_b[j] + da2[j] * db2[i];
      map.bell_diag[ij] = 0.5 * (std::max(d_ud, 0.0) + std::max(d_du, 0.0));
      map.bell_coh[ij] = std::conj(m);

      // HOM suppression: (H,H), (V,V) at this cell, (H,V) here and at the
      // transposed cell.
      map.hom_q[ij] -= 0.5 * (hha[j] * std::conj(hhb[j])).real();
      map.hom_q[ij] -= 0.5 * (vva[j] * std::conj(vvb[j])).real();
      const double term_hv = 0.5 * (kpa * std::conj(kpb)).real();
      map.hom_q[ij] -= term_hv;
      map.hom_q[ji] -= term_hv;
    }
  }

  finalize_map(map);
  return map;
}

std::vector<WindowedResult> window_aggregate(const CoincidenceMap& map,
                                             const std::vector<double>& windows) {
  if (!(map.grid_r == map.grid_b))
    throw std::invalid_argument("window_aggregate: map axes must share one grid");
  const int n = map.grid_r.n;
  const double dt = map.grid_r.dt();

  // Banded trapezoid sums per time difference |i - j|, then cumulative. The
  // window keeps a single chi for its whole heralded mixture, so the Bell
  // coherence accumulates as a complex sum and the modulus is taken at the
  // end; cells whose coherence phases disagree then cancel instead of each
  // bringing its own optimum.
  std::vector<double> sp(n, 0.0), sbd(n, 0.0), shq(n, 0.0), shd(n, 0.0);
  std::vector<Complex> scoh(n, Complex(0.0, 0.0));
  for (int i = 0; i < n; ++i) {
    const double wi = trapezoid_weight(i, n);
    const size_t row = static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double w = wi * trapezoid_weight(j, n);
      const int k = std::abs(i - j);
      sp[k] += w * map.p[row + j];
      sbd[k] += w * map.bell_diag[row + j];
      scoh[k] += w * map.bell_coh[row + j];
      shq[k] += w * map.hom_q[row + j];
      shd[k] += w * map.hom_d[row + j];
    }
  }
  std::vector<double> cp(n), cbd(n), chq(n), chd(n);
  std::vector<Complex> ccoh(n);
  double ap = 0.0, abd = 0.0, ahq = 0.0, ahd = 0.0;
  Complex acoh(0.0, 0.0);
  for (int k = 0; k < n; ++k) {
    cp[k] = (ap += sp[k]);
    cbd[k] = (abd += sbd[k]);
    ccoh[k] = (acoh += scoh[k]);
    chq[k] = (ahq += shq[k]);
    chd[k] = (ahd += shd[k]);
  }
  const double total = cp[n - 1];
  if (!(total > 0.0))
    throw std::invalid_argument("window_aggregate: coincidence map carries no probability");

  auto visibility = [](double q, double dnm) {
    return dnm > 0.0 ? std::clamp(1.0 - q / dnm, 0.0, 1.0) : 0.0;
  };
  auto fidelity = [](double bd, Complex coh, double p) {
    return p > 0.0 ? std::clamp((bd + std::abs(coh)) / p, 0.0, 1.0) : 0.0;
  };
  auto phase = [](Complex coh) {
    return coh == Complex(0.0, 0.0) ? 0.0 : std::arg(coh);
  };

  std::vector<WindowedResult> out;
  out.reserve(windows.size());
  for (double t : windows) {
    if (t < 0.0 || std::isnan(t))
      throw std::invalid_argument("window_aggregate: window must be nonnegative");
    WindowedResult r;
    r.window = t;
    if (t == 0.0) {
      // Zero-measure band: efficiency vanishes, fidelity and visibility are
      // reported as their T -> 0+ (diagonal) limits.
      r.efficiency = 0.0;
      r.fidelity = fidelity(sbd[0], scoh[0], sp[0]);
      r.visibility = visibility(shq[0], shd[0]);
      r.bell_phase = phase(scoh[0]);
    } else {
      const int m = (t >= (n - 1) * dt)
                        ? n - 1
                        : static_cast<int>(std::floor(t / dt + 1e-9));
      r.efficiency = cp[m] / total;
      r.fidelity = fidelity(cbd[m], ccoh[m], cp[m]);
      r.visibility = visibility(chq[m], chd[m]);
      r.bell_phase = phase(ccoh[m]);
    }
    out.push_back(r);
  }
  return out;
}

double hom_visibility(const EmissionRecord& rec_a, const EmissionRecord& rec_b,
                      bool include_reexcitation) {
  const Encoding enc = rec_a.wavepacket.encoding;
  const CoincidenceMap map =
      enc == Encoding::frequency
          ? coincidence_map_frequency(rec_a, rec_b, DetectionScheme::dichroic,
                                      include_reexcitation)
          : coincidence_map_polarization(rec_a, rec_b, include_reexcitation);
  const int n = map.grid_r.n;
  double q = 0.0, dnm = 0.0;
  for (int i = 0; i < n; ++i) {
    const double wi = trapezoid_weight(i, n);
    const size_t row = static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double w = wi * trapezoid_weight(j, n);
      q += w * map.hom_q[row + j];
      dnm += w * map.hom_d[row + j];
    }
  }
  if (!(dnm > 0.0))
    throw std::invalid_argument("hom_visibility: no distinguishable coincidences");
  return std::clamp(1.0 - q / dnm, 0.0, 1.0);
}

}  // namespace cartsim
