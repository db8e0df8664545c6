// Shared scalar types, the uniform time grid, and the six-state basis layout
// used across the simulator.
#pragma once

#include <array>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cartsim {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

// Unit convention, used everywhere: rates and frequencies are stored in
// 2*pi*MHz, exactly as hardware parameter tables quote them. Times are in
// microseconds. A frequency f stored as "f (2pi*MHz)" corresponds to the
// angular frequency two_pi*f rad/us, which is what the propagators consume;
// the emission layer performs that single conversion.
inline constexpr double two_pi = 6.283185307179586476925286766559;

inline constexpr const char* artifact_name = "cartsim";
inline constexpr const char* artifact_version = "0.1.0";

// Row/column order of the six-dimensional atom-cavity basis:
//   0: |i>   initial state
//   1: |e>   excited state
//   2..5     qubit state x photon channel; the meaning of the four photon
//            channels depends on the encoding:
//   frequency encoding:    2:|up,rH>  3:|up,rV>  4:|down,bH>  5:|down,bV>
//   polarization encoding: 2:|up,H>   3:|up,V>   4:|down,V>   5:|down,H>
// where r/b are the red/blue frequency modes and H/V the polarizations. In
// polarization encoding both branches share one frequency; the photon starts
// H-polarized on the "up" branch and V-polarized on the "down" branch, and
// birefringence can rotate it to the orthogonal polarization.
inline constexpr int basis_dim = 6;
inline constexpr int idx_initial = 0;
inline constexpr int idx_excited = 1;
inline constexpr int idx_channel0 = 2;
inline constexpr int n_channels = 4;

enum class Encoding { frequency, polarization };

// Channel labels in basis order 2..5. For polarization encoding the first
// letter names the emission branch (= the polarization the photon started
// with) and the second the polarization actually measured, so "HV" is a
// photon that started horizontal and was rotated to vertical.
inline const std::array<std::string, n_channels>& channel_labels(Encoding enc) {
  static const std::array<std::string, n_channels> freq = {"rH", "rV", "bH", "bV"};
  static const std::array<std::string, n_channels> pol = {"HH", "HV", "VV", "VH"};
  return enc == Encoding::frequency ? freq : pol;
}

// Uniformly spaced sample times t_k = t0 + k*dt, k = 0..n-1, dt = (t1-t0)/(n-1).
struct TimeGrid {
  double t0 = 0.0;
  double t1 = 1.0;
  int n = 2;

  double dt() const { return (t1 - t0) / (n - 1); }
  double time(int k) const { return t0 + k * dt(); }

  std::vector<double> times() const {
    std::vector<double> out(n);
    for (int k = 0; k < n; ++k) out[k] = time(k);
    return out;
  }

  void validate() const {
    if (!(t0 < t1)) throw std::invalid_argument("TimeGrid: t0 must be < t1");
    if (n < 2) throw std::invalid_argument("TimeGrid: need at least 2 samples");
  }

  bool operator==(const TimeGrid&) const = default;
};

}  // namespace cartsim
