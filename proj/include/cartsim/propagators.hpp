// Quantum propagation primitives: Schroedinger evolution under a
// (possibly non-Hermitian, possibly time-dependent) Hamiltonian, Lindblad
// master-equation evolution, and a dense matrix exponential.
#pragma once

#include <functional>
#include <vector>

#include "cartsim/integrator.hpp"
#include "cartsim/types.hpp"

namespace cartsim {

// A square matrix-valued function of time. Wraps either a constant matrix
// or a rule that fills the matrix in place; the constant case is detected so
// propagators can avoid re-evaluating it inside integration steps.
class TimeDependentOperator {
 public:
  using Rule = std::function<void(double t, ComplexMatrix& out)>;

  TimeDependentOperator(int dim, Rule rule)
      : dim_(dim), rule_(std::move(rule)), constant_(false) {}

  explicit TimeDependentOperator(ComplexMatrix fixed)
      : dim_(static_cast<int>(fixed.rows())),
        fixed_(std::move(fixed)),
        constant_(true) {}

  static TimeDependentOperator constant(ComplexMatrix m) {
    return TimeDependentOperator(std::move(m));
  }

  int dim() const { return dim_; }
  bool is_constant() const { return constant_; }

  void evaluate(double t, ComplexMatrix& out) const {
    if (constant_) {
      out = fixed_;
    } else {
      out.resize(dim_, dim_);
      rule_(t, out);
    }
  }

  ComplexMatrix operator()(double t) const {
    ComplexMatrix out;
    evaluate(t, out);
    return out;
  }

 private:
  int dim_;
  Rule rule_;
  ComplexMatrix fixed_;
  bool constant_;
};

// One collapse channel of a master equation. When refill is true the channel
// contributes the full Lindblad dissipator L rho L^+ - {L^+ L, rho}/2
// (population re-enters through L rho L^+); when false only the decay part
// -{L^+ L, rho}/2 is kept, modelling population that leaves the tracked
// space entirely (photon loss through the mirror, decay to spectator
// levels).
struct CollapseChannel {
  ComplexMatrix op;
  bool refill = true;
};

// Evolves i d|psi>/dt = H(t) |psi> and samples |psi> on the grid. H may be
// non-Hermitian (effective Hamiltonians with -i*rate terms are the intended
// use), in which case the norm of |psi> decays and tracks the survival
// probability. Frequencies in H are angular (rad/us) and times are in us.
std::vector<ComplexVector> propagate_schrodinger(const TimeDependentOperator& hamiltonian,
                                                 const ComplexVector& psi0,
                                                 const TimeGrid& grid,
                                                 const IntegratorOptions& opt = {});

// Evolves the master equation
//   d rho/dt = -i (H rho - rho H^+)
//              + sum_k [ L_k rho L_k^+ ]   (channels with refill only)
//              - sum_k { L_k^+ L_k, rho } / 2
// and samples rho on the grid. H is typically the Hermitian part of the
// generator, but a non-Hermitian H is accepted (the -i(H rho - rho H^+) form
// keeps rho Hermitian either way), so an effective Hamiltonian with no
// channels is a valid input.
std::vector<ComplexMatrix> propagate_lindblad(const TimeDependentOperator& hamiltonian,
                                              const std::vector<CollapseChannel>& channels,
                                              const ComplexMatrix& rho0,
                                              const TimeGrid& grid,
                                              const IntegratorOptions& opt = {});

// Dense exp(A) by scaling-and-squaring with a degree-13 Pade approximant.
ComplexMatrix matrix_exponential(const ComplexMatrix& a);

}  // namespace cartsim
