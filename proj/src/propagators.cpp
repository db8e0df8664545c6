// Implementations of the propagation primitives.
#include "cartsim/propagators.hpp"

#include <cmath>

namespace cartsim {

std::vector<ComplexVector> propagate_schrodinger(const TimeDependentOperator& hamiltonian,
                                                 const ComplexVector& psi0,
                                                 const TimeGrid& grid,
                                                 const IntegratorOptions& opt) {
  grid.validate();
  if (hamiltonian.dim() != psi0.size())
    throw std::invalid_argument("propagate_schrodinger: Hamiltonian/state dimension mismatch");

  const Complex minus_i(0.0, -1.0);
  if (hamiltonian.is_constant()) {
    const ComplexMatrix h = hamiltonian(grid.t0);
    auto rhs = [&](double, const ComplexVector& y, ComplexVector& dydt) {
      dydt.noalias() = minus_i * (h * y);
    };
    return integrate_dopri5_grid(rhs, psi0, grid, opt);
  }
  ComplexMatrix h(hamiltonian.dim(), hamiltonian.dim());
  auto rhs = [&](double t, const ComplexVector& y, ComplexVector& dydt) {
    hamiltonian.evaluate(t, h);
    dydt.noalias() = minus_i * (h * y);
  };
  return integrate_dopri5_grid(rhs, psi0, grid, opt);
}

std::vector<ComplexMatrix> propagate_lindblad(const TimeDependentOperator& hamiltonian,
                                              const std::vector<CollapseChannel>& channels,
                                              const ComplexMatrix& rho0,
                                              const TimeGrid& grid,
                                              const IntegratorOptions& opt) {
  grid.validate();
  const int dim = hamiltonian.dim();
  if (rho0.rows() != dim || rho0.cols() != dim)
    throw std::invalid_argument("propagate_lindblad: Hamiltonian/state dimension mismatch");
  for (const auto& ch : channels) {
    if (ch.op.rows() != dim || ch.op.cols() != dim)
      throw std::invalid_argument("propagate_lindblad: collapse operator dimension mismatch");
  }

  // Fold the anticommutator part -{L^+L, rho}/2 of every channel into a
  // non-Hermitian shift of the Hamiltonian: with A = H - (i/2) sum L^+L,
  // -i(A rho - rho A^+) reproduces both the commutator and the decay terms.
  ComplexMatrix damp = ComplexMatrix::Zero(dim, dim);
  for (const auto& ch : channels) damp += 0.5 * (ch.op.adjoint() * ch.op);
  std::vector<const ComplexMatrix*> refill;
  for (const auto& ch : channels)
    if (ch.refill) refill.push_back(&ch.op);

  const Complex minus_i(0.0, -1.0);
  ComplexMatrix h(dim, dim), a(dim, dim);
  const bool constant = hamiltonian.is_constant();
  if (constant) a = hamiltonian(grid.t0) - Complex(0.0, 1.0) * damp;

  auto rhs = [&](double t, const ComplexMatrix& rho, ComplexMatrix& drho) {
    if (!constant) {
      hamiltonian.evaluate(t, h);
      a = h - Complex(0.0, 1.0) * damp;
    }
    drho.noalias() = minus_i * (a * rho);
    drho.noalias() -= minus_i * (rho * a.adjoint());
    for (const ComplexMatrix* l : refill) drho.noalias() += (*l) * rho * l->adjoint();
  };
  return integrate_dopri5_grid(rhs, rho0, grid, opt);
}

ComplexMatrix matrix_exponential(const ComplexMatrix& a) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("matrix_exponential: matrix must be square");
  const int n = static_cast<int>(a.rows());
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);

  // Degree-13 Pade numerator coefficients; applicable without scaling for
  // ||A||_1 below theta_13.
  static const double b[14] = {64764752532480000.0, 32382376266240000.0,
                               7771770303897600.0,  1187353796428800.0,
                               129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,
                               1323241920.0,        40840800.0,
                               960960.0,            16380.0,
                               182.0,               1.0};
  static const double theta13 = 5.371920351148152;

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  const ComplexMatrix as = a / std::ldexp(1.0, squarings);

  const ComplexMatrix a2 = as * as;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;
  const ComplexMatrix u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
            b[3] * a2 + b[1] * id);
  const ComplexMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) +
                          b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;

  ComplexMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) r = r * r;
  return r;
}

}  // namespace cartsim
