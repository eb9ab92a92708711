#pragma once

// Truncated Fock-space linear algebra: ladder operators, displacement
// matrices, beam splitters, quadrature wavefunctions.
//
// Conventions used throughout the library:
//   - quadrature x has vacuum variance 1/2, i.e. x_theta = (a e^{-i theta} +
//     a^dag e^{i theta}) / sqrt(2), and psi_0(x) = pi^{-1/4} e^{-x^2/2};
//   - quadrature eigenstates satisfy <x,theta|n> = psi_n(x) e^{-i n theta};
//   - two-mode indices are row-major (i_A * dim_B + i_B), Alice slow;
//   - beam splitters use real symmetric mixing (no i on the cross term), so
//     |1,0> at transmissivity 1/2 goes to (|10> + |01>)/sqrt(2) with a plus.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace dfsim {

using cxd = std::complex<double>;
using FockVector = Eigen::VectorXcd;
using FockMatrix = Eigen::MatrixXcd;

struct QuadratureValue {
  double x = 0.0;      // dimensionless, vacuum variance 1/2
  double theta = 0.0;  // radians, [0, 2pi)
};

struct LadderPair {
  FockMatrix annihilation;
  FockMatrix creation;
};

inline LadderPair ladder_matrices(int dim) {
  if (dim < 2) throw std::invalid_argument("ladder_matrices: dim must be >= 2");
  FockMatrix a = FockMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return {a, a.adjoint()};
}

inline FockVector fock_basis_vector(int dim, int n) {
  if (dim < 2) throw std::invalid_argument("fock_basis_vector: dim must be >= 2");
  if (n < 0 || n >= dim) throw std::invalid_argument("fock_basis_vector: n out of range");
  FockVector v = FockVector::Zero(dim);
  v(n) = 1.0;
  return v;
}

inline FockMatrix kron(const FockMatrix& a, const FockMatrix& b) {
  FockMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline bool is_density_matrix(const FockMatrix& rho, double tol = 1e-9) {
  if (rho.rows() != rho.cols()) return false;
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  if (std::abs(rho.trace() - cxd(1.0, 0.0)) > tol) return false;
  Eigen::SelfAdjointEigenSolver<FockMatrix> es(rho, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > -tol;
}

struct DisplacementMatrix {
  FockMatrix matrix;
  Eigen::VectorXd column_leakage;  // 1 - sum_m |<m|D|n>|^2 per retained column
  bool truncation_warning = false; // set when |alpha|^2 > dim
};

// <m|D(alpha)|n> on the retained dim x dim block. Column 0 is the coherent
// state, evaluated in log magnitude so that alpha up to ~10^2 cannot overflow;
// higher columns follow from D a^dag = (a^dag - conj(alpha)) D:
//   <m|D|n+1> = (sqrt(m) <m-1|D|n> - conj(alpha) <m|D|n>) / sqrt(n+1).
// Entries are exact values of the infinite matrix (the recurrence never
// references truncated rows), so truncation shows up only as column leakage.
inline DisplacementMatrix displacement_matrix(cxd alpha, int dim) {
  if (dim < 2) throw std::invalid_argument("displacement_matrix: dim must be >= 2");
  DisplacementMatrix out;
  out.matrix = FockMatrix::Zero(dim, dim);
  out.column_leakage = Eigen::VectorXd::Zero(dim);
  const double lam = std::norm(alpha);
  out.truncation_warning = lam > static_cast<double>(dim);
  if (lam == 0.0) {
    out.matrix.setIdentity();
    return out;
  }
  const double logmag = std::log(std::abs(alpha));
  const double arg = std::arg(alpha);
  for (int m = 0; m < dim; ++m) {
    const double lm = -0.5 * lam + m * logmag - 0.5 * std::lgamma(m + 1.0);
    out.matrix(m, 0) = std::exp(lm) * std::polar(1.0, m * arg);
  }
  const cxd ac = std::conj(alpha);
  for (int n = 0; n + 1 < dim; ++n) {
    const double inv = 1.0 / std::sqrt(n + 1.0);
    out.matrix(0, n + 1) = -ac * out.matrix(0, n) * inv;
    for (int m = 1; m < dim; ++m)
      out.matrix(m, n + 1) =
          (std::sqrt(static_cast<double>(m)) * out.matrix(m - 1, n) -
           ac * out.matrix(m, n)) *
          inv;
  }
  for (int n = 0; n < dim; ++n) {
    double leak = 1.0 - out.matrix.col(n).squaredNorm();
    out.column_leakage(n) = leak < 0.0 ? 0.0 : leak;
  }
  return out;
}

// Same recurrence, but only the first `cols` columns on `rows` rows. The
// per-shot sampling paths need a handful of columns of a tall panel, not the
// full square matrix.
inline FockMatrix displacement_columns(cxd alpha, int rows, int cols) {
  if (rows < 2 || cols < 1 || cols > rows)
    throw std::invalid_argument("displacement_columns: bad panel shape");
  FockMatrix d = FockMatrix::Zero(rows, cols);
  const double lam = std::norm(alpha);
  if (lam == 0.0) {
    for (int n = 0; n < cols; ++n) d(n, n) = 1.0;
    return d;
  }
  const double logmag = std::log(std::abs(alpha));
  const double arg = std::arg(alpha);
  for (int m = 0; m < rows; ++m) {
    const double lm = -0.5 * lam + m * logmag - 0.5 * std::lgamma(m + 1.0);
    d(m, 0) = std::exp(lm) * std::polar(1.0, m * arg);
  }
  const cxd ac = std::conj(alpha);
  for (int n = 0; n + 1 < cols; ++n) {
    const double inv = 1.0 / std::sqrt(n + 1.0);
    d(0, n + 1) = -ac * d(0, n) * inv;
    for (int m = 1; m < rows; ++m)
      d(m, n + 1) =
          (std::sqrt(static_cast<double>(m)) * d(m - 1, n) - ac * d(m, n)) * inv;
  }
  return d;
}

// Two-mode beam splitter, mixing angle theta = arccos(sqrt(transmissivity)).
// Generator a b^dag - a^dag b; the exact unitary of the truncated generator is
// taken (self-adjoint eigendecomposition), so the result is always exactly
// trace preserving. Total photon number is conserved sector by sector; inputs
// should keep total n <= dim_per_mode - 1 for the physical blocks to be exact.
inline FockMatrix beam_splitter_apply(const FockMatrix& rho_two_mode,
                                      double transmissivity) {
  if (!(transmissivity >= 0.0 && transmissivity <= 1.0))
    throw std::invalid_argument("beam_splitter_apply: transmissivity must be in [0,1]");
  const auto total = rho_two_mode.rows();
  if (total != rho_two_mode.cols())
    throw std::invalid_argument("beam_splitter_apply: matrix must be square");
  const int d = static_cast<int>(std::llround(std::sqrt(static_cast<double>(total))));
  if (static_cast<Eigen::Index>(d) * d != total || d < 2)
    throw std::invalid_argument("beam_splitter_apply: per-mode dims must be equal");
  const double theta = std::acos(std::sqrt(transmissivity));
  if (theta == 0.0) return rho_two_mode;
  const auto lad = ladder_matrices(d);
  const FockMatrix x = kron(lad.annihilation, lad.creation) -
                       kron(lad.creation, lad.annihilation);
  const FockMatrix k = cxd(0.0, 1.0) * x;  // Hermitian
  Eigen::SelfAdjointEigenSolver<FockMatrix> es(k);
  FockVector phases(total);
  for (Eigen::Index i = 0; i < total; ++i)
    phases(i) = std::polar(1.0, -theta * es.eigenvalues()(i));
  const FockMatrix u =
      es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
  return u * rho_two_mode * u.adjoint();
}

// psi_n(x) by the stable upward recurrence
//   psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}.
inline double number_wavefunction(int n, double x) {
  if (n < 0) throw std::invalid_argument("number_wavefunction: n must be >= 0");
  const double psi0 = std::exp(-0.5 * x * x) / std::pow(M_PI, 0.25);
  if (n == 0) return psi0;
  double prev = psi0;
  double cur = std::sqrt(2.0) * x * psi0;
  for (int k = 1; k < n; ++k) {
    const double next = std::sqrt(2.0 / (k + 1.0)) * x * cur -
                        std::sqrt(k / (k + 1.0)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

}  // namespace dfsim
