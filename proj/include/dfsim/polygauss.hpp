#pragma once

// Sampling and integration for densities of the form P(x) e^{-x^2} with P a
// low-degree polynomial. Every quadrature distribution of a small Fock-space
// state has this form, so one closed-form CDF inverter covers Alice marginals,
// Bob conditionals and homodyne sampling alike.
//
// CDF primitive: J_j(x) = int_{-inf}^x t^j e^{-t^2} dt obeys
//   J_0 = (sqrt(pi)/2) erfc(-x),  J_1 = -e^{-x^2}/2,
//   J_j = ((j-1)/2) J_{j-2} - x^{j-1} e^{-x^2}/2.
// Inversion is safeguarded Newton on the exact CDF (bracketed bisection
// fallback), warm-started from a coarse CDF grid built at construction. The
// grid only narrows the initial bracket; accuracy comes from the solve.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dfsim/fock.hpp"
#include "dfsim/rng.hpp"

namespace dfsim {

namespace poly {

inline std::vector<double> mul(const std::vector<double>& a,
                               const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline double eval(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > 0;) acc = acc * x + c[i];
  return acc;
}

inline std::vector<double> shift_up(const std::vector<double>& c) {
  std::vector<double> out(c.size() + 1, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) out[i + 1] = c[i];
  return out;
}

inline void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
  if (y.size() < x.size()) y.resize(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace poly

// Coefficients of the Hermite-function prefactor: psi_n(x) = H_n(x) e^{-x^2/2}
// with H_0 = pi^{-1/4}, H_{n+1} = sqrt(2/(n+1)) x H_n - sqrt(n/(n+1)) H_{n-1}.
inline std::vector<std::vector<double>> hermite_prefactors(int nmax) {
  std::vector<std::vector<double>> h(nmax + 1);
  h[0] = {std::pow(M_PI, -0.25)};
  if (nmax >= 1) h[1] = {0.0, std::sqrt(2.0) * std::pow(M_PI, -0.25)};
  for (int n = 1; n < nmax; ++n) {
    std::vector<double> next = poly::shift_up(h[n]);
    for (double& c : next) c *= std::sqrt(2.0 / (n + 1.0));
    poly::axpy(next, -std::sqrt(n / (n + 1.0)), h[n - 1]);
    h[n + 1] = std::move(next);
  }
  return h;
}

class PolyGauss {
 public:
  // pdf(x) proportional to P(x) e^{-x^2}; P must be nonnegative on R.
  explicit PolyGauss(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    if (c_.empty()) throw std::invalid_argument("PolyGauss: empty polynomial");
    const auto m = full_moments(static_cast<int>(c_.size()) + 2);
    total_ = 0.0;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < c_.size(); ++j) {
      total_ += c_[j] * m[j];
      m1 += c_[j] * m[j + 1];
      m2 += c_[j] * m[j + 2];
    }
    if (!(total_ > 0.0)) throw std::invalid_argument("PolyGauss: polynomial integrates to <= 0");
    mean_ = m1 / total_;
    variance_ = m2 / total_ - mean_ * mean_;
    for (int i = 0; i < kGrid; ++i) {
      grid_x_[i] = -9.0 + 18.0 * i / (kGrid - 1.0);
      grid_c_[i] = cdf(grid_x_[i]);
    }
  }

  double total() const { return total_; }
  double mean() const { return mean_; }
  double variance() const { return variance_; }

  double pdf(double x) const {
    return poly::eval(c_, x) * std::exp(-x * x) / total_;
  }

  // int_{-inf}^x P(t) e^{-t^2} dt, unnormalized.
  double lower_integral(double x) const {
    const double g = std::exp(-x * x);
    double jm2 = 0.5 * std::sqrt(M_PI) * std::erfc(-x);  // J_0
    double acc = c_[0] * jm2;
    if (c_.size() == 1) return acc;
    double jm1 = -0.5 * g;  // J_1
    acc += c_[1] * jm1;
    double xp = x;  // x^{j-1} for j = 2
    for (std::size_t j = 2; j < c_.size(); ++j) {
      const double jj = 0.5 * (j - 1.0) * jm2 - 0.5 * xp * g;
      acc += c_[j] * jj;
      jm2 = jm1;
      jm1 = jj;
      xp *= x;
    }
    return acc;
  }

  double cdf(double x) const { return lower_integral(x) / total_; }

  // Inverse CDF; exact up to the 1e-14 solve tolerance.
  double invert(double u) const {
    int k = 0;
    {
      int a = 0, b = kGrid - 1;
      while (b - a > 1) {
        const int m = (a + b) / 2;
        (grid_c_[m] <= u ? a : b) = m;
      }
      k = a;
    }
    double lo = grid_x_[k], hi = grid_x_[k + 1];
    const double dc = grid_c_[k + 1] - grid_c_[k];
    double x = dc > 0.0 ? lo + (hi - lo) * (u - grid_c_[k]) / dc
                        : 0.5 * (lo + hi);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    for (int it = 0; it < 128; ++it) {
      const double f = cdf(x) - u;
      if (std::fabs(f) < 1e-14) break;
      if (f > 0.0)
        hi = x;
      else
        lo = x;
      if (hi - lo < 1e-13) break;
      const double d = pdf(x);
      double next = d > 1e-300 ? x - f / d : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      x = next;
    }
    return x;
  }

  double sample(Rng& rng) const { return invert(rng.uniform()); }

  const std::vector<double>& coeffs() const { return c_; }

  // M_j = int t^j e^{-t^2} dt: M_0 = sqrt(pi), M_1 = 0, M_j = ((j-1)/2) M_{j-2}.
  static std::vector<double> full_moments(int count) {
    std::vector<double> m(count);
    if (count > 0) m[0] = std::sqrt(M_PI);
    if (count > 1) m[1] = 0.0;
    for (int j = 2; j < count; ++j) m[j] = 0.5 * (j - 1.0) * m[j - 2];
    return m;
  }

 private:
  static constexpr int kGrid = 129;

  std::vector<double> c_;
  double total_ = 0.0, mean_ = 0.0, variance_ = 0.0;
  std::array<double, kGrid> grid_x_{};
  std::array<double, kGrid> grid_c_{};
};

// Quadrature distribution of a single-mode density matrix at phase theta:
//   p(x) = sum_{jk} Re(rho_jk e^{i(k-j)theta}) H_j(x) H_k(x) e^{-x^2}.
inline PolyGauss quadrature_pdf(const FockMatrix& rho, double theta) {
  const int d = static_cast<int>(rho.rows());
  const auto h = hermite_prefactors(d - 1);
  std::vector<double> p{0.0};
  for (int j = 0; j < d; ++j) {
    poly::axpy(p, std::real(rho(j, j)), poly::mul(h[j], h[j]));
    for (int k = j + 1; k < d; ++k) {
      const double w = 2.0 * std::real(rho(j, k) * std::polar(1.0, (k - j) * theta));
      if (w != 0.0) poly::axpy(p, w, poly::mul(h[j], h[k]));
    }
  }
  return PolyGauss(std::move(p));
}

}  // namespace dfsim
