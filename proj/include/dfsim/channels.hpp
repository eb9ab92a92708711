#pragma once

// Imperfection models: vacuum admixture, optical loss, Gaussian phase noise,
// two-photon herald contamination. All maps are trace preserving and
// completely positive; loss and dephasing act on displaced states by
// transforming (micro, alpha) jointly so the frame never has to be opened.

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfsim/displaced.hpp"
#include "dfsim/fock.hpp"
#include "dfsim/rng.hpp"

namespace dfsim {

struct ImperfectionParams {
  double eta = 0.54;         // single-photon preparation efficiency
  double epsilon2 = 0.015;   // two-photon fraction of the herald
  double sigma_phi = 0.0;    // RMS phase noise, radians
  double transmission = 1.0; // loss between displacement and undisplacement

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0))
      throw std::invalid_argument("eta must lie in [0,1]");
    if (!(epsilon2 >= 0.0 && epsilon2 <= 1.0))
      throw std::invalid_argument("epsilon2 must lie in [0,1]");
    if (!(sigma_phi >= 0.0))
      throw std::invalid_argument("sigma_phi must be >= 0");
    if (!(transmission >= 0.0 && transmission <= 1.0))
      throw std::invalid_argument("transmission must lie in [0,1]");
  }
};

inline FockMatrix admix_vacuum(const FockMatrix& rho_AB, double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw std::invalid_argument("admix_vacuum: eta must lie in [0,1]");
  FockMatrix out = eta * rho_AB;
  out(0, 0) += 1.0 - eta;
  return out;
}

// Beam-splitter-to-vacuum Kraus operators on a dim-truncated mode:
// A_k[n-k, n] = sqrt(C(n,k) t^(n-k) (1-t)^k). Their completeness sum is the
// binomial theorem, exact for every n < dim, so the channel preserves trace
// on the truncated space identically.
inline std::vector<FockMatrix> loss_kraus(int dim, double t) {
  std::vector<FockMatrix> ops(dim, FockMatrix::Zero(dim, dim));
  for (int n = 0; n < dim; ++n) {
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
      const double w = binom * std::pow(t, n - k) * std::pow(1.0 - t, k);
      ops[k](n - k, n) = std::sqrt(w);
      binom = binom * (n - k) / (k + 1.0);
    }
  }
  return ops;
}

inline FockMatrix loss(const FockMatrix& rho, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("loss: t must lie in [0,1]");
  if (t == 1.0) return rho;
  const int dim = static_cast<int>(rho.rows());
  const auto ops = loss_kraus(dim, t);
  FockMatrix out = FockMatrix::Zero(dim, dim);
  for (const auto& a : ops) out += a * rho * a.adjoint();
  return out;
}

inline DisplacedState loss(const DisplacedState& state, double t) {
  DisplacedState out = state;
  out.micro = loss(state.micro, t);
  out.alpha = std::sqrt(t) * state.alpha;
  return out;
}

// Loss on the second mode of a two-mode matrix, block by block.
inline FockMatrix loss_mode_b(const FockMatrix& rho_AB, int dim_a, int dim_b,
                              double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("loss_mode_b: t must lie in [0,1]");
  if (rho_AB.rows() != dim_a * dim_b || rho_AB.cols() != dim_a * dim_b)
    throw std::invalid_argument("loss_mode_b: dimension mismatch");
  if (t == 1.0) return rho_AB;
  const auto ops = loss_kraus(dim_b, t);
  FockMatrix out = FockMatrix::Zero(rho_AB.rows(), rho_AB.cols());
  for (int ia = 0; ia < dim_a; ++ia)
    for (int ja = 0; ja < dim_a; ++ja) {
      const auto block = rho_AB.block(ia * dim_b, ja * dim_b, dim_b, dim_b);
      auto dst = out.block(ia * dim_b, ja * dim_b, dim_b, dim_b);
      for (const auto& a : ops) dst += a * block * a.adjoint();
    }
  return out;
}

// Analytic dephasing: Gaussian phase average, rho_mn -> rho_mn e^{-s^2 (m-n)^2 / 2}.
inline FockMatrix dephase(const FockMatrix& micro, double sigma_phi) {
  if (!(sigma_phi >= 0.0))
    throw std::invalid_argument("dephase: sigma_phi must be >= 0");
  const int dim = static_cast<int>(micro.rows());
  FockMatrix out = micro;
  for (int m = 0; m < dim; ++m)
    for (int n = 0; n < dim; ++n) {
      const double d = static_cast<double>(m - n);
      out(m, n) *= std::exp(-0.5 * sigma_phi * sigma_phi * d * d);
    }
  return out;
}

inline DisplacedState dephase(const DisplacedState& state, double sigma_phi) {
  if (std::abs(state.alpha) > 0.0)
    throw std::runtime_error(
        "dephase: analytic mode is undefined for |alpha| > 0; a phase-averaged "
        "displaced state leaves the (micro, alpha) family. Use the sampled "
        "mode");
  DisplacedState out = state;
  out.micro = dephase(state.micro, sigma_phi);
  return out;
}

// Sampled dephasing: one quasi-static phase per shot rotates the whole frame.
inline DisplacedState dephase(const DisplacedState& state, double sigma_phi,
                              Rng& rng) {
  if (!(sigma_phi >= 0.0))
    throw std::invalid_argument("dephase: sigma_phi must be >= 0");
  const double phi = sigma_phi * rng.normal();
  DisplacedState out = state;
  out.alpha = state.alpha * std::polar(1.0, phi);
  const int dim = static_cast<int>(state.micro.rows());
  for (int m = 0; m < dim; ++m)
    for (int n = 0; n < dim; ++n)
      out.micro(m, n) = state.micro(m, n) * std::polar(1.0, phi * (m - n));
  return out;
}

inline FockMatrix dephase(const FockMatrix& micro, double sigma_phi, Rng& rng) {
  DisplacedState s{micro, 0.0, 0.0};
  return dephase(s, sigma_phi, rng).micro;
}

inline FockMatrix herald_source(double epsilon2) {
  if (!(epsilon2 >= 0.0 && epsilon2 <= 1.0))
    throw std::invalid_argument("herald_source: epsilon2 must lie in [0,1]");
  FockMatrix out = FockMatrix::Zero(3, 3);
  out(1, 1) = 1.0 - epsilon2;
  out(2, 2) = epsilon2;
  return out;
}

}  // namespace dfsim
