#pragma once

// Entangled-state preparation and Alice's homodyne conditioning. The shared
// state is kept as (micro_AB, alpha_B): a small two-mode matrix for the
// photonic part plus Bob's displacement amplitude. Alice's mode is never
// displaced, so her projection acts on the micro part alone and Bob's
// conditional state stays in the same frame.

#include <cmath>
#include <complex>
#include <stdexcept>

#include "dfsim/channels.hpp"
#include "dfsim/displaced.hpp"
#include "dfsim/fock.hpp"
#include "dfsim/polygauss.hpp"
#include "dfsim/rng.hpp"

namespace dfsim {

struct MicroMacroState {
  FockMatrix micro_AB;  // (dim_a * dim_b)^2, Alice index slow
  cxd alpha_B = 0.0;
  int dim_a = 0;
  int dim_b = 0;
};

struct ConditionalOutcome {
  QuadratureValue x_A;
  DisplacedState bob;
  double weight = 0.0;  // Alice marginal density at x_A
};

inline MicroMacroState make_state(const ImperfectionParams& params, cxd alpha) {
  params.validate();
  const FockMatrix src = herald_source(params.epsilon2);
  FockMatrix vac = FockMatrix::Zero(3, 3);
  vac(0, 0) = 1.0;
  FockMatrix joint = beam_splitter_apply(kron(src, vac), 0.5);
  joint = admix_vacuum(joint, params.eta);
  return MicroMacroState{std::move(joint), alpha, 3, 3};
}

inline FockMatrix reduced_a(const MicroMacroState& state) {
  FockMatrix out = FockMatrix::Zero(state.dim_a, state.dim_a);
  for (int ia = 0; ia < state.dim_a; ++ia)
    for (int ja = 0; ja < state.dim_a; ++ja)
      for (int ib = 0; ib < state.dim_b; ++ib)
        out(ia, ja) +=
            state.micro_AB(ia * state.dim_b + ib, ja * state.dim_b + ib);
  return out;
}

inline FockMatrix reduced_b(const MicroMacroState& state) {
  FockMatrix out = FockMatrix::Zero(state.dim_b, state.dim_b);
  for (int ib = 0; ib < state.dim_b; ++ib)
    for (int jb = 0; jb < state.dim_b; ++jb)
      for (int ia = 0; ia < state.dim_a; ++ia)
        out(ib, jb) +=
            state.micro_AB(ia * state.dim_b + ib, ia * state.dim_b + jb);
  return out;
}

inline PolyGauss alice_marginal(const MicroMacroState& state, double theta_A) {
  return quadrature_pdf(reduced_a(state), theta_A);
}

// Deterministic core: project Alice onto |x, theta> and normalize Bob.
// <x,theta|n> = psi_n(x) e^{-i n theta}; the unnormalized Bob block is
// M_B = sum_{ij} u_i conj(u_j) rho[(i,.),(j,.)] and its trace is Alice's
// marginal density at x.
inline ConditionalOutcome condition_at(const MicroMacroState& state,
                                       double theta_A, double x) {
  const int da = state.dim_a, db = state.dim_b;
  std::vector<cxd> u(da);
  for (int n = 0; n < da; ++n)
    u[n] = number_wavefunction(n, x) * std::polar(1.0, -n * theta_A);
  FockMatrix mb = FockMatrix::Zero(db, db);
  for (int ia = 0; ia < da; ++ia)
    for (int ja = 0; ja < da; ++ja) {
      const cxd w = u[ia] * std::conj(u[ja]);
      if (w == cxd(0.0)) continue;
      mb += w * state.micro_AB.block(ia * db, ja * db, db, db);
    }
  const double p = std::real(mb.trace());
  if (!(p > 1e-300))
    throw std::runtime_error("condition_at: vanishing marginal density");
  ConditionalOutcome out;
  out.x_A = QuadratureValue{x, theta_A};
  out.weight = p;
  out.bob = DisplacedState{mb / p, state.alpha_B, 0.0};
  return out;
}

inline ConditionalOutcome alice_condition(const MicroMacroState& state,
                                          double theta_A, Rng& rng) {
  const PolyGauss marginal = alice_marginal(state, theta_A);
  return condition_at(state, theta_A, marginal.sample(rng));
}

inline FockVector cat_component(int sign) {
  if (sign != 1 && sign != -1)
    throw std::invalid_argument("cat_component: sign must be +1 or -1");
  FockVector v(2);
  v(0) = 1.0 / std::sqrt(2.0);
  v(1) = sign / std::sqrt(2.0);
  return v;
}

}  // namespace dfsim
