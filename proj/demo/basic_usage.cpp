// Walk-through of the library: prepare the shared state, condition on Alice's
// homodyne outcome, read Bob's photon statistics at macroscopic displacement,
// and reconstruct the micro state from simulated quadrature data.

#include <complex>
#include <iostream>

#include "dfsim/channels.hpp"
#include "dfsim/conditional.hpp"
#include "dfsim/detection.hpp"
#include "dfsim/displaced.hpp"
#include "dfsim/tomography.hpp"

int main() {
  using namespace dfsim;

  // Source: heralded single photon (eta = 0.54 efficiency, 1.5% two-photon
  // contamination) split 50/50 between Alice and Bob, Bob displaced by alpha.
  ImperfectionParams params;
  const double alpha = 1000.0;  // 10^6 photons mean energy
  const MicroMacroState state = make_state(params, alpha);

  // Condition Bob on a definite Alice outcome. Near x = +1/sqrt(2) Bob's
  // micro state approaches the even superposition of |0> and |1>.
  const ConditionalOutcome at_peak = condition_at(state, 0.0, 1.0 / std::sqrt(2.0));
  const PhotonMoments peak = photon_moments(at_peak.bob);
  std::cout << "conditioned at x_A = 0.707:\n"
            << "  mean energy  " << peak.mean << " photons\n"
            << "  excess mean  " << peak.mean - alpha * alpha << " photons\n"
            << "  variance / alpha^2  " << peak.variance / (alpha * alpha)
            << "\n\n";

  // The same state read out by sampling: energy difference against an
  // independent Poissonian reference of matched mean.
  StreamSeed stream{42, 0};
  Rng rng = stream.at(0);
  const AsymptoticSampler sampler(alpha, state.dim_b);
  const auto target = sampler.prepare(at_peak.bob.micro);
  std::cout << "five sampled energy differences at the same outcome:";
  for (int i = 0; i < 5; ++i) {
    const long long nb = sampler.draw(target, rng);
    std::cout << ' ' << nb - rng.poisson(alpha * alpha);
  }
  std::cout << "\n(expected proposals per draw: "
            << sampler.expected_proposals(at_peak.bob.micro) << ")\n\n";

  // Entanglement before and after 40% loss on Bob's arm, by the witness.
  const FockMatrix lossy =
      loss_mode_b(state.micro_AB, state.dim_a, state.dim_b, 0.6);
  std::cout << "concurrence witness: " << concurrence(state.micro_AB)
            << " at t = 1, " << concurrence(lossy) << " at t = 0.6\n\n";

  // Homodyne tomography on simulated data (small run; the CLI scenario uses
  // 20000 shots per phase pair).
  QuadratureBatch batch =
      sample_quadratures(state.micro_AB, default_phase_pairs(), 2000, stream);
  apply_residual_offset(batch, 10.0);  // imperfect undisplacement offset
  batch = residual_filter(batch);      // removed per phase pair
  const ReconstructionResult rec = mle_reconstruct(batch, 3, 400);
  std::cout << "reconstruction from " << batch.records.size() << " samples: "
            << "fidelity " << state_fidelity(state.micro_AB, rec.rho)
            << ", concurrence " << concurrence(rec.rho) << " (true "
            << concurrence(state.micro_AB) << ")\n";
  return 0;
}
