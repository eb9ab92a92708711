#pragma once

// Two-mode homodyne tomography: joint quadrature sampling from a small
// two-mode density matrix, per-phase residual-offset filtering, iterative
// maximum-likelihood reconstruction (unbinned R rho R), and the concurrence
// witness with its loss sweep.

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfsim/channels.hpp"
#include "dfsim/conditional.hpp"
#include "dfsim/fock.hpp"
#include "dfsim/polygauss.hpp"
#include "dfsim/rng.hpp"

namespace dfsim {

struct QuadratureRecord {
  double x_A = 0.0;
  double theta_A = 0.0;
  double x_B = 0.0;
  double theta_B = 0.0;
};

struct QuadratureBatch {
  std::vector<QuadratureRecord> records;
};

inline double wrap_phase(double theta) {
  double t = std::fmod(theta, 2.0 * M_PI);
  if (t < 0.0) t += 2.0 * M_PI;
  return t;
}

inline std::vector<std::pair<double, double>> default_phase_pairs() {
  const double step = M_PI / 4.0;
  std::vector<std::pair<double, double>> out;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) out.emplace_back(a * step, b * step);
  return out;
}

inline int deduce_mode_dim(const FockMatrix& rho_AB) {
  const int n = static_cast<int>(rho_AB.rows());
  const int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (d * d != n || rho_AB.cols() != n)
    throw std::invalid_argument("two-mode matrix must be square with square size");
  return d;
}

// Joint homodyne sampling. Phase locking to a common reference is absent in
// the measurement model: each (theta_A, theta_B) block gets one uniformly
// random global phase added to both local oscillators, and records carry the
// nominal phases. For states with no coherence between total-photon-number
// sectors this is distributionally inert, which is exactly the physical
// statement that only relative phases matter.
inline QuadratureBatch sample_quadratures(
    const FockMatrix& rho_AB,
    const std::vector<std::pair<double, double>>& phases,
    long long shots_per_pair, const StreamSeed& stream) {
  if (phases.empty())
    throw std::invalid_argument("sample_quadratures: empty phase list");
  if (shots_per_pair < 1)
    throw std::invalid_argument("sample_quadratures: shots_per_pair must be >= 1");
  const int d = deduce_mode_dim(rho_AB);
  MicroMacroState state{rho_AB, 0.0, d, d};

  QuadratureBatch batch;
  batch.records.reserve(static_cast<std::size_t>(phases.size()) *
                        static_cast<std::size_t>(shots_per_pair));
  const long long block_span = shots_per_pair + 1;
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const double ta = wrap_phase(phases[k].first);
    const double tb = wrap_phase(phases[k].second);
    Rng block_rng = stream.at(static_cast<long long>(k) * block_span);
    const double phi_g = 2.0 * M_PI * block_rng.uniform();
    const PolyGauss marginal = alice_marginal(state, ta + phi_g);
    for (long long i = 0; i < shots_per_pair; ++i) {
      Rng rng = stream.at(static_cast<long long>(k) * block_span + 1 + i);
      const double xa = marginal.sample(rng);
      const ConditionalOutcome cond = condition_at(state, ta + phi_g, xa);
      const PolyGauss bob_pdf = quadrature_pdf(cond.bob.micro, tb + phi_g);
      const double xb = bob_pdf.sample(rng);
      batch.records.push_back(QuadratureRecord{xa, ta, xb, tb});
    }
  }
  return batch;
}

// The experimental residual displacement: a phase-dependent quadrature offset
// sqrt(2) alpha_r cos(theta_B) on Bob's readings.
inline void apply_residual_offset(QuadratureBatch& batch, double alpha_r) {
  for (auto& r : batch.records)
    r.x_B += std::sqrt(2.0) * alpha_r * std::cos(r.theta_B);
}

namespace detail {

inline long long phase_key(double theta) {
  return std::llround(wrap_phase(theta) * 1e9);
}

}  // namespace detail

// Subtracts the empirical per-phase-pair mean of x_B (and optionally x_A).
inline QuadratureBatch residual_filter(const QuadratureBatch& batch,
                                       bool center_alice = false) {
  std::map<std::pair<long long, long long>, std::pair<double, long long>> mb;
  std::map<std::pair<long long, long long>, double> ma;
  for (const auto& r : batch.records) {
    const auto key = std::make_pair(detail::phase_key(r.theta_A),
                                    detail::phase_key(r.theta_B));
    auto& acc = mb[key];
    acc.first += r.x_B;
    acc.second += 1;
    ma[key] += r.x_A;
  }
  for (const auto& [key, acc] : mb)
    if (acc.second < 100)
      throw std::runtime_error(
          "residual_filter: phase pair with only " +
          std::to_string(acc.second) + " records (need >= 100)");
  QuadratureBatch out;
  out.records.reserve(batch.records.size());
  for (const auto& r : batch.records) {
    const auto key = std::make_pair(detail::phase_key(r.theta_A),
                                    detail::phase_key(r.theta_B));
    const auto& acc = mb.at(key);
    QuadratureRecord c = r;
    c.x_B -= acc.first / static_cast<double>(acc.second);
    if (center_alice) c.x_A -= ma.at(key) / static_cast<double>(acc.second);
    out.records.push_back(c);
  }
  return out;
}

struct ReconstructionResult {
  FockMatrix rho;
  int dim_per_mode = 0;
  long long iterations = 0;
  double final_ll = 0.0;
  std::vector<double> ll_trace;  // accepted log-likelihoods, non-decreasing
  bool converged = false;
  double outside01 = 0.0;  // diagonal weight outside the {0,1}x{0,1} block
};

namespace detail {

// Projector vectors T_j for every record, column-packed: T = T_A kron T_B,
// (T_mode)_n = psi_n(x) e^{+i n theta}. Then p_j = T_j^dag rho T_j.
inline FockMatrix projector_columns(const QuadratureBatch& batch, int d) {
  const std::size_t m = batch.records.size();
  FockMatrix v(d * d, static_cast<long long>(m));
  std::vector<cxd> ta(d), tb(d);
  for (std::size_t j = 0; j < m; ++j) {
    const auto& r = batch.records[j];
    for (int n = 0; n < d; ++n) {
      ta[n] = number_wavefunction(n, r.x_A) * std::polar(1.0, n * r.theta_A);
      tb[n] = number_wavefunction(n, r.x_B) * std::polar(1.0, n * r.theta_B);
    }
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) v(a * d + b, j) = ta[a] * tb[b];
  }
  return v;
}

inline double log_likelihood(const FockMatrix& rho, const FockMatrix& v) {
  const long long m = v.cols();
  double ll = 0.0;
  constexpr long long kChunk = 8192;
  for (long long j0 = 0; j0 < m; j0 += kChunk) {
    const long long b = std::min(kChunk, m - j0);
    const FockMatrix y = rho * v.middleCols(j0, b);
    for (long long j = 0; j < b; ++j) {
      double p = std::real(v.col(j0 + j).dot(y.col(j)));
      if (p < 1e-300) p = 1e-300;
      ll += std::log(p);
    }
  }
  return ll;
}

// One accumulation pass: returns R = (1/M) sum_j T_j T_j^dag / p_j and the
// log-likelihood of rho on the way.
inline double build_r(const FockMatrix& rho, const FockMatrix& v,
                      FockMatrix& r_out) {
  const long long dim = v.rows();
  const long long m = v.cols();
  r_out = FockMatrix::Zero(dim, dim);
  double ll = 0.0;
  constexpr long long kChunk = 8192;
  FockMatrix u;
  for (long long j0 = 0; j0 < m; j0 += kChunk) {
    const long long b = std::min(kChunk, m - j0);
    const FockMatrix y = rho * v.middleCols(j0, b);
    u = v.middleCols(j0, b);
    for (long long j = 0; j < b; ++j) {
      double p = std::real(v.col(j0 + j).dot(y.col(j)));
      if (p < 1e-300) p = 1e-300;
      ll += std::log(p);
      u.col(j) *= 1.0 / std::sqrt(static_cast<double>(m) * p);
    }
    r_out.selfadjointView<Eigen::Lower>().rankUpdate(u, 1.0);
  }
  r_out = r_out.selfadjointView<Eigen::Lower>();
  return ll;
}

inline void hermitize_normalize(FockMatrix& rho) {
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double tr = std::real(rho.trace());
  if (!(tr > 0.0)) throw std::runtime_error("mle: state trace collapsed");
  rho /= tr;
}

}  // namespace detail

// Expectation-maximization fixed point rho <- normalize(R rho R). Plain steps
// are taken while the log-likelihood increases; on a decrease the step is
// retried in diluted form (I + lambda R) rho (I + lambda R)^dag with lambda
// halved until the likelihood improves, so the accepted trace is
// non-decreasing by construction.
inline ReconstructionResult mle_reconstruct(const QuadratureBatch& batch,
                                            int dim_per_mode = 3,
                                            long long max_iterations = 2000,
                                            double tol_per_sample = 1e-9) {
  if (batch.records.empty())
    throw std::invalid_argument("mle_reconstruct: empty batch");
  if (dim_per_mode < 2)
    throw std::invalid_argument("mle_reconstruct: dim_per_mode must be >= 2");
  {
    std::vector<long long> rel;
    for (const auto& r : batch.records)
      rel.push_back(detail::phase_key(r.theta_A - r.theta_B));
    std::sort(rel.begin(), rel.end());
    rel.erase(std::unique(rel.begin(), rel.end()), rel.end());
    if (rel.size() < 2)
      throw std::runtime_error(
          "mle_reconstruct: need >= 2 distinct relative phases for "
          "informational completeness");
  }

  const int d = dim_per_mode;
  const long long m = static_cast<long long>(batch.records.size());
  const double tol_total = tol_per_sample * static_cast<double>(m);
  const FockMatrix v = detail::projector_columns(batch, d);

  ReconstructionResult res;
  res.dim_per_mode = d;
  res.rho = FockMatrix::Identity(d * d, d * d) / static_cast<double>(d * d);

  double ll_curr = -std::numeric_limits<double>::infinity();
  FockMatrix r;
  for (long long it = 0; it < max_iterations; ++it) {
    const double ll = detail::build_r(res.rho, v, r);  // LL of current rho
    if (it == 0) {
      ll_curr = ll;
      res.ll_trace.push_back(ll);
    } else {
      // ll is the likelihood of the state accepted last iteration.
      const double gain = ll - ll_curr;
      ll_curr = ll;
      res.ll_trace.push_back(ll);
      if (gain < 0.0)
        throw std::logic_error("mle_reconstruct: accepted step lost likelihood");
      if (gain < tol_total) {
        res.converged = true;
        res.iterations = it;
        break;
      }
    }
    // Candidate full step; dilute on likelihood loss.
    FockMatrix cand = r * res.rho * r;
    detail::hermitize_normalize(cand);
    double ll_cand = detail::log_likelihood(cand, v);
    if (ll_cand < ll_curr) {
      const FockMatrix eye = FockMatrix::Identity(d * d, d * d);
      double lambda = 1.0;
      bool ok = false;
      for (int h = 0; h < 40; ++h) {
        lambda *= 0.5;
        const FockMatrix g = eye + lambda * r;
        cand = g * res.rho * g.adjoint();
        detail::hermitize_normalize(cand);
        ll_cand = detail::log_likelihood(cand, v);
        if (ll_cand >= ll_curr) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        // Numerical fixed point: no direction improves the likelihood.
        res.converged = true;
        res.iterations = it;
        break;
      }
    }
    res.rho = cand;
    res.iterations = it + 1;
  }
  if (!res.converged) {
    // Iteration budget exhausted after accepting a step whose likelihood was
    // never folded back into ll_curr.
    ll_curr = detail::log_likelihood(res.rho, v);
    res.ll_trace.push_back(ll_curr);
  }
  res.final_ll = ll_curr;
  res.outside01 = 1.0;
  for (int a = 0; a < std::min(2, d); ++a)
    for (int b = 0; b < std::min(2, d); ++b)
      res.outside01 -= std::real(res.rho(a * d + b, a * d + b));
  return res;
}

// Uhlmann fidelity F(a, b) = (tr sqrt(sqrt(a) b sqrt(a)))^2.
inline double state_fidelity(const FockMatrix& a, const FockMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("state_fidelity: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<FockMatrix> ea(a);
  FockMatrix sq = ea.eigenvectors() *
                  ea.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                  ea.eigenvectors().adjoint();
  Eigen::SelfAdjointEigenSolver<FockMatrix> em(sq * b * sq);
  double root_sum = 0.0;
  for (int i = 0; i < em.eigenvalues().size(); ++i)
    root_sum += std::sqrt(std::max(0.0, em.eigenvalues()(i)));
  return root_sum * root_sum;
}

// Compress a two-mode matrix to a smaller per-mode dimension, renormalized.
inline FockMatrix truncate_two_mode(const FockMatrix& rho, int d_from, int d_to) {
  if (d_to > d_from)
    throw std::invalid_argument("truncate_two_mode: target exceeds source dim");
  if (rho.rows() != d_from * d_from)
    throw std::invalid_argument("truncate_two_mode: dimension mismatch");
  FockMatrix out(d_to * d_to, d_to * d_to);
  for (int a = 0; a < d_to; ++a)
    for (int b = 0; b < d_to; ++b)
      for (int c = 0; c < d_to; ++c)
        for (int e = 0; e < d_to; ++e)
          out(a * d_to + b, c * d_to + e) =
              rho(a * d_from + b, c * d_from + e);
  const double tr = std::real(out.trace());
  if (!(tr > 0.0))
    throw std::runtime_error("truncate_two_mode: trace collapsed");
  return out / tr;
}

// Concurrence witness on the {|00>,|01>,|10>,|11>} block:
// C = 2 (|<01|rho|10>| - sqrt(<00|rho|00> <11|rho|11>)), not clamped at 0.
inline double concurrence(const FockMatrix& rho) {
  const int d = deduce_mode_dim(rho);
  if (d < 2) throw std::invalid_argument("concurrence: need per-mode dim >= 2");
  const double r01 = std::abs(rho(1, d));
  const double r00 = std::max(0.0, std::real(rho(0, 0)));
  const double r11 = std::max(0.0, std::real(rho(d + 1, d + 1)));
  return 2.0 * (r01 - std::sqrt(r00 * r11));
}

enum class LossPipeline { analytic, monte_carlo };

struct LossCurveOptions {
  LossPipeline pipeline = LossPipeline::analytic;
  long long shots_per_pair = 20000;
  int dim_per_mode = 3;
  StreamSeed stream{0, 0};
  long long max_iterations = 2000;
  double tol_per_sample = 1e-9;
  bool filter = true;
};

struct LossCurvePoint {
  double t = 0.0;
  double concurrence = 0.0;
  bool converged = true;
  long long samples = 0;
};

// Loss sweep of the concurrence. The displacement-loss-undisplacement chain
// collapses exactly in the frame representation: loss(t) maps alpha_B to
// sqrt(t) alpha_B, the undisplacement cancels it, and what remains is the
// loss channel on Bob's micro block. The analytic pipeline evaluates the
// witness on that matrix; the monte_carlo pipeline additionally samples
// quadratures and reconstructs.
inline std::vector<LossCurvePoint> concurrence_vs_loss(
    const ImperfectionParams& params, cxd alpha, const std::vector<double>& t_grid,
    const LossCurveOptions& options = {}) {
  params.validate();
  if (params.sigma_phi != 0.0)
    throw std::invalid_argument(
        "concurrence_vs_loss: sigma_phi must be 0 (phase noise requires the "
        "per-shot sampled pipeline)");
  const MicroMacroState state = make_state(params, alpha);
  std::vector<LossCurvePoint> curve;
  curve.reserve(t_grid.size());
  const auto phases = default_phase_pairs();
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    if (!(t >= 0.0 && t <= 1.0))
      throw std::invalid_argument("concurrence_vs_loss: t grid must lie in [0,1]");
    const FockMatrix rho_t =
        loss_mode_b(state.micro_AB, state.dim_a, state.dim_b, t);
    LossCurvePoint point;
    point.t = t;
    if (options.pipeline == LossPipeline::analytic) {
      point.concurrence = concurrence(rho_t);
    } else {
      const long long span =
          static_cast<long long>(phases.size()) * (options.shots_per_pair + 1);
      const StreamSeed sub{options.stream.seed,
                           options.stream.base + static_cast<long long>(i) * span};
      QuadratureBatch batch =
          sample_quadratures(rho_t, phases, options.shots_per_pair, sub);
      if (options.filter) batch = residual_filter(batch);
      const ReconstructionResult rec =
          mle_reconstruct(batch, options.dim_per_mode, options.max_iterations,
                          options.tol_per_sample);
      point.concurrence = concurrence(rec.rho);
      point.converged = rec.converged;
      point.samples = static_cast<long long>(batch.records.size());
    }
    curve.push_back(point);
  }
  return curve;
}

}  // namespace dfsim
