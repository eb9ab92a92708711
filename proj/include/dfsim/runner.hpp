#pragma once

// Scenario runner: a validated ExperimentConfig in, deterministic result files
// plus a report.json out. Reports carry named metrics with standard errors so
// two runs can be compared at 5 combined sigma regardless of seed; run facts
// that legitimately differ between seeds (iteration counts, bin occupancy)
// live in a separate details block that comparison ignores.

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "dfsim/conditional.hpp"
#include "dfsim/config.hpp"
#include "dfsim/detection.hpp"
#include "dfsim/displaced.hpp"
#include "dfsim/tomography.hpp"
#include "dfsim/version.hpp"

namespace dfsim {

struct Metric {
  double value = 0.0;
  double se = 0.0;
};

struct RunReport {
  std::string version;
  std::string scenario;
  std::uint64_t seed = 0;
  std::string timestamp;    // ISO 8601 UTC, informational only
  double duration_s = 0.0;  // informational only
  nlohmann::json config;
  std::map<std::string, Metric> metrics;   // estimands, comparable across seeds
  std::map<std::string, double> details;   // run facts, not compared
  std::vector<std::string> files;          // result files within out_dir
};

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[72];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec);
  return buf;
}

inline void emit_file(const ExperimentConfig& cfg, const std::string& name,
                      const std::string& content, RunReport& rep) {
  const std::string path = cfg.out_dir + "/" + name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  rep.files.push_back(name);
}

inline double binomial_se(double p, long long n) {
  return n > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(n)) : 0.0;
}

inline double sample_sd(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (n - 1.0));
}

}  // namespace detail

inline void run_fig2(const ExperimentConfig& cfg, RunReport& rep) {
  const BinSpec bins{cfg.bin_count, cfg.bin_lo, cfg.bin_hi};
  SweepOptions opt;
  opt.engine = cfg.engine;
  opt.subtract_reference = cfg.subtract_reference;
  const StreamSeed stream{cfg.seed, 0};
  const SweepResult s = conditional_sweep(cfg.params, cfg.alpha, cfg.theta_A,
                                          cfg.shots, bins, stream, opt);

  const VarianceRatioSummary ratio = smoothed_variance_ratio(s);
  if (!ratio.valid)
    throw std::runtime_error(
        "fig2-sweep: variance ratio undefined (too few populated bins)");
  rep.metrics["variance_ratio"] = {ratio.ratio, ratio.se};

  const double a2 = s.alpha_squared;
  const double a = std::sqrt(a2);
  int center = 0;
  const int nb = static_cast<int>(s.bin_centers.size());
  for (int b = 1; b < nb; ++b)
    if (std::fabs(s.bin_centers[b]) < std::fabs(s.bin_centers[center]))
      center = b;
  rep.metrics["variance_center_norm"] = {s.variance[center] / a2,
                                         s.variance_se[center] / a2};

  double worst = 0.0, worst_se = 0.0;
  long long flagged = 0;
  for (int b = 0; b < nb; ++b) {
    if (s.flagged[b]) {
      ++flagged;
      continue;
    }
    const double m = std::fabs(s.mean[b]) / a;
    if (m > worst) {
      worst = m;
      worst_se = s.mean_se[b] / a;
    }
  }
  rep.metrics["max_abs_mean_norm"] = {worst, worst_se};
  rep.details["flagged_bins"] = static_cast<double>(flagged);

  std::ostringstream tsv;
  tsv << "center\tcount\tmean\tmean_se\tvariance\tvariance_se\tflagged\n";
  for (int b = 0; b < nb; ++b)
    tsv << detail::fmt17(s.bin_centers[b]) << '\t' << s.counts[b] << '\t'
        << detail::fmt17(s.mean[b]) << '\t' << detail::fmt17(s.mean_se[b])
        << '\t' << detail::fmt17(s.variance[b]) << '\t'
        << detail::fmt17(s.variance_se[b]) << '\t'
        << static_cast<int>(s.flagged[b]) << '\n';
  detail::emit_file(cfg, "fig2_sweep.tsv", tsv.str(), rep);
}

// Binary state discrimination by thresholding Bob's energy reading.
// intrinsic = true measures the two displaced superposition components
// directly (preparation imperfections do not enter; transmission does) with
// the threshold offset from the displaced mean energy. Otherwise Alice's
// outcome windows at +-window_center select the experimentally conditioned
// states and the threshold acts on the reference-subtracted difference.
inline void run_discrimination(const ExperimentConfig& cfg, RunReport& rep) {
  const StreamSeed stream{cfg.seed, 0};
  if (cfg.intrinsic) {
    const FockVector vp = cat_component(+1);
    const FockVector vm = cat_component(-1);
    DisplacedState plus{vp * vp.adjoint(), cfg.alpha, 0.0};
    DisplacedState minus{vm * vm.adjoint(), cfg.alpha, 0.0};
    if (cfg.params.transmission < 1.0) {
      plus = loss(plus, cfg.params.transmission);
      minus = loss(minus, cfg.params.transmission);
    }
    const double threshold = std::norm(plus.alpha) + cfg.threshold;

    std::vector<long long> sp(cfg.shots), sm(cfg.shots);
    if (cfg.engine == Engine::asymptotic) {
      const AsymptoticSampler smp(plus.alpha,
                                  static_cast<int>(plus.micro.rows()));
      const auto tp = smp.prepare(plus.micro);
      const auto tm = smp.prepare(minus.micro);
      for (long long i = 0; i < cfg.shots; ++i) {
        Rng rng = stream.at(i);
        sp[i] = smp.draw(tp, rng);
      }
      for (long long i = 0; i < cfg.shots; ++i) {
        Rng rng = stream.at(cfg.shots + i);
        sm[i] = smp.draw(tm, rng);
      }
    } else {
      const PmfSampler pp(photon_pmf_exact(plus, default_exact_dim(plus.alpha)));
      const PmfSampler pm(
          photon_pmf_exact(minus, default_exact_dim(minus.alpha)));
      for (long long i = 0; i < cfg.shots; ++i) {
        Rng rng = stream.at(i);
        sp[i] = pp.draw(rng);
      }
      for (long long i = 0; i < cfg.shots; ++i) {
        Rng rng = stream.at(cfg.shots + i);
        sm[i] = pm.draw(rng);
      }
    }

    const DiscriminationResult res = discriminate(sp, sm, threshold);
    const double sep = detail::binomial_se(res.error_plus, cfg.shots);
    const double sem = detail::binomial_se(res.error_minus, cfg.shots);
    const double sea = 0.5 * std::hypot(sep, sem);
    rep.metrics["error_plus"] = {res.error_plus, sep};
    rep.metrics["error_minus"] = {res.error_minus, sem};
    rep.metrics["avg_error"] = {res.avg_error, sea};
    rep.metrics["certainty"] = {1.0 - res.avg_error, sea};
    rep.details["threshold"] = threshold;
    return;
  }

  const std::array<Window, 3> windows{
      Window{-cfg.window_center, cfg.window_half_width},
      Window{0.0, cfg.window_half_width},
      Window{cfg.window_center, cfg.window_half_width}};
  SweepOptions opt;
  opt.engine = cfg.engine;
  opt.subtract_reference = cfg.subtract_reference;
  const auto h = histograms_I_II_III(cfg.params, cfg.alpha, 0.0, cfg.shots,
                                     windows, stream, opt);

  // Window III (Alice high) plays the plus state, window I the minus state.
  const DiscriminationResult res =
      discriminate(h[2].samples, h[0].samples, cfg.threshold);
  const double sep = detail::binomial_se(res.error_plus, h[2].count);
  const double sem = detail::binomial_se(res.error_minus, h[0].count);
  const double sea = 0.5 * std::hypot(sep, sem);
  rep.metrics["error_plus"] = {res.error_plus, sep};
  rep.metrics["error_minus"] = {res.error_minus, sem};
  rep.metrics["avg_error"] = {res.avg_error, sea};
  rep.metrics["certainty"] = {1.0 - res.avg_error, sea};

  static const char* roman[3] = {"I", "II", "III"};
  for (int w = 0; w < 3; ++w) {
    const double n = static_cast<double>(h[w].count);
    rep.metrics[std::string("window_mean_norm_") + roman[w]] = {
        h[w].mean / cfg.alpha, std::sqrt(h[w].variance / n) / cfg.alpha};
    rep.details[std::string("count_") + roman[w]] = n;
    std::ostringstream tsv;
    tsv << "bin_center\tpmf\n";
    for (int b = 0; b < kHistBins; ++b)
      tsv << detail::fmt17(h[w].bin_lo + (b + 0.5) * h[w].bin_width) << '\t'
          << detail::fmt17(h[w].pmf[b]) << '\n';
    detail::emit_file(cfg, std::string("histogram_") + roman[w] + ".tsv",
                      tsv.str(), rep);
  }
  rep.details["threshold"] = cfg.threshold;
}

namespace detail {

inline std::string matrix_text(const FockMatrix& m) {
  std::ostringstream out;
  out << "rows " << m.rows() << " cols " << m.cols() << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out << i << ' ' << j << ' ' << fmt17(std::real(m(i, j))) << ' '
          << fmt17(std::imag(m(i, j))) << '\n';
  return out.str();
}

// Ground truth at the reconstruction dimension: truncate and renormalize when
// smaller, zero-pad when larger.
inline FockMatrix resize_two_mode(const FockMatrix& rho, int d_from, int d_to) {
  if (d_to == d_from) return rho;
  if (d_to < d_from) return truncate_two_mode(rho, d_from, d_to);
  FockMatrix out = FockMatrix::Zero(d_to * d_to, d_to * d_to);
  for (int a = 0; a < d_from; ++a)
    for (int b = 0; b < d_from; ++b)
      for (int c = 0; c < d_from; ++c)
        for (int e = 0; e < d_from; ++e)
          out(a * d_to + b, c * d_to + e) = rho(a * d_from + b, c * d_from + e);
  return out;
}

}  // namespace detail

inline void run_tomography(const ExperimentConfig& cfg, RunReport& rep) {
  const MicroMacroState state = make_state(cfg.params, cfg.alpha);
  const FockMatrix rho_full =
      loss_mode_b(state.micro_AB, state.dim_a, state.dim_b, cfg.loss_t);
  const int d = cfg.dim_per_mode;
  const FockMatrix rho_true =
      detail::resize_two_mode(rho_full, state.dim_b, d);

  const auto phases = default_phase_pairs();
  const StreamSeed stream{cfg.seed, 0};
  QuadratureBatch batch =
      sample_quadratures(rho_full, phases, cfg.shots_per_pair, stream);
  if (cfg.residual_alpha > 0.0) apply_residual_offset(batch, cfg.residual_alpha);
  if (cfg.filter) batch = residual_filter(batch);

  const ReconstructionResult rec =
      mle_reconstruct(batch, d, cfg.max_iterations, cfg.tolerance);
  const double fid = state_fidelity(rho_true, rec.rho);
  const double c_hat = concurrence(rec.rho);
  const double c_true = concurrence(rho_true);

  // Disjoint quarter reconstructions give honest spread estimates for the
  // nonlinear functionals; floors cover the quarter-vs-full scale mismatch.
  double se_f = 0.0, se_c = 0.0, se_o = 0.0;
  if (cfg.split_se && cfg.shots_per_pair >= 400) {
    std::array<QuadratureBatch, 4> quarter;
    for (std::size_t j = 0; j < batch.records.size(); ++j)
      quarter[j % 4].records.push_back(batch.records[j]);
    std::vector<double> fs, cs, os;
    for (const auto& q : quarter) {
      const ReconstructionResult r =
          mle_reconstruct(q, d, cfg.max_iterations, cfg.tolerance);
      fs.push_back(state_fidelity(rho_true, r.rho));
      cs.push_back(concurrence(r.rho));
      os.push_back(r.outside01);
    }
    se_f = std::max(detail::sample_sd(fs) / 2.0, 0.001);
    se_c = std::max(detail::sample_sd(cs) / 2.0, 0.002);
    se_o = std::max(detail::sample_sd(os) / 2.0, 0.002);
  }

  rep.metrics["fidelity"] = {fid, se_f};
  rep.metrics["concurrence_hat"] = {c_hat, se_c};
  rep.metrics["concurrence_true"] = {c_true, 0.0};
  rep.metrics["outside01"] = {rec.outside01, se_o};
  rep.details["iterations"] = static_cast<double>(rec.iterations);
  rep.details["converged"] = rec.converged ? 1.0 : 0.0;
  rep.details["samples"] = static_cast<double>(batch.records.size());
  rep.details["final_ll"] = rec.final_ll;

  detail::emit_file(cfg, "rho_true.txt", detail::matrix_text(rho_true), rep);
  detail::emit_file(cfg, "rho_hat.txt", detail::matrix_text(rec.rho), rep);
  std::ostringstream tsv;
  tsv << "iteration\tlog_likelihood\n";
  for (std::size_t i = 0; i < rec.ll_trace.size(); ++i)
    tsv << i << '\t' << detail::fmt17(rec.ll_trace[i]) << '\n';
  detail::emit_file(cfg, "ll_trace.tsv", tsv.str(), rep);
}

inline void run_loss_sweep(const ExperimentConfig& cfg, RunReport& rep) {
  LossCurveOptions opt;
  opt.pipeline = cfg.pipeline == "analytic" ? LossPipeline::analytic
                                            : LossPipeline::monte_carlo;
  opt.shots_per_pair = cfg.shots_per_pair;
  opt.dim_per_mode = cfg.dim_per_mode;
  opt.stream = StreamSeed{cfg.seed, 0};
  opt.max_iterations = cfg.max_iterations;
  opt.tol_per_sample = cfg.tolerance;
  opt.filter = cfg.filter;

  const auto curve = concurrence_vs_loss(cfg.params, cfg.alpha, cfg.t_grid, opt);

  std::vector<std::string> keys;
  for (const auto& p : curve) {
    char key[64];
    std::snprintf(key, sizeof(key), "c_t%g", p.t);
    keys.emplace_back(key);
    rep.metrics[key] = {p.concurrence, 0.0};
  }
  {
    std::set<std::string> distinct(keys.begin(), keys.end());
    if (distinct.size() != keys.size())
      throw std::invalid_argument(
          "loss-sweep: t_grid entries collide after formatting");
  }

  // Monte Carlo error bars from two independent half-size runs per point.
  const bool estimate_se =
      opt.pipeline == LossPipeline::monte_carlo && cfg.shots_per_pair >= 400;
  if (estimate_se) {
    LossCurveOptions half = opt;
    half.shots_per_pair = cfg.shots_per_pair / 2;
    half.stream = StreamSeed{cfg.seed, std::uint64_t(1) << 40};
    const auto ca = concurrence_vs_loss(cfg.params, cfg.alpha, cfg.t_grid, half);
    half.stream = StreamSeed{cfg.seed, std::uint64_t(1) << 41};
    const auto cb = concurrence_vs_loss(cfg.params, cfg.alpha, cfg.t_grid, half);
    for (std::size_t i = 0; i < curve.size(); ++i)
      rep.metrics[keys[i]].se = std::max(
          std::fabs(ca[i].concurrence - cb[i].concurrence) / 2.0, 0.005);
  }
  if (opt.pipeline == LossPipeline::monte_carlo)
    rep.details["mc_se_estimated"] = estimate_se ? 1.0 : 0.0;

  std::ostringstream tsv;
  tsv << "t\tconcurrence\tconverged\tsamples\n";
  for (const auto& p : curve)
    tsv << detail::fmt17(p.t) << '\t' << detail::fmt17(p.concurrence) << '\t'
        << (p.converged ? 1 : 0) << '\t' << p.samples << '\n';
  detail::emit_file(cfg, "loss_sweep.tsv", tsv.str(), rep);
}

// Cross-validation of the two photon-number engines on reference states whose
// exact pmf is feasible: total variation between the empirical distribution
// of asymptotic-engine draws and the exact-engine table.
inline void run_engine_xval(const ExperimentConfig& cfg, RunReport& rep) {
  FockMatrix vac = FockMatrix::Zero(1, 1);
  vac(0, 0) = 1.0;
  FockMatrix one = FockMatrix::Zero(2, 2);
  one(1, 1) = 1.0;
  const FockVector cp = cat_component(+1);
  const FockVector cm = cat_component(-1);
  const std::array<std::pair<const char*, FockMatrix>, 4> probes{
      std::make_pair("vacuum", vac), std::make_pair("one", one),
      std::make_pair("cat_plus", FockMatrix(cp * cp.adjoint())),
      std::make_pair("cat_minus", FockMatrix(cm * cm.adjoint()))};

  const int dim = default_exact_dim(cfg.alpha);
  const StreamSeed stream{cfg.seed, 0};
  std::ostringstream tsv;
  tsv << "state\tm\tp_exact\tp_emp\n";
  for (std::size_t s = 0; s < probes.size(); ++s) {
    const std::string name = probes[s].first;
    const FockMatrix& micro = probes[s].second;
    const DisplacedState st{micro, cfg.alpha, 0.0};
    const PhotonPmf pmf = photon_pmf_exact(st, dim);
    const AsymptoticSampler smp(cfg.alpha, static_cast<int>(micro.rows()));
    const auto target = smp.prepare(micro);

    std::vector<long long> hist(dim, 0);
    long long outside = 0;
    for (long long i = 0; i < cfg.shots; ++i) {
      Rng rng = stream.at(static_cast<long long>(s) * cfg.shots + i);
      const long long m = smp.draw(target, rng);
      if (m >= 0 && m < dim)
        ++hist[m];
      else
        ++outside;
    }

    const double n = static_cast<double>(cfg.shots);
    double tv = static_cast<double>(outside) / n;
    double var_sum = 0.0;
    for (int m = 0; m < dim; ++m) {
      const double pe = pmf.probabilities[m];
      const double pm = static_cast<double>(hist[m]) / n;
      tv += std::fabs(pm - pe);
      var_sum += pe * (1.0 - pe);
      tsv << name << '\t' << m << '\t' << detail::fmt17(pe) << '\t'
          << detail::fmt17(pm) << '\n';
    }
    tv += std::max(0.0, pmf.deficit);
    tv *= 0.5;

    rep.metrics["tv_" + name] = {tv, 0.5 * std::sqrt(var_sum / n)};
    rep.metrics["proposals_" + name] = {target.q_sup, 0.0};
    rep.details["deficit_" + name] = pmf.deficit;
  }
  detail::emit_file(cfg, "engine_xval.tsv", tsv.str(), rep);
}

inline nlohmann::json report_to_json(const RunReport& r) {
  nlohmann::json j;
  j["version"] = r.version;
  j["scenario"] = r.scenario;
  j["seed"] = r.seed;
  j["timestamp"] = r.timestamp;
  j["duration_s"] = r.duration_s;
  j["config"] = r.config;
  nlohmann::json m = nlohmann::json::object();
  for (const auto& [k, v] : r.metrics)
    m[k] = nlohmann::json{{"value", v.value}, {"se", v.se}};
  j["metrics"] = m;
  j["details"] = r.details;
  j["files"] = r.files;
  return j;
}

inline RunReport run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunReport rep;
  rep.version = kVersion;
  rep.scenario = cfg.scenario;
  rep.seed = cfg.seed;
  rep.timestamp = detail::utc_timestamp();
  rep.config = dump_config(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  if (cfg.scenario == "fig2-sweep")
    run_fig2(cfg, rep);
  else if (cfg.scenario == "discrimination")
    run_discrimination(cfg, rep);
  else if (cfg.scenario == "tomography")
    run_tomography(cfg, rep);
  else if (cfg.scenario == "loss-sweep")
    run_loss_sweep(cfg, rep);
  else if (cfg.scenario == "engine-xval")
    run_engine_xval(cfg, rep);
  else
    throw std::invalid_argument("run_experiment: unknown scenario " +
                                cfg.scenario);

  rep.duration_s = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  std::ofstream out(cfg.out_dir + "/report.json", std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write " + cfg.out_dir + "/report.json");
  out << report_to_json(rep).dump(2) << '\n';
  return rep;
}

inline nlohmann::json load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("report file not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("report parse error in " + path + ": " +
                                e.what());
  }
  return j;
}

struct CompareOutcome {
  bool pass = true;
  std::vector<std::string> lines;
};

// Metric-by-metric comparison of two reports. Same scenario and same metric
// set are schema requirements; values must agree within 5 combined standard
// errors, or exactly (relative 1e-12) when both claim to be deterministic.
inline CompareOutcome compare_reports(const nlohmann::json& a,
                                      const nlohmann::json& b) {
  CompareOutcome out;
  const std::string sa = a.value("scenario", "");
  const std::string sb = b.value("scenario", "");
  if (sa.empty() || sa != sb) {
    out.pass = false;
    out.lines.push_back("scenario mismatch: '" + sa + "' vs '" + sb + "'");
    return out;
  }
  if (!a.contains("metrics") || !a.at("metrics").is_object() ||
      !b.contains("metrics") || !b.at("metrics").is_object()) {
    out.pass = false;
    out.lines.push_back("missing metrics object");
    return out;
  }
  std::set<std::string> ka, kb;
  for (const auto& [k, v] : a.at("metrics").items()) {
    (void)v;
    ka.insert(k);
  }
  for (const auto& [k, v] : b.at("metrics").items()) {
    (void)v;
    kb.insert(k);
  }
  if (ka != kb) {
    out.pass = false;
    for (const auto& k : ka)
      if (kb.count(k) == 0) out.lines.push_back("metric only in first: " + k);
    for (const auto& k : kb)
      if (ka.count(k) == 0) out.lines.push_back("metric only in second: " + k);
    return out;
  }
  for (const auto& k : ka) {
    const auto& ma = a.at("metrics").at(k);
    const auto& mb = b.at("metrics").at(k);
    const double v1 = ma.value("value", std::nan(""));
    const double s1 = ma.value("se", 0.0);
    const double v2 = mb.value("value", std::nan(""));
    const double s2 = mb.value("se", 0.0);
    double tol = 5.0 * std::hypot(s1, s2);
    if (tol == 0.0) tol = 1e-12 * std::max(1.0, std::fabs(v1));
    const double diff = std::fabs(v1 - v2);
    const bool ok = std::isfinite(diff) && diff <= tol;
    char line[256];
    std::snprintf(line, sizeof(line),
                  "%-4s %-24s %.10g vs %.10g  |diff| %.3g  tol %.3g",
                  ok ? "ok" : "FAIL", k.c_str(), v1, v2, diff, tol);
    out.lines.push_back(line);
    if (!ok) out.pass = false;
  }
  return out;
}

}  // namespace dfsim
