#include "truncest/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "truncest/rng.hpp"
#include "truncest/trunc_sampler.hpp"

namespace truncest {

namespace {

void require_grid(const std::vector<int64_t>& grid, const char* name) {
  if (grid.empty()) throw BadConfig(std::string(name) + " must be nonempty");
  for (size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) {
      throw BadConfig(std::string(name) + " must be strictly increasing");
    }
  }
}

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

}  // namespace

uint64_t derive_seed(uint64_t root, uint64_t a, uint64_t b) {
  return CounterRng(root, RngPurpose::kInit, a).u64_at(b);
}

void ExperimentSpec::validate() const {
  if (name.empty()) throw BadConfig("experiment.name is required");
  if (trials < 1) throw BadConfig("experiment.trials must be positive");
  if (!n_grid.empty()) require_grid(n_grid, "experiment.n_grid");
  if (!iter_grid.empty()) require_grid(iter_grid, "experiment.iter_grid");
  fit.validate();
}

NaturalParams gen_chain_precision(int d, double w) {
  if (d < 1) throw std::invalid_argument("gen_chain_precision: d >= 1");
  if (!(std::abs(w) < 0.5)) {
    throw std::invalid_argument(
        "gen_chain_precision: |w| < 0.5 keeps the chain SPD");
  }
  NaturalParams q;
  q.theta = Matrix::Identity(d, d);
  for (int i = 0; i + 1 < d; ++i) {
    q.theta(i, i + 1) = w;
    q.theta(i + 1, i) = w;
  }
  q.v = Vector::Zero(d);
  return q;
}

TruncationOracle gen_box_truncation(int d, double lo, double hi) {
  if (!(lo < hi)) throw BadConfig("box truncation requires lo < hi");
  return TruncationOracle::box(Vector::Constant(d, lo),
                               Vector::Constant(d, hi));
}

RegressionInstance gen_regression_instance(int64_t n, int d, int k,
                                           DesignScheme scheme, double clip,
                                           double omega_magnitude,
                                           const IntervalUnion& s,
                                           uint64_t seed) {
  if (n < 1 || d < 1 || k < 0 || k > d) {
    throw std::invalid_argument("gen_regression_instance: bad shape");
  }
  if (scheme == DesignScheme::kGaussClipped && !(clip > 0.0)) {
    throw std::invalid_argument("gen_regression_instance: clip > 0");
  }

  RegressionInstance inst;
  inst.X.resize(n, d);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(seed, RngPurpose::kDesignEntry, static_cast<uint64_t>(i));
    for (int j = 0; j < d; ++j) {
      double x = rng.normal();
      if (scheme == DesignScheme::kGaussClipped) {
        x = std::min(std::max(x, -clip), clip);
      }
      inst.X(i, j) = x;
    }
  }

  // Uniform k-subset by partial Fisher-Yates, then random signs.
  CounterRng pick(seed, RngPurpose::kSupportPick, 0);
  std::vector<int> perm(d);
  for (int j = 0; j < d; ++j) perm[j] = j;
  for (int j = 0; j < k; ++j) {
    const int r = j + static_cast<int>(pick.uniform() * (d - j));
    std::swap(perm[j], perm[std::min(r, d - 1)]);
  }
  std::vector<int> support(perm.begin(), perm.begin() + k);
  std::sort(support.begin(), support.end());

  Vector omega = Vector::Zero(d);
  for (int j : support) {
    omega[j] = pick.uniform() < 0.5 ? -omega_magnitude : omega_magnitude;
  }

  const Vector mu = inst.X * omega;
  double min_mass = 1.0;
  for (int64_t i = 0; i < n; ++i) {
    double mass = 0.0;
    for (const auto& [a, b] : s.segments()) {
      mass += std_segment_mass(a - mu[i], b - mu[i]);
    }
    min_mass = std::min(min_mass, mass);
  }
  if (!(min_mass > 1e-4)) {
    throw SurvivalTooLow(
        "gen_regression_instance: configuration fails the survival pre-check");
  }

  inst.y.resize(n);
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    CounterRng rng(seed, RngPurpose::kResponseDraw, static_cast<uint64_t>(i));
    inst.y[i] = sample_truncated_normal_scalar(mu[i], s, rng);
  }

  inst.s_oracle = TruncationOracle::intervals(s);
  inst.omega_star = omega;
  inst.support = support;
  inst.validate();
  return inst;
}

// ---------------------------------------------------------------------------
// GGM sweeps

namespace {

struct GgmProblem {
  NaturalParams truth;
  GaussianParams truth_moment;
  TruncationOracle oracle = TruncationOracle::full_space(1);
};

GgmProblem make_ggm_problem(const ExperimentSpec& spec) {
  GgmProblem p;
  p.truth = gen_chain_precision(spec.d, spec.offdiag);
  p.truth_moment = to_moment(p.truth);
  p.oracle = spec.untruncated_control
                 ? TruncationOracle::full_space(spec.d)
                 : gen_box_truncation(spec.d, spec.box_lo, spec.box_hi);
  return p;
}

FitConfig fit_config_for(const ExperimentSpec& spec, int64_t n,
                         uint64_t fit_seed) {
  FitConfig cfg = spec.fit;
  cfg.seed = fit_seed;
  if (cfg.lambda < 0.0) {
    throw BadConfig("experiment fit.lambda must be >= 0");
  }
  if (cfg.lambda == 0.0 && !spec.untruncated_control) {
    cfg.lambda = lambda_data_driven(n, spec.d);
  }
  return cfg;
}

SampleBatch make_batch(const GgmProblem& p, int64_t n, uint64_t gen_seed,
                       const ExperimentSpec& spec) {
  FitConfig gen_cfg;
  gen_cfg.seed = gen_seed;
  gen_cfg.max_rejects_per_sample = spec.fit.max_rejects_per_sample;
  return sample_truncated_mvn(p.truth_moment, p.oracle, n, gen_cfg);
}

}  // namespace

std::vector<FrobRow> run_frobenius_vs_samples(const ExperimentSpec& spec) {
  spec.validate();
  require_grid(spec.n_grid, "experiment.n_grid");
  const GgmProblem p = make_ggm_problem(spec);

  std::vector<FrobRow> rows;
  for (const int64_t n : spec.n_grid) {
    for (int trial = 0; trial < spec.trials; ++trial) {
      const uint64_t gen_seed = derive_seed(spec.seed, n, 2 * trial);
      const uint64_t fit_seed = derive_seed(spec.seed, n, 2 * trial + 1);
      const SampleBatch batch = make_batch(p, n, gen_seed, spec);
      const FitConfig cfg = fit_config_for(spec, n, fit_seed);
      const EstimateReport rep = fit_ggm_psgd(batch, p.oracle, cfg, p.truth);
      rows.push_back({n, trial, rep.metrics.at("frob_sigma_err"),
                      rep.metrics.at("l2_mu_err")});
    }
  }
  return rows;
}

std::vector<ErrIterRow> run_error_vs_iterations(const ExperimentSpec& spec) {
  spec.validate();
  require_grid(spec.n_grid, "experiment.n_grid");
  require_grid(spec.iter_grid, "experiment.iter_grid");
  const GgmProblem p = make_ggm_problem(spec);
  const int64_t n = spec.n_grid.back();

  FitConfig cfg = fit_config_for(spec, n, derive_seed(spec.seed, n, 1));
  cfg.max_iters = spec.iter_grid.back();
  for (const int64_t it : spec.iter_grid) {
    if (it > 0 && it % cfg.snapshot_every != 0) {
      throw BadConfig("iter_grid entries must be multiples of snapshot_every");
    }
  }
  const SampleBatch batch = make_batch(p, n, derive_seed(spec.seed, n, 0), spec);
  const EstimateReport rep = fit_ggm_psgd(batch, p.oracle, cfg, p.truth);

  std::vector<ErrIterRow> rows;
  for (const int64_t it : spec.iter_grid) {
    const auto found =
        std::find_if(rep.trace.begin(), rep.trace.end(),
                     [&](const auto& e) { return e.first == it; });
    if (found == rep.trace.end()) {
      throw std::runtime_error("trace snapshot missing for iteration " +
                               std::to_string(it));
    }
    rows.push_back({it, found->second.at("frob_sigma_err"),
                    found->second.at("l2_mu_err")});
  }
  return rows;
}

std::vector<HammingRow> run_hamming_experiments(const ExperimentSpec& spec) {
  spec.validate();
  require_grid(spec.n_grid, "experiment.n_grid");
  require_grid(spec.iter_grid, "experiment.iter_grid");
  const GgmProblem p = make_ggm_problem(spec);

  std::vector<HammingRow> rows;

  // Sweep 1: Hamming vs iterations at the spec's iteration-sweep sample sizes.
  for (const int64_t n : spec.iter_sweep_ns) {
    for (int trial = 0; trial < spec.trials; ++trial) {
      const uint64_t gen_seed = derive_seed(spec.seed, 7 * n + 1, 2 * trial);
      const uint64_t fit_seed = derive_seed(spec.seed, 7 * n + 1, 2 * trial + 1);
      const SampleBatch batch = make_batch(p, n, gen_seed, spec);
      FitConfig cfg = fit_config_for(spec, n, fit_seed);
      cfg.max_iters = spec.iter_grid.back();
      const EstimateReport rep = fit_ggm_psgd(batch, p.oracle, cfg, p.truth);
      for (const int64_t it : spec.iter_grid) {
        const auto found =
            std::find_if(rep.trace.begin(), rep.trace.end(),
                         [&](const auto& e) { return e.first == it; });
        if (found == rep.trace.end()) continue;
        rows.push_back({"iters_n" + std::to_string(n), it, trial,
                        static_cast<int>(found->second.at("hamming"))});
      }
    }
  }

  // Sweep 2: Hamming vs samples at the full iteration budget.
  for (const int64_t n : spec.n_grid) {
    for (int trial = 0; trial < spec.trials; ++trial) {
      const uint64_t gen_seed = derive_seed(spec.seed, 13 * n + 3, 2 * trial);
      const uint64_t fit_seed = derive_seed(spec.seed, 13 * n + 3, 2 * trial + 1);
      const SampleBatch batch = make_batch(p, n, gen_seed, spec);
      FitConfig cfg = fit_config_for(spec, n, fit_seed);
      cfg.max_iters = spec.iter_grid.back();
      const EstimateReport rep = fit_ggm_psgd(batch, p.oracle, cfg, p.truth);
      rows.push_back({"samples", n, trial,
                      static_cast<int>(rep.metrics.at("hamming"))});
    }
  }
  return rows;
}

std::vector<RegRecoveryRow> run_regression_recovery(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<RegRecoveryRow> rows(spec.trials);
  for (int trial = 0; trial < spec.trials; ++trial) {
    const uint64_t gen_seed = derive_seed(spec.seed, 0x5eed, 2 * trial);
    const uint64_t fit_seed = derive_seed(spec.seed, 0x5eed, 2 * trial + 1);
    const RegressionInstance inst = gen_regression_instance(
        spec.reg_n, spec.reg_d, spec.reg_k, spec.scheme, spec.clip,
        spec.omega_magnitude, spec.response_set, gen_seed);

    FitConfig cfg = spec.fit;
    cfg.seed = fit_seed;

    if (spec.reg_k == 0) {
      // Empty support: no Gram block to audit. Lambda sits above the
      // gradient norm at zero, which makes the zero vector optimal.
      const double alpha_min = audit_survival(inst, Vector::Zero(inst.d()));
      const Vector grad0 = reg_gradient(Vector::Zero(inst.d()), inst);
      const double lambda = 2.0 * std::max(1e-8, grad0.cwiseAbs().maxCoeff());
      const RegFitResult fit = fit_trunc_lasso(inst, lambda, cfg);
      const ErrorMetrics metrics =
          error_metrics(fit.omega_hat, *inst.omega_star);
      rows[trial] = {trial,
                     alpha_min,
                     0.0,
                     0.0,
                     audit_normalization(inst.X),
                     0.0,
                     grad0.cwiseAbs().maxCoeff() < lambda,
                     metrics.no_false_inclusion,
                     metrics.linf,
                     metrics.l2};
      continue;
    }

    const AuditReport audit =
        run_audit(inst, *inst.support, spec.re_trials, fit_seed);

    // Lambda uses the survival at the solver's starting point omega = 0, a
    // set-level quantity; the report still carries the truth-level minimum.
    const double alpha0 = audit_survival(inst, Vector::Zero(inst.d()));
    const double lambda =
        lambda_reg_default(alpha0, audit.sigma_min, audit.c_normalization,
                           static_cast<double>(spec.reg_k), spec.lambda_c);

    const RegFitResult fit = fit_trunc_lasso(inst, lambda, cfg);
    const RegFitResult restricted =
        fit_restricted(inst, *inst.support, lambda, cfg);
    const DualCertificate cert = dual_certificate(inst, restricted, lambda);
    const ErrorMetrics metrics = error_metrics(fit.omega_hat, *inst.omega_star);

    rows[trial] = {trial,
                   audit.alpha_min,
                   audit.sigma_min,
                   audit.beta_incoherence,
                   audit.c_normalization,
                   audit.theorem_ratio,
                   cert.feasible,
                   metrics.no_false_inclusion,
                   metrics.linf,
                   metrics.l2};
  }
  return rows;
}

// ---------------------------------------------------------------------------
// CSV emitters

void write_frob_csv(const std::string& path, const std::vector<FrobRow>& rows) {
  auto out = open_out(path);
  out << "n,trial,sigma_err,mu_err\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.trial << ',' << g17(r.sigma_err) << ','
        << g17(r.mu_err) << '\n';
  }
}

void write_err_iter_csv(const std::string& path,
                        const std::vector<ErrIterRow>& rows) {
  auto out = open_out(path);
  out << "iter,sigma_err,mu_err\n";
  for (const auto& r : rows) {
    out << r.iter << ',' << g17(r.sigma_err) << ',' << g17(r.mu_err) << '\n';
  }
}

void write_hamming_csv(const std::string& path,
                       const std::vector<HammingRow>& rows) {
  auto out = open_out(path);
  out << "sweep,x,trial,hamming\n";
  for (const auto& r : rows) {
    out << r.sweep << ',' << r.x << ',' << r.trial << ',' << r.hamming << '\n';
  }
}

void write_reg_recovery_csv(const std::string& path,
                            const std::vector<RegRecoveryRow>& rows) {
  auto out = open_out(path);
  out << "trial,alpha_min,sigma_min,beta,C,ratio,feasible,no_false_inclusion,"
         "linf,l2\n";
  for (const auto& r : rows) {
    out << r.trial << ',' << g17(r.alpha_min) << ',' << g17(r.sigma_min) << ','
        << g17(r.beta) << ',' << g17(r.C) << ',' << g17(r.ratio) << ','
        << (r.feasible ? 1 : 0) << ',' << (r.no_false_inclusion ? 1 : 0) << ','
        << g17(r.linf) << ',' << g17(r.l2) << '\n';
  }
}

}  // namespace truncest
