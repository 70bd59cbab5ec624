// truncest: estimation from truncated Gaussian samples.
//
// Subcommands wire the library to files: gen-ggm / fit-ggm for the graphical
// model path, gen-reg / fit-reg / audit for the regression path, experiment
// for the synthetic sweeps, eval for aggregating reports. All numeric
// parameters live in a JSON config; flags carry only paths, the seed
// override, and the thread count.

#include <CLI11.hpp>
#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "truncest/assumption_audit.hpp"
#include "truncest/experiments.hpp"
#include "truncest/ggm_estimator.hpp"
#include "truncest/io.hpp"
#include "truncest/reg_estimator.hpp"
#include "truncest/trunc_sampler.hpp"

namespace fs = std::filesystem;
using namespace truncest;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<uint64_t> seed_override;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config = true) {
  auto* c = cmd->add_option("--config", args.config_path, "JSON config file");
  if (needs_config) c->required();
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--seed", args.seed_override,
                  "override every seed in the config");
  cmd->add_option("--threads", args.threads,
                  "OpenMP threads (0 = auto; never affects results)");
}

void apply_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

json load_config(const CommonArgs& args) {
  if (!fs::exists(args.config_path)) {
    throw BadConfig("config file not found: " + args.config_path);
  }
  return read_json_file(args.config_path);
}

fs::path ensure_out(const CommonArgs& args) {
  fs::path dir(args.out_dir);
  fs::create_directories(dir);
  return dir;
}

template <typename T>
T field(const json& j, const char* name, T fallback) {
  if (!j.contains(name)) return fallback;
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw BadConfig(std::string("config field '") + name + "' has wrong type");
  }
}

template <typename T>
T required_field(const json& j, const char* name) {
  if (!j.contains(name)) {
    throw BadConfig(std::string("config field '") + name + "' is required");
  }
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw BadConfig(std::string("config field '") + name + "' has wrong type");
  }
}

FitConfig parse_fit_config(const json& j, std::optional<uint64_t> seed_override,
                           int64_t n_for_lambda, int d_for_lambda) {
  FitConfig cfg;
  if (j.contains("lambda")) {
    const auto& l = j.at("lambda");
    if (l.is_string()) {
      if (l.get<std::string>() != "data-driven") {
        throw BadConfig("fit.lambda must be a number or \"data-driven\"");
      }
      cfg.lambda = lambda_data_driven(n_for_lambda, d_for_lambda,
                                      field<double>(j, "lambda_c0", 0.5));
    } else {
      cfg.lambda = l.get<double>();
    }
  }
  cfg.step0 = field<double>(j, "step0", cfg.step0);
  cfg.step_decay = field<double>(j, "step_decay", cfg.step_decay);
  cfg.max_iters = field<int64_t>(j, "max_iters", cfg.max_iters);
  cfg.mc_batch = field<int>(j, "mc_batch", cfg.mc_batch);
  cfg.eigen_floor = field<double>(j, "eigen_floor", cfg.eigen_floor);
  cfg.seed = field<uint64_t>(j, "seed", cfg.seed);
  if (j.contains("binarize")) {
    const auto& b = j.at("binarize");
    if (!b.is_array() || b.size() != 2) {
      throw BadConfig("fit.binarize must be [lo, hi]");
    }
    cfg.binarize_lo = b[0].get<double>();
    cfg.binarize_hi = b[1].get<double>();
  }
  cfg.max_rejects_per_sample =
      field<int64_t>(j, "max_rejects_per_sample", cfg.max_rejects_per_sample);
  cfg.snapshot_every = field<int64_t>(j, "snapshot_every", cfg.snapshot_every);
  cfg.tail_average = field<bool>(j, "tail_average", cfg.tail_average);
  if (seed_override) cfg.seed = *seed_override;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------

int cmd_gen_ggm(const CommonArgs& args) {
  apply_threads(args.threads);
  const json cfg = load_config(args);
  const fs::path out = ensure_out(args);

  const int d = required_field<int>(cfg, "d");
  const int64_t n = required_field<int64_t>(cfg, "n");
  const double offdiag = field<double>(cfg, "offdiag", 0.2);
  const uint64_t seed = args.seed_override
                            ? *args.seed_override
                            : required_field<uint64_t>(cfg, "seed");

  TruncationOracle oracle = cfg.contains("oracle")
                                ? oracle_from_json(cfg.at("oracle"))
                                : gen_box_truncation(d, -2.0, 2.0);
  if (oracle.dimension() != d) {
    throw BadConfig("config field 'oracle' dimension must equal 'd'");
  }

  const NaturalParams truth = gen_chain_precision(d, offdiag);
  const GaussianParams moment = to_moment(truth);

  FitConfig gen_cfg;
  gen_cfg.seed = seed;
  gen_cfg.max_rejects_per_sample =
      field<int64_t>(cfg, "max_rejects_per_sample", 1000000);
  const SampleBatch batch = sample_truncated_mvn(moment, oracle, n, gen_cfg);

  write_matrix_csv((out / "samples.csv").string(), batch.data);
  BatchMeta meta;
  meta.seed = seed;
  meta.accept_rate = batch.accept_rate;
  meta.oracle = oracle_to_json(oracle);
  write_batch_meta((out / "samples.meta.json").string(), meta);
  write_matrix_csv((out / "theta_star.csv").string(), truth.theta);
  write_matrix_csv((out / "mu_star.csv").string(), moment.mu);
  return 0;
}

int cmd_fit_ggm(const CommonArgs& args) {
  apply_threads(args.threads);
  const json cfg = load_config(args);
  const fs::path out = ensure_out(args);

  const auto samples_path = required_field<std::string>(cfg, "samples");
  const auto meta_path = required_field<std::string>(cfg, "meta");
  SampleBatch batch;
  batch.data = read_matrix_csv(samples_path);
  const BatchMeta meta = read_batch_meta(meta_path);
  batch.accept_rate = meta.accept_rate;
  batch.proposals_used =
      static_cast<int64_t>(batch.data.rows() / std::max(1e-12, meta.accept_rate));
  const TruncationOracle oracle = oracle_from_json(meta.oracle);

  std::optional<NaturalParams> truth;
  if (cfg.contains("truth_theta")) {
    NaturalParams t;
    t.theta = read_matrix_csv(cfg.at("truth_theta").get<std::string>());
    Vector mu = Vector::Zero(t.theta.rows());
    if (cfg.contains("truth_mu")) {
      const Matrix m = read_matrix_csv(cfg.at("truth_mu").get<std::string>());
      mu = m.col(0);
    }
    t.v = t.theta * mu;
    truth = std::move(t);
  }

  const FitConfig fit_cfg =
      parse_fit_config(cfg.contains("fit") ? cfg.at("fit") : json::object(),
                       args.seed_override, batch.n(), batch.d());

  const EstimateReport report = fit_ggm_psgd(batch, oracle, fit_cfg, truth);

  // Trace CSV with the pinned column set.
  {
    std::ofstream trace(out / "trace.csv");
    trace << "iter,frob_sigma_err,l2_mu_err,hamming,grad_inf_norm\n";
    char buf[64];
    for (const auto& [iter, m] : report.trace) {
      trace << iter;
      for (const char* key :
           {"frob_sigma_err", "l2_mu_err", "hamming", "grad_inf_norm"}) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.at(key));
        trace << ',' << buf;
      }
      trace << '\n';
    }
  }

  write_matrix_csv((out / "theta_hat.csv").string(), report.natural.theta);
  write_matrix_csv((out / "v_hat.csv").string(), report.natural.v);

  json rep;
  rep["lambda"] = fit_cfg.lambda;
  rep["metrics"] = report.metrics;
  rep["diagnostics"] = report.diagnostics;
  rep["files"] = {{"trace", "trace.csv"},
                  {"theta_hat", "theta_hat.csv"},
                  {"v_hat", "v_hat.csv"}};
  write_json_file((out / "report.json").string(), rep);
  return 0;
}

int cmd_gen_reg(const CommonArgs& args) {
  apply_threads(args.threads);
  const json cfg = load_config(args);
  const fs::path out = ensure_out(args);

  const int64_t n = required_field<int64_t>(cfg, "n");
  const int d = required_field<int>(cfg, "d");
  const int k = required_field<int>(cfg, "k");
  const auto scheme_name = field<std::string>(cfg, "scheme", "gauss-clipped");
  DesignScheme scheme;
  if (scheme_name == "gauss-iid") {
    scheme = DesignScheme::kGaussIid;
  } else if (scheme_name == "gauss-clipped") {
    scheme = DesignScheme::kGaussClipped;
  } else {
    throw BadConfig("config field 'scheme' must be gauss-iid or gauss-clipped");
  }
  const double clip = field<double>(cfg, "clip", 1.0);
  const double mag = field<double>(cfg, "omega_magnitude", 1.0);
  const uint64_t seed = args.seed_override
                            ? *args.seed_override
                            : required_field<uint64_t>(cfg, "seed");

  TruncationOracle oracle = cfg.contains("oracle")
                                ? oracle_from_json(cfg.at("oracle"))
                                : TruncationOracle::intervals(
                                      IntervalUnion::at_most(1.0));
  const RegressionInstance inst = gen_regression_instance(
      n, d, k, scheme, clip, mag, oracle.as_interval_union(), seed);

  write_matrix_csv((out / "X.csv").string(), inst.X);
  write_matrix_csv((out / "y.csv").string(), inst.y);
  write_json_file((out / "oracle.json").string(),
                  oracle_to_json(inst.s_oracle));
  json truth;
  truth["omega_star"] = std::vector<double>(
      inst.omega_star->data(), inst.omega_star->data() + inst.omega_star->size());
  truth["support"] = *inst.support;
  write_json_file((out / "truth.json").string(), truth);
  return 0;
}

RegressionInstance load_instance(const json& cfg) {
  RegressionInstance inst;
  inst.X = read_matrix_csv(required_field<std::string>(cfg, "X"));
  inst.y = read_matrix_csv(required_field<std::string>(cfg, "y")).col(0);
  inst.s_oracle = oracle_from_json(
      read_json_file(required_field<std::string>(cfg, "oracle")));
  if (cfg.contains("truth")) {
    const json truth = read_json_file(cfg.at("truth").get<std::string>());
    const auto omega = truth.at("omega_star").get<std::vector<double>>();
    inst.omega_star = Eigen::Map<const Vector>(omega.data(), omega.size());
    inst.support = truth.at("support").get<std::vector<int>>();
  }
  inst.validate();
  return inst;
}

int cmd_fit_reg(const CommonArgs& args) {
  apply_threads(args.threads);
  const json cfg = load_config(args);
  const fs::path out = ensure_out(args);
  const RegressionInstance inst = load_instance(cfg);

  double lambda = 0.0;
  if (!cfg.contains("lambda")) {
    throw BadConfig("config field 'lambda' is required");
  }
  if (cfg.at("lambda").is_object()) {
    const json& l = cfg.at("lambda");
    lambda = lambda_reg_default(required_field<double>(l, "alpha"),
                                required_field<double>(l, "sigma_min"),
                                required_field<double>(l, "C"),
                                required_field<double>(l, "k"),
                                field<double>(l, "c", 1.0));
  } else {
    lambda = cfg.at("lambda").get<double>();
  }

  const FitConfig fit_cfg =
      parse_fit_config(cfg.contains("fit") ? cfg.at("fit") : json::object(),
                       args.seed_override, inst.n(), inst.d());

  json rep;
  rep["lambda"] = lambda;

  RegFitResult fit;
  if (cfg.contains("restricted_support")) {
    fit = fit_restricted(inst,
                         cfg.at("restricted_support").get<std::vector<int>>(),
                         lambda, fit_cfg);
  } else {
    fit = fit_trunc_lasso(inst, lambda, fit_cfg);
  }
  rep["support_hat"] = fit.support_hat;
  rep["subgradient_residual"] = fit.subgradient_residual;
  rep["iterations"] = fit.objective_trace.size();
  rep["objective"] = fit.objective_trace.back().second;

  if (inst.omega_star) {
    const ErrorMetrics m =
        error_metrics(fit.omega_hat, *inst.omega_star,
                      field<double>(cfg, "tau", 0.0));
    rep["metrics"] = {{"linf", m.linf},
                      {"l2", m.l2},
                      {"no_false_inclusion", m.no_false_inclusion},
                      {"above_threshold_recovered", m.above_threshold_recovered}};
  }

  if (field<bool>(cfg, "certificate", false)) {
    if (!inst.support) {
      throw BadConfig("certificate requires a truth file with 'support'");
    }
    const RowMomentOptions opt{
        inst.s_oracle.has_closed_form() ? 0 : fit_cfg.mc_batch, fit_cfg.seed};
    const RegFitResult restricted =
        fit_restricted(inst, *inst.support, lambda, fit_cfg);
    const DualCertificate cert =
        dual_certificate(inst, restricted, lambda, opt);
    rep["certificate"] = {{"max_off_support", cert.max_off_support},
                          {"feasible", cert.feasible},
                          {"subgradient_valid", cert.subgradient_valid}};
  }

  write_matrix_csv((out / "omega_hat.csv").string(), fit.omega_hat);
  write_json_file((out / "report.json").string(), rep);
  return 0;
}

int cmd_audit(const CommonArgs& args) {
  apply_threads(args.threads);
  const json cfg = load_config(args);
  const fs::path out = ensure_out(args);
  const RegressionInstance inst = load_instance(cfg);
  if (!inst.support) {
    throw BadConfig("audit requires a truth file with 'support'");
  }
  const int re_trials = field<int>(cfg, "re_trials", 200);
  const uint64_t seed = args.seed_override
                            ? *args.seed_override
                            : field<uint64_t>(cfg, "seed", 0);
  const AuditReport rep = run_audit(inst, *inst.support, re_trials, seed);
  write_json_file((out / "audit.json").string(),
                  json{{"alpha_min", rep.alpha_min},
                       {"sigma_min", rep.sigma_min},
                       {"beta_incoherence", rep.beta_incoherence},
                       {"c_normalization", rep.c_normalization},
                       {"re_lower_bound_heuristic", rep.re_lower_bound_heuristic},
                       {"theorem_ratio", rep.theorem_ratio}});
  return 0;
}

ExperimentSpec parse_experiment(const json& cfg,
                                std::optional<uint64_t> seed_override) {
  ExperimentSpec spec;
  spec.name = required_field<std::string>(cfg, "name");
  spec.d = field<int>(cfg, "d", spec.d);
  spec.offdiag = field<double>(cfg, "offdiag", spec.offdiag);
  spec.box_lo = field<double>(cfg, "box_lo", spec.box_lo);
  spec.box_hi = field<double>(cfg, "box_hi", spec.box_hi);
  spec.untruncated_control =
      field<bool>(cfg, "untruncated_control", spec.untruncated_control);
  spec.reg_n = field<int64_t>(cfg, "reg_n", spec.reg_n);
  spec.reg_d = field<int>(cfg, "reg_d", spec.reg_d);
  spec.reg_k = field<int>(cfg, "reg_k", spec.reg_k);
  if (cfg.contains("scheme")) {
    const auto s = cfg.at("scheme").get<std::string>();
    if (s == "gauss-iid") spec.scheme = DesignScheme::kGaussIid;
    else if (s == "gauss-clipped") spec.scheme = DesignScheme::kGaussClipped;
    else throw BadConfig("experiment.scheme must be gauss-iid or gauss-clipped");
  }
  spec.clip = field<double>(cfg, "clip", spec.clip);
  spec.omega_magnitude =
      field<double>(cfg, "omega_magnitude", spec.omega_magnitude);
  if (cfg.contains("response_set")) {
    spec.response_set =
        oracle_from_json(cfg.at("response_set")).as_interval_union();
  }
  spec.lambda_c = field<double>(cfg, "lambda_c", spec.lambda_c);
  spec.re_trials = field<int>(cfg, "re_trials", spec.re_trials);
  spec.n_grid = field<std::vector<int64_t>>(cfg, "n_grid", spec.n_grid);
  spec.iter_grid = field<std::vector<int64_t>>(cfg, "iter_grid", spec.iter_grid);
  spec.iter_sweep_ns =
      field<std::vector<int64_t>>(cfg, "iter_sweep_ns", spec.iter_sweep_ns);
  spec.trials = field<int>(cfg, "trials", spec.trials);
  spec.seed = field<uint64_t>(cfg, "seed", spec.seed);
  if (cfg.contains("fit")) {
    if (cfg.at("fit").contains("lambda") && cfg.at("fit").at("lambda").is_string()) {
      throw BadConfig(
          "experiment fit.lambda must be numeric or omitted; sweeps derive "
          "the data-driven value per sample size");
    }
    spec.fit = parse_fit_config(cfg.at("fit"), std::nullopt, 1000, spec.d);
  }
  if (seed_override) spec.seed = *seed_override;
  spec.validate();
  return spec;
}

int cmd_experiment(const CommonArgs& args) {
  apply_threads(args.threads);
  const json cfg = load_config(args);
  const fs::path out = ensure_out(args);
  const ExperimentSpec spec = parse_experiment(cfg, args.seed_override);

  if (spec.name == "frob_vs_samples") {
    write_frob_csv((out / "frob_vs_n.csv").string(),
                   run_frobenius_vs_samples(spec));
  } else if (spec.name == "err_vs_iter") {
    write_err_iter_csv((out / "err_vs_iter.csv").string(),
                       run_error_vs_iterations(spec));
  } else if (spec.name == "hamming") {
    write_hamming_csv((out / "hamming.csv").string(),
                      run_hamming_experiments(spec));
  } else if (spec.name == "reg_recovery") {
    write_reg_recovery_csv((out / "reg_recovery.csv").string(),
                           run_regression_recovery(spec));
  } else {
    throw BadConfig("experiment.name must be one of frob_vs_samples, "
                    "err_vs_iter, hamming, reg_recovery");
  }
  return 0;
}

int cmd_eval(const std::vector<std::string>& reports,
             const std::string& out_dir) {
  if (reports.empty()) {
    throw BadConfig("eval requires at least one report path");
  }
  json merged;
  merged["runs"] = json::array();
  std::map<std::string, std::vector<double>> numeric;

  for (const auto& path : reports) {
    if (!fs::exists(path)) {
      throw std::runtime_error("report not found: " + path);
    }
    const json rep = read_json_file(path);
    merged["runs"].push_back({{"path", path}, {"report", rep}});
    if (rep.contains("metrics")) {
      for (const auto& [key, value] : rep.at("metrics").items()) {
        if (value.is_number()) numeric[key].push_back(value.get<double>());
      }
    }
  }

  json medians;
  for (auto& [key, values] : numeric) {
    std::sort(values.begin(), values.end());
    const size_t mid = values.size() / 2;
    const double median = values.size() % 2
                              ? values[mid]
                              : 0.5 * (values[mid - 1] + values[mid]);
    medians[key] = median;
  }
  merged["medians"] = medians;

  std::cout << merged.dump(2) << std::endl;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_json_file((fs::path(out_dir) / "summary.json").string(), merged);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"estimation from truncated Gaussian samples"};
  app.require_subcommand(1);

  CommonArgs gen_ggm_args, fit_ggm_args, gen_reg_args, fit_reg_args,
      audit_args, experiment_args;
  std::vector<std::string> eval_reports;
  std::string eval_out;

  add_common(app.add_subcommand("gen-ggm", "generate truncated GGM samples"),
             gen_ggm_args);
  add_common(app.add_subcommand("fit-ggm", "fit the graphical lasso by PSGD"),
             fit_ggm_args);
  add_common(app.add_subcommand("gen-reg", "generate a regression instance"),
             gen_reg_args);
  add_common(app.add_subcommand("fit-reg", "fit the truncated lasso"),
             fit_reg_args);
  add_common(app.add_subcommand("audit", "audit recovery assumptions"),
             audit_args);
  add_common(app.add_subcommand("experiment", "run a synthetic sweep"),
             experiment_args);
  auto* eval_cmd = app.add_subcommand("eval", "aggregate report files");
  eval_cmd->add_option("reports", eval_reports, "report.json paths");
  eval_cmd->add_option("--out", eval_out, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints help/message
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("gen-ggm")) return cmd_gen_ggm(gen_ggm_args);
    if (app.got_subcommand("fit-ggm")) return cmd_fit_ggm(fit_ggm_args);
    if (app.got_subcommand("gen-reg")) return cmd_gen_reg(gen_reg_args);
    if (app.got_subcommand("fit-reg")) return cmd_fit_reg(fit_reg_args);
    if (app.got_subcommand("audit")) return cmd_audit(audit_args);
    if (app.got_subcommand("experiment")) return cmd_experiment(experiment_args);
    if (app.got_subcommand("eval")) return cmd_eval(eval_reports, eval_out);
  } catch (const BadConfig& e) {
    std::cerr << "ERROR " << e.code() << ": " << e.what() << std::endl;
    return 2;
  } catch (const Error& e) {
    std::cerr << "ERROR " << e.code() << ": " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR runtime: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
