// Command-line front end: CSV in, JSON/TSV out, every stochastic step
// keyed by --seed.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prevcox/csv.hpp"
#include "prevcox/errors.hpp"
#include "prevcox/estimators.hpp"
#include "prevcox/inference.hpp"
#include "prevcox/serialize.hpp"
#include "prevcox/simulation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitInternal = 4;

struct DataOptions {
  std::string input;
  std::string col_a = "a";
  std::string col_y = "y";
  std::string col_delta = "delta";
  std::vector<std::string> col_z;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--input", opts.input, "input CSV path")->required();
  cmd->add_option("--col-a", opts.col_a, "column holding the truncation time");
  cmd->add_option("--col-y", opts.col_y, "column holding the observed time");
  cmd->add_option("--col-delta", opts.col_delta, "column holding the event indicator");
  cmd->add_option("--col-z", opts.col_z,
                  "covariate columns (comma separated; default z1..zp from the header)")
      ->delimiter(',');
}

prevcox::Dataset load_data(const DataOptions& opts) {
  prevcox::ColumnMapping mapping;
  mapping.a = opts.col_a;
  mapping.y = opts.col_y;
  mapping.delta = opts.col_delta;
  mapping.z = opts.col_z;
  return prevcox::load_csv(opts.input, mapping);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
}

// --- fit -----------------------------------------------------------------

struct FitOptions {
  DataOptions data;
  std::string method;
  std::string truncation_json;
  int reps = 10;
  std::optional<std::uint64_t> seed;
  double tol = 1e-8;
  int max_iter = 50;
  int halvings = 20;
  double floor_eps = 1e-12;
  std::string weight_form = "separable";
  std::string output = "-";
  bool verify = false;
};

prevcox::WeightForm parse_weight_form(const std::string& name) {
  if (name == "separable") return prevcox::WeightForm::Separable;
  if (name == "convolution") return prevcox::WeightForm::Convolution;
  throw std::invalid_argument("unknown weight form: " + name +
                              " (expected separable or convolution)");
}

// Delayed-entry Breslow baseline for the reference PL fit.
prevcox::BaselineHazard pl_breslow(const prevcox::Dataset& d, const Eigen::VectorXd& beta) {
  prevcox::BaselineHazard baseline;
  baseline.times = prevcox::distinct_failure_times(d);
  baseline.increments.resize(baseline.times.size());
  for (std::size_t l = 0; l < baseline.times.size(); ++l) {
    const double t = baseline.times[l];
    double denom = 0.0;
    for (int j : prevcox::pl_risk_set(d, t)) denom += std::exp(beta.dot(d[j].z));
    int failures = 0;
    for (const prevcox::SubjectRecord& r : d.records()) {
      if (r.delta == 1 && r.y == t) ++failures;
    }
    baseline.increments[l] = failures / denom;
  }
  return baseline;
}

int run_verify(const prevcox::Dataset& d, const prevcox::CensoringWeights* w,
               std::uint64_t seed, const std::string& output);

int cmd_fit(const FitOptions& opts) {
  const prevcox::Dataset d = load_data(opts.data);
  prevcox::NewtonConfig solver;
  solver.tol = opts.tol;
  solver.max_iter = opts.max_iter;
  solver.max_halvings = opts.halvings;

  const bool needs_weights = opts.method == "ppl" || opts.method == "wee";
  std::optional<prevcox::CensoringWeights> weights;
  if (needs_weights) {
    if (opts.truncation_json.empty()) {
      throw std::invalid_argument("--truncation is required for methods ppl and wee");
    }
    weights.emplace(d, prevcox::TruncationModel::from_json(opts.truncation_json),
                    opts.floor_eps, parse_weight_form(opts.weight_form));
  }
  if (opts.method == "ppl" && !opts.seed) {
    throw std::invalid_argument("--seed is required for the ppl method (risk-set sampling)");
  }

  if (opts.verify) {
    return run_verify(d, weights ? &*weights : nullptr, opts.seed.value_or(1), opts.output);
  }

  prevcox::FitResult fit;
  prevcox::BaselineHazard baseline;
  if (opts.method == "ppl") {
    fit = prevcox::fit_ppl(d, *weights, opts.reps, prevcox::StreamKey{*opts.seed}, solver);
    baseline = prevcox::breslow_baseline(d, *weights, fit.beta);
  } else if (opts.method == "wee") {
    fit = prevcox::fit_wee(d, *weights, solver);
    baseline = prevcox::breslow_baseline(d, *weights, fit.beta);
  } else if (opts.method == "pl") {
    fit = prevcox::fit_reference_pl(d, solver);
    baseline = pl_breslow(d, fit.beta);
  } else {
    throw std::invalid_argument("unknown method: " + opts.method + " (expected ppl, wee or pl)");
  }
  write_text(opts.output, prevcox::fit_to_json(fit, &baseline) + "\n");
  return kExitOk;
}

// --- verify --------------------------------------------------------------

// Built-in oracle checks on the supplied data: the exact piecewise weight
// integral against adaptive quadrature and the analytic Jacobians against
// central finite differences.
double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double eps, int depth) {
  const double mid = 0.5 * (lo + hi);
  const double h = hi - lo;
  const double flo = f(lo), fmid = f(mid), fhi = f(hi);
  const double whole = h / 6.0 * (flo + 4.0 * fmid + fhi);
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double a, double b, double fa, double fb, double fm, double acc, int dep) -> double {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (dep <= 0 || std::abs(left + right - acc) < 15.0 * eps) {
      return left + right + (left + right - acc) / 15.0;
    }
    return rec(a, m, fa, fm, flm, left, dep - 1) + rec(m, b, fm, fb, frm, right, dep - 1);
  };
  return rec(lo, hi, flo, fhi, fmid, whole, depth);
}

int run_verify(const prevcox::Dataset& d, const prevcox::CensoringWeights* w,
               std::uint64_t seed, const std::string& output) {
  std::ostringstream out;
  bool all_ok = true;
  auto check = [&](const std::string& name, bool ok, double value) {
    all_ok = all_ok && ok;
    out << "{\"check\":\"" << name << "\",\"passed\":" << (ok ? "true" : "false")
        << ",\"value\":" << value << "}\n";
  };

  if (w != nullptr) {
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); i += std::max<std::size_t>(1, d.size() / 20)) {
      const double y = d[i].y;
      const double exact = w->omega(y);
      const double quad = adaptive_simpson(
          [&](double t) { return w->survival()(y - t) * w->truncation().pdf(t); }, 0.0, y,
          1e-14 * std::max(1.0, exact), 48);
      worst = std::max(worst, std::abs(exact - quad) / std::max(exact, 1e-300));
    }
    check("omega_vs_quadrature_rel_err_lt_1e-10", worst < 1e-10, worst);
  }

  prevcox::RngStream rng(seed);
  const int p = d.p();
  const double h = 1e-5;
  auto fd_check = [&](const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& score,
                      const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jac,
                      const std::string& name) {
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd beta(p);
      for (int k = 0; k < p; ++k) beta[k] = 0.5 * (rng.uniform() - 0.5);
      const Eigen::MatrixXd analytic = jac(beta);
      Eigen::MatrixXd numeric(p, p);
      for (int k = 0; k < p; ++k) {
        Eigen::VectorXd up = beta, dn = beta;
        up[k] += h;
        dn[k] -= h;
        numeric.col(k) = (score(up) - score(dn)) / (2.0 * h);
      }
      const double scale = std::max(1e-8, analytic.cwiseAbs().maxCoeff());
      worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / scale);
    }
    check(name + "_jacobian_fd_rel_err_lt_1e-4", worst < 1e-4, worst);
  };

  if (w != nullptr) {
    fd_check([&](const Eigen::VectorXd& b) { return prevcox::wee_score(b, d, *w); },
             [&](const Eigen::VectorXd& b) { return prevcox::wee_jacobian(b, d, *w); }, "wee");
    const auto sets = prevcox::sample_adjusted_risk_sets(d, *w, prevcox::StreamKey{seed});
    fd_check([&](const Eigen::VectorXd& b) { return prevcox::ppl_score(b, sets, d); },
             [&](const Eigen::VectorXd& b) { return prevcox::ppl_loglik_hessian(b, sets, d); },
             "ppl");
  }
  fd_check([&](const Eigen::VectorXd& b) { return prevcox::pl_score(b, d); },
           [&](const Eigen::VectorXd& b) -> Eigen::MatrixXd {
             return -prevcox::pl_information(b, d);
           },
           "pl");

  write_text(output, out.str());
  return all_ok ? kExitOk : kExitInternal;
}

// --- km ------------------------------------------------------------------

struct KmOptions {
  DataOptions data;
  std::string out_survival = "-";
  std::string out_cumhaz = "-";
};

int cmd_km(const KmOptions& opts) {
  const prevcox::Dataset d = load_data(opts.data);
  const prevcox::StepSurvival s = prevcox::km_residual_censoring(d);
  const prevcox::StepCumulative h = prevcox::nelson_aalen_residual_censoring(d);
  std::ostringstream surv;
  surv.precision(17);
  surv << "time\tsurvival\n0\t1\n";
  for (std::size_t k = 0; k < s.jump_times.size(); ++k) {
    surv << s.jump_times[k] << '\t' << s.values[k] << '\n';
  }
  std::ostringstream cum;
  cum.precision(17);
  cum << "time\tcumhaz\n0\t0\n";
  for (std::size_t k = 0; k < h.times.size(); ++k) {
    cum << h.times[k] << '\t' << h.values[k] << '\n';
  }
  write_text(opts.out_survival, surv.str());
  write_text(opts.out_cumhaz, cum.str());
  return kExitOk;
}

// --- baseline ------------------------------------------------------------

int cmd_baseline(const FitOptions& opts) {
  const prevcox::Dataset d = load_data(opts.data);
  prevcox::NewtonConfig solver;
  solver.tol = opts.tol;
  solver.max_iter = opts.max_iter;
  solver.max_halvings = opts.halvings;

  prevcox::BaselineHazard baseline;
  if (opts.method == "pl") {
    const prevcox::FitResult fit = prevcox::fit_reference_pl(d, solver);
    baseline = pl_breslow(d, fit.beta);
  } else {
    if (opts.truncation_json.empty()) {
      throw std::invalid_argument("--truncation is required for methods ppl and wee");
    }
    const prevcox::CensoringWeights weights(
        d, prevcox::TruncationModel::from_json(opts.truncation_json), opts.floor_eps,
        parse_weight_form(opts.weight_form));
    Eigen::VectorXd beta;
    if (opts.method == "ppl") {
      if (!opts.seed) throw std::invalid_argument("--seed is required for the ppl method");
      beta = prevcox::fit_ppl(d, weights, opts.reps, prevcox::StreamKey{*opts.seed}, solver).beta;
    } else if (opts.method == "wee") {
      beta = prevcox::fit_wee(d, weights, solver).beta;
    } else {
      throw std::invalid_argument("unknown method: " + opts.method);
    }
    baseline = prevcox::breslow_baseline(d, weights, beta);
  }
  std::ostringstream out;
  out.precision(17);
  out << "time\tcumhaz\n";
  const prevcox::StepCumulative h0 = baseline.cumulative_function();
  for (std::size_t k = 0; k < h0.times.size(); ++k) {
    out << h0.times[k] << '\t' << h0.values[k] << '\n';
  }
  write_text(opts.output, out.str());
  return kExitOk;
}

// --- simulate / report ---------------------------------------------------

struct SimulateOptions {
  std::string hazard = "h1";
  int n = 200;
  double censoring = 0.0;
  int reps = 1000;
  int ppl_reps = 10;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string weight_form = "separable";
  int jobs = 1;
};

int cmd_simulate(const SimulateOptions& opts) {
  prevcox::ScenarioSpec spec;
  spec.hazard = prevcox::baseline_shape_from_name(opts.hazard);
  spec.n = opts.n;
  spec.censoring_target = opts.censoring;
  spec.n_replicates = opts.reps;
  spec.seed = opts.seed;
  spec.ppl_replications = opts.ppl_reps;
  spec.weight_form = parse_weight_form(opts.weight_form);
  prevcox::StudyOptions study;
  study.jobs = opts.jobs;
  study.out_dir = opts.out;
  const prevcox::MonteCarloReport report = prevcox::run_study(spec, study);
  std::cout << prevcox::report_to_tsv(report);
  return kExitOk;
}

int cmd_report(const std::string& replicates, const std::string& out_dir) {
  const prevcox::MonteCarloReport report = prevcox::aggregate_replicates(replicates);
  namespace fs = std::filesystem;
  const fs::path dir = out_dir.empty() ? fs::path(replicates).parent_path() : fs::path(out_dir);
  if (!dir.empty()) fs::create_directories(dir);
  std::ofstream(dir / "report.json", std::ios::trunc) << prevcox::report_to_json(report) << '\n';
  std::ofstream(dir / "report.tsv", std::ios::trunc) << prevcox::report_to_tsv(report);
  std::cout << prevcox::report_to_tsv(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cox regression for right-censored prevalent-cohort (biased sampling) data"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  CLI::App* fit = app.add_subcommand("fit", "fit a model to a CSV dataset");
  add_data_options(fit, fit_opts.data);
  fit->add_option("--method", fit_opts.method, "ppl | wee | pl")->required();
  fit->add_option("--truncation", fit_opts.truncation_json,
                  "truncation model JSON, e.g. {\"family\":\"exponential\",\"rate\":1.0}");
  fit->add_option("--reps", fit_opts.reps, "PPL replications (L)");
  fit->add_option("--seed", fit_opts.seed, "seed for risk-set sampling");
  fit->add_option("--tol", fit_opts.tol, "solver tolerance on ||U||_inf");
  fit->add_option("--max-iter", fit_opts.max_iter, "solver iteration cap");
  fit->add_option("--halvings", fit_opts.halvings, "step-halving cap per iteration");
  fit->add_option("--floor-eps", fit_opts.floor_eps, "weight denominator floor");
  fit->add_option("--weight-form", fit_opts.weight_form, "separable | convolution");
  fit->add_option("--output", fit_opts.output, "output path ('-' = stdout)");
  fit->add_flag("--verify", fit_opts.verify, "run built-in oracle checks instead of fitting");

  KmOptions km_opts;
  CLI::App* km = app.add_subcommand("km", "residual-censoring Kaplan-Meier and Nelson-Aalen");
  add_data_options(km, km_opts.data);
  km->add_option("--out-survival", km_opts.out_survival, "TSV path for the survival curve");
  km->add_option("--out-cumhaz", km_opts.out_cumhaz, "TSV path for the cumulative hazard");

  FitOptions baseline_opts;
  CLI::App* baseline = app.add_subcommand("baseline", "fit, then dump the cumulative baseline hazard");
  add_data_options(baseline, baseline_opts.data);
  baseline->add_option("--method", baseline_opts.method, "ppl | wee | pl")->required();
  baseline->add_option("--truncation", baseline_opts.truncation_json, "truncation model JSON");
  baseline->add_option("--reps", baseline_opts.reps, "PPL replications (L)");
  baseline->add_option("--seed", baseline_opts.seed, "seed for risk-set sampling");
  baseline->add_option("--tol", baseline_opts.tol, "solver tolerance");
  baseline->add_option("--weight-form", baseline_opts.weight_form, "separable | convolution");
  baseline->add_option("--output", baseline_opts.output, "output path ('-' = stdout)");

  SimulateOptions sim_opts;
  CLI::App* simulate = app.add_subcommand("simulate", "run a Monte Carlo study");
  simulate->add_option("--hazard", sim_opts.hazard, "h1 | h2 | h3");
  simulate->add_option("--n", sim_opts.n, "sample size per replicate");
  simulate->add_option("--censoring", sim_opts.censoring, "target censoring rate");
  simulate->add_option("--reps", sim_opts.reps, "number of replicates");
  simulate->add_option("--ppl-reps", sim_opts.ppl_reps, "PPL replications per fit (L)");
  simulate->add_option("--seed", sim_opts.seed, "study seed")->required();
  simulate->add_option("--out", sim_opts.out, "output directory")->required();
  simulate->add_option("--weight-form", sim_opts.weight_form, "separable | convolution");
  simulate->add_option("--jobs", sim_opts.jobs, "worker threads");

  std::string report_replicates;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "aggregate a replicate log without re-simulation");
  report->add_option("--replicates", report_replicates, "path to replicates.jsonl")->required();
  report->add_option("--out", report_out, "output directory (default: alongside the log)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << prevcox::error_to_json("usage", e.what()) << '\n';
    std::cerr << app.help();
    return kExitInput;
  }

  try {
    if (fit->parsed()) return cmd_fit(fit_opts);
    if (km->parsed()) return cmd_km(km_opts);
    if (baseline->parsed()) return cmd_baseline(baseline_opts);
    if (simulate->parsed()) return cmd_simulate(sim_opts);
    if (report->parsed()) return cmd_report(report_replicates, report_out);
  } catch (const prevcox::DataError& e) {
    std::cerr << prevcox::error_to_json(e.kind_name(), e.what(), e.row(), e.column()) << '\n';
    return kExitInput;
  } catch (const prevcox::NonConvergence& e) {
    std::cerr << prevcox::error_to_json("NonConvergence", e.what()) << '\n';
    return kExitNonConvergence;
  } catch (const prevcox::DegenerateInformation& e) {
    std::cerr << prevcox::error_to_json("DegenerateInformation", e.what()) << '\n';
    return kExitNonConvergence;
  } catch (const std::domain_error& e) {
    std::cerr << prevcox::error_to_json("DomainError", e.what()) << '\n';
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << prevcox::error_to_json("InvalidArgument", e.what()) << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << prevcox::error_to_json("InternalError", e.what()) << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
