#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "prevcox/censoring_weights.hpp"
#include "prevcox/dataset.hpp"
#include "prevcox/random.hpp"
#include "prevcox/truncation.hpp"

namespace prevcox {

// Baseline hazard shapes of the simulation study: 2, 2t, 3t^2.
enum class BaselineShape { Constant, Linear, Quadratic };

const char* baseline_shape_name(BaselineShape s);           // "h1" | "h2" | "h3"
BaselineShape baseline_shape_from_name(const std::string&); // inverse

struct ScenarioSpec {
  BaselineShape hazard = BaselineShape::Constant;
  Eigen::Vector2d beta_true{0.5, 1.0};
  int n = 200;
  double censoring_target = 0.0;  // in [0, 0.9]
  int n_replicates = 1;
  std::uint64_t seed = 0;
  int ppl_replications = 10;  // L
  WeightForm weight_form = WeightForm::Separable;

  void validate() const;  // throws std::invalid_argument
};

// Closed-form survival time from a unit exponential draw e and linear
// predictor lp: solves H(t) e^{lp} = e for the chosen baseline.
double invert_cumulative_hazard(BaselineShape shape, double e, double lp);

// Draws subjects until n pass the left-truncation acceptance T > A.
// Covariates: z1 standard normal, z2 Bernoulli(1/2); truncation times
// exponential with mean 1; residual censoring Uniform(0, theta_c) with
// theta_c = +inf meaning "no censoring". Returns the dataset together
// with the population truncation model the weights must use.
// Throws AcceptanceStall if fewer than 0.01% of a 1e6-draw window pass.
std::pair<Dataset, TruncationModel> generate_dataset(const ScenarioSpec& spec,
                                                     RngStream& rng,
                                                     double theta_c);

// theta_c achieving the requested censoring rate for the scenario's
// hazard, by bisection against simulated cohorts of 1e5 accepted
// subjects (|achieved - target| < 0.005). Results are cached per
// (hazard, target); target 0 returns +inf without calibrating.
// Throws CalibrationFailure after 60 bisection steps.
double calibrate_censoring(const ScenarioSpec& spec, double target_rate);

// One fitted method inside one replicate of the study.
struct MethodOutcome {
  bool converged = false;
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  int iterations = 0;
  std::uint64_t weight_floor_hits = 0;
  int dropped_replications = 0;
  std::string error;  // nonempty when converged is false
};

struct ReplicateRecord {
  int index = 0;
  double censored_fraction = 0.0;
  MethodOutcome ppl, wee, pl;
};

struct MethodSummary {
  std::string method;
  Eigen::VectorXd bias;
  std::optional<Eigen::VectorXd> esd;  // empty when fewer than 2 converged replicates
  Eigen::VectorXd ase;
  Eigen::VectorXd coverage;            // nominal-95% interval coverage of beta_true
  int nonconverged = 0;
};

struct MonteCarloReport {
  ScenarioSpec spec;
  double theta_c = 0.0;
  double achieved_censoring = 0.0;
  int completed_replicates = 0;
  std::vector<MethodSummary> methods;  // ppl, wee, pl

  const MethodSummary& method(const std::string& name) const;
};

struct StudyOptions {
  int jobs = 1;
  std::string out_dir;      // empty: keep everything in memory
  bool resume = true;       // reuse replicate records found in out_dir
};

// Runs the full scenario: generate, fit PPL/WEE/PL, aggregate bias, ESD,
// ASE and coverage. Replicates stream to <out_dir>/replicates.jsonl as
// they finish and the final file is rewritten in replicate order, so
// outputs are byte-identical for any worker count. Fit failures become
// per-replicate records, never a study abort.
MonteCarloReport run_study(const ScenarioSpec& spec, const StudyOptions& options = {});

// Aggregation without re-simulation (CLI `report`).
MonteCarloReport aggregate_replicates(const std::string& replicates_path);

MonteCarloReport aggregate(const ScenarioSpec& spec, double theta_c,
                           const std::vector<ReplicateRecord>& records);

}  // namespace prevcox
