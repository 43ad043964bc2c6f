#pragma once

#include <Eigen/Core>
#include <vector>

#include "prevcox/censoring_weights.hpp"
#include "prevcox/dataset.hpp"
#include "prevcox/estimators.hpp"
#include "prevcox/step_function.hpp"

namespace prevcox {

// Cumulative baseline hazard on the distinct uncensored times. The
// cumulative value at t sums increments with time strictly below t.
struct BaselineHazard {
  std::vector<double> times;
  std::vector<double> increments;

  double cumulative(double t) const;
  StepCumulative cumulative_function() const;
};

// Weighted Breslow baseline: increment d_i / sum_{j uncensored, y_j >= t_i}
// {Omega(t_i)/Omega(y_j)} e^{beta'z_j}. The denominator runs over the same
// weighted uncensored risk mass that drives the estimating equations,
// which is what makes the martingale residuals below balance exactly.
BaselineHazard breslow_baseline(const Dataset& d, const CensoringWeights& w,
                                const Eigen::VectorXd& beta);

// Failure- and censoring-process residual increments at the fitted
// quantities. Rows are subjects; columns follow the respective grids.
// Both row sums over the full grid are exactly zero by construction.
struct MartingaleResiduals {
  std::vector<double> failure_grid;    // distinct uncensored y
  std::vector<double> censoring_grid;  // distinct censored residual times v
  Eigen::MatrixXd d_failure;           // n x |failure_grid|
  Eigen::MatrixXd d_censoring;         // n x |censoring_grid|

  Eigen::VectorXd failure_totals() const { return d_failure.rowwise().sum(); }
  Eigen::VectorXd censoring_totals() const { return d_censoring.rowwise().sum(); }
};

MartingaleResiduals martingale_residuals(const Dataset& d, const CensoringWeights& w,
                                         const Eigen::VectorXd& beta,
                                         const BaselineHazard& baseline);

// Observed information at beta. The risk-set overload averages the
// curvature over the sampled collections; the weight overload is the
// analytic Jacobian of the deterministic score. Throws
// DegenerateInformation when the smallest eigenvalue falls below
// 1e-10 times the largest.
Eigen::MatrixXd gamma_hat(const Eigen::VectorXd& beta,
                          const std::vector<std::vector<AdjustedRiskSet>>& collections,
                          const Dataset& d);
Eigen::MatrixXd gamma_hat(const Eigen::VectorXd& beta, const Dataset& d,
                          const CensoringWeights& w);

struct SandwichResult {
  Eigen::MatrixXd sigma;  // score variance
  Eigen::MatrixXd gamma;  // observed information (weighted representation)
  Eigen::MatrixXd psi;    // gamma^-1 sigma gamma^-1
  int ybar_zero_drops = 0;
};

// Robust covariance of sqrt(n)(beta_hat - beta0): per-subject score
// contributions combine the failure-martingale term with the correction
// for estimating the censoring survival, accumulated over the censoring
// grid.
SandwichResult sandwich_covariance(const Dataset& d, const CensoringWeights& w,
                                   const Eigen::VectorXd& beta,
                                   const BaselineHazard& baseline);

// sqrt(diag(psi)/n): the standard errors reported by the Monte Carlo
// harness.
Eigen::VectorXd ase_report(const FitResult& fit);
Eigen::VectorXd ase_report_from(const Eigen::MatrixXd& psi, std::size_t n);

}  // namespace prevcox
