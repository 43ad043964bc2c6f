#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "prevcox/censoring_weights.hpp"
#include "prevcox/dataset.hpp"
#include "prevcox/newton.hpp"
#include "prevcox/random.hpp"

namespace prevcox {

// Thinned risk set at one distinct failure time: uncensored subjects
// still at risk that survived the Bernoulli draw with success
// probability Omega(t_i)/Omega(y_j). The failing subject's own ratio is
// 1, so it is always a member.
struct AdjustedRiskSet {
  int failure_time_index = 0;   // index into distinct_failure_times(d)
  std::vector<int> members;     // subject row indices, ascending
};

struct FitWarnings {
  std::uint64_t weight_floor_hits = 0;
  int dropped_replications = 0;
  int ridge_engagements = 0;
  int empty_risk_sets = 0;   // reference PL: failure times with nobody at risk
  int ybar_zero_drops = 0;   // variance: censoring grid points with empty tail
};

struct FitResult {
  Eigen::VectorXd beta;
  std::vector<Eigen::VectorXd> replication_betas;  // PPL only; beta is their mean
  Eigen::MatrixXd covariance;       // asymptotic covariance of sqrt(n)(beta_hat - beta0)
  Eigen::VectorXd standard_errors;  // sqrt(diag(covariance) / n)
  int iterations = 0;               // summed across replications
  bool converged = false;
  double score_norm = 0.0;          // worst final ||U||_inf across replications
  FitWarnings warnings;
  std::string method;
  int replications = 1;
  std::size_t n = 0;
};

namespace detail {
// Bernoulli thinning with an injectable uniform source; keep is
// u < ratio, with ratio 1 always kept.
std::vector<int> thin_risk_set(std::span<const int> candidates,
                               std::span<const double> ratios,
                               std::span<const double> uniforms);
}  // namespace detail

// One thinned risk set per distinct failure time. Draws are addressed by
// (failure index, subject row), so the result is independent of
// iteration order; derive per-replication keys with key.child(l).
std::vector<AdjustedRiskSet> sample_adjusted_risk_sets(const Dataset& d,
                                                       const CensoringWeights& w,
                                                       StreamKey key);

// Normalized score of the thinned-risk-set partial likelihood,
// n^-1 sum_i delta_i [z_i - sum_{j in R_i} z_j e^{b'z_j} / sum e^{b'z_j}].
// Singleton risk sets contribute zero.
Eigen::VectorXd ppl_score(const Eigen::VectorXd& beta,
                          const std::vector<AdjustedRiskSet>& risk_sets,
                          const Dataset& d);

// dU/dbeta of ppl_score; negative semidefinite.
Eigen::MatrixXd ppl_loglik_hessian(const Eigen::VectorXd& beta,
                                   const std::vector<AdjustedRiskSet>& risk_sets,
                                   const Dataset& d);

// Deterministic weighted estimating function: risk sums run over
// uncensored subjects with weights 1/Omega(y_j) instead of sampled sets.
Eigen::VectorXd wee_score(const Eigen::VectorXd& beta, const Dataset& d,
                          const CensoringWeights& w);
Eigen::MatrixXd wee_jacobian(const Eigen::VectorXd& beta, const Dataset& d,
                             const CensoringWeights& w);

// Reference estimator: classical partial likelihood with delayed-entry
// risk sets {j : a_j < t <= y_j}, Breslow ties, inverse-information
// covariance.
Eigen::VectorXd pl_score(const Eigen::VectorXd& beta, const Dataset& d);
Eigen::MatrixXd pl_information(const Eigen::VectorXd& beta, const Dataset& d);

// Subjects at risk under delayed entry at time t. Empty sets are
// impossible for valid datasets at observed failure times but the
// fitters still flag them defensively.
std::vector<int> pl_risk_set(const Dataset& d, double t);

FitResult fit_ppl(const Dataset& d, const CensoringWeights& w, int replications,
                  StreamKey key, const NewtonConfig& solver = {});
FitResult fit_wee(const Dataset& d, const CensoringWeights& w,
                  const NewtonConfig& solver = {});
FitResult fit_reference_pl(const Dataset& d, const NewtonConfig& solver = {});

}  // namespace prevcox
