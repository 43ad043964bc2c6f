#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>

namespace prevcox {

struct NewtonConfig {
  double tol = 1e-8;        // convergence on ||U||_inf
  int max_iter = 50;
  int max_halvings = 20;    // step halvings enforcing ||U||_inf decrease
  double cond_limit = 1e12; // Jacobian condition number triggering the ridge
};

struct NewtonDiagnostics {
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;
  int ridge_engagements = 0;
  int halvings = 0;
};

using ScoreFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Newton root-finding on U(beta) = 0 where jacobian = dU/dbeta (negative
// semidefinite for the likelihood scores here). A ridge is added when the
// Jacobian is numerically singular; throws NonConvergence after max_iter.
std::pair<Eigen::VectorXd, NewtonDiagnostics> newton_solve(const ScoreFn& score,
                                                           const JacobianFn& jacobian,
                                                           Eigen::VectorXd beta0,
                                                           const NewtonConfig& cfg = {});

}  // namespace prevcox
