#include "prevcox/newton.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "prevcox/errors.hpp"

namespace prevcox {

namespace {

// Solve (-J) d = U with a ridge when -J is numerically singular.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& jac, const Eigen::VectorXd& u,
                                 double cond_limit, NewtonDiagnostics& diag) {
  Eigen::MatrixXd a = -0.5 * (jac + jac.transpose());  // symmetrize
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double max_ev = ev.cwiseAbs().maxCoeff();
  const double min_ev = ev.minCoeff();
  const bool singular = !(max_ev > 0.0) || min_ev <= 0.0 || max_ev / min_ev > cond_limit;
  if (singular) {
    ++diag.ridge_engagements;
    const double lambda = std::max(max_ev, 1.0) * 1e-8 + 1e-12;
    a += lambda * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  }
  return a.ldlt().solve(u);
}

}  // namespace

std::pair<Eigen::VectorXd, NewtonDiagnostics> newton_solve(const ScoreFn& score,
                                                           const JacobianFn& jacobian,
                                                           Eigen::VectorXd beta,
                                                           const NewtonConfig& cfg) {
  NewtonDiagnostics diag;
  Eigen::VectorXd u = score(beta);
  double norm = u.lpNorm<Eigen::Infinity>();
  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    if (norm < cfg.tol) {
      diag.converged = true;
      diag.score_norm = norm;
      return {beta, diag};
    }
    const Eigen::VectorXd direction = newton_direction(jacobian(beta), u, cfg.cond_limit, diag);
    double scale = 1.0;
    Eigen::VectorXd candidate = beta + direction;
    Eigen::VectorXd u_new = score(candidate);
    double norm_new = u_new.lpNorm<Eigen::Infinity>();
    int halvings = 0;
    while (!(norm_new < norm) && halvings < cfg.max_halvings) {
      scale *= 0.5;
      ++halvings;
      candidate = beta + scale * direction;
      u_new = score(candidate);
      norm_new = u_new.lpNorm<Eigen::Infinity>();
    }
    diag.halvings += halvings;
    beta = candidate;
    u = u_new;
    norm = norm_new;
    diag.iterations = iter + 1;
  }
  if (norm < cfg.tol) {
    diag.converged = true;
    diag.score_norm = norm;
    return {beta, diag};
  }
  throw NonConvergence("newton_solve: ||U||_inf = " + std::to_string(norm) + " after " +
                       std::to_string(cfg.max_iter) + " iterations (tol " +
                       std::to_string(cfg.tol) + ")");
}

}  // namespace prevcox
