#include "prevcox/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "prevcox/errors.hpp"
#include "prevcox/inference.hpp"

namespace prevcox {

namespace {

// Distinct failure times with the subjects failing at each.
struct FailureIndex {
  std::vector<double> times;
  std::vector<std::vector<int>> failers;

  explicit FailureIndex(const Dataset& d) : times(distinct_failure_times(d)) {
    failers.resize(times.size());
    for (int i = 0; i < static_cast<int>(d.size()); ++i) {
      if (d[i].delta == 1) {
        const auto it = std::lower_bound(times.begin(), times.end(), d[i].y);
        failers[static_cast<std::size_t>(it - times.begin())].push_back(i);
      }
    }
  }
};

Eigen::VectorXd linear_predictors(const Eigen::VectorXd& beta, const Dataset& d) {
  Eigen::VectorXd lp(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) lp[static_cast<Eigen::Index>(i)] = beta.dot(d[i].z);
  return lp;
}

// Weighted estimating-function context: subjects in ascending y order,
// blocks of tied y handled so that "y_j >= y_i" includes the ties.
struct WeeContext {
  const Dataset& d;
  const CensoringWeights& w;
  std::vector<int> order;            // ascending y
  std::vector<double> inv_omega;     // 1/Omega(y_j), floored, per subject

  WeeContext(const Dataset& dd, const CensoringWeights& ww) : d(dd), w(ww) {
    order.resize(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return d[static_cast<std::size_t>(a)].y < d[static_cast<std::size_t>(b)].y; });
    const bool cached = w.cached().size() == d.size();
    inv_omega.resize(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double om = cached ? w.omega_at(j) : w.omega(d[j].y);
      inv_omega[j] = 1.0 / w.apply_floor(om);
    }
  }

  // Accumulates score and (optionally) the Jacobian in one sweep from
  // the largest y downward.
  void accumulate(const Eigen::VectorXd& beta, Eigen::VectorXd* score,
                  Eigen::MatrixXd* jacobian) const {
    const int p = d.p();
    const std::size_t n = d.size();
    const Eigen::VectorXd lp = linear_predictors(beta, d);
    double shift = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (d[j].delta == 1) shift = std::max(shift, lp[static_cast<Eigen::Index>(j)]);
    }
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    if (score) score->setZero(p);
    if (jacobian) jacobian->setZero(p, p);

    std::size_t hi = n;
    while (hi > 0) {
      // extend the suffix sums over the block of subjects tied at this y
      std::size_t lo = hi;
      const double y_block = d[static_cast<std::size_t>(order[hi - 1])].y;
      while (lo > 0 && d[static_cast<std::size_t>(order[lo - 1])].y == y_block) --lo;
      for (std::size_t k = lo; k < hi; ++k) {
        const int j = order[k];
        const SubjectRecord& r = d[static_cast<std::size_t>(j)];
        if (r.delta != 1) continue;
        const double wj = std::exp(lp[j] - shift) * inv_omega[static_cast<std::size_t>(j)];
        s0 += wj;
        s1 += wj * r.z;
        if (jacobian) s2 += wj * (r.z * r.z.transpose());
      }
      // every failing subject in the block sees the same suffix sums
      for (std::size_t k = lo; k < hi; ++k) {
        const int i = order[k];
        const SubjectRecord& r = d[static_cast<std::size_t>(i)];
        if (r.delta != 1) continue;
        const Eigen::VectorXd zbar = s1 / s0;
        if (score) *score += r.z - zbar;
        if (jacobian) *jacobian -= s2 / s0 - zbar * zbar.transpose();
      }
      hi = lo;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (score) *score *= inv_n;
    if (jacobian) *jacobian *= inv_n;
  }
};

NewtonConfig pl_defaults(const NewtonConfig& solver) { return solver; }

}  // namespace

namespace detail {

std::vector<int> thin_risk_set(std::span<const int> candidates, std::span<const double> ratios,
                               std::span<const double> uniforms) {
  std::vector<int> members;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (ratios[k] >= 1.0 || uniforms[k] < ratios[k]) members.push_back(candidates[k]);
  }
  return members;
}

}  // namespace detail

std::vector<AdjustedRiskSet> sample_adjusted_risk_sets(const Dataset& d,
                                                       const CensoringWeights& w,
                                                       StreamKey key) {
  const FailureIndex idx(d);
  const bool cached = w.cached().size() == d.size();
  std::vector<AdjustedRiskSet> sets(idx.times.size());
  for (std::size_t i = 0; i < idx.times.size(); ++i) {
    const double t = idx.times[i];
    const double omega_t = w.omega(t);
    AdjustedRiskSet& rs = sets[i];
    rs.failure_time_index = static_cast<int>(i);
    for (int j = 0; j < static_cast<int>(d.size()); ++j) {
      const SubjectRecord& r = d[static_cast<std::size_t>(j)];
      if (r.delta != 1 || r.y < t) continue;
      if (r.y == t) {
        rs.members.push_back(j);  // own ratio is 1: always a member
        continue;
      }
      const double omega_y = cached ? w.omega_at(static_cast<std::size_t>(j)) : w.omega(r.y);
      const double ratio = omega_t / w.apply_floor(omega_y);
      if (key.uniform_at(i, static_cast<std::uint64_t>(j)) < ratio) rs.members.push_back(j);
    }
  }
  return sets;
}

Eigen::VectorXd ppl_score(const Eigen::VectorXd& beta,
                          const std::vector<AdjustedRiskSet>& risk_sets, const Dataset& d) {
  const FailureIndex idx(d);
  const Eigen::VectorXd lp = linear_predictors(beta, d);
  const int p = d.p();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
  for (const AdjustedRiskSet& rs : risk_sets) {
    if (rs.members.size() <= 1) continue;  // singleton sets carry no information
    double shift = -INFINITY;
    for (int j : rs.members) shift = std::max(shift, lp[j]);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    for (int j : rs.members) {
      const double wj = std::exp(lp[j] - shift);
      s0 += wj;
      s1 += wj * d[static_cast<std::size_t>(j)].z;
    }
    const Eigen::VectorXd zbar = s1 / s0;
    for (int i : idx.failers[static_cast<std::size_t>(rs.failure_time_index)]) {
      score += d[static_cast<std::size_t>(i)].z - zbar;
    }
  }
  return score / static_cast<double>(d.size());
}

Eigen::MatrixXd ppl_loglik_hessian(const Eigen::VectorXd& beta,
                                   const std::vector<AdjustedRiskSet>& risk_sets,
                                   const Dataset& d) {
  const FailureIndex idx(d);
  const Eigen::VectorXd lp = linear_predictors(beta, d);
  const int p = d.p();
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(p, p);
  for (const AdjustedRiskSet& rs : risk_sets) {
    if (rs.members.size() <= 1) continue;
    double shift = -INFINITY;
    for (int j : rs.members) shift = std::max(shift, lp[j]);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    for (int j : rs.members) {
      const double wj = std::exp(lp[j] - shift);
      const Eigen::VectorXd& z = d[static_cast<std::size_t>(j)].z;
      s0 += wj;
      s1 += wj * z;
      s2 += wj * (z * z.transpose());
    }
    const Eigen::VectorXd zbar = s1 / s0;
    const double d_t =
        static_cast<double>(idx.failers[static_cast<std::size_t>(rs.failure_time_index)].size());
    hess -= d_t * (s2 / s0 - zbar * zbar.transpose());
  }
  return hess / static_cast<double>(d.size());
}

Eigen::VectorXd wee_score(const Eigen::VectorXd& beta, const Dataset& d,
                          const CensoringWeights& w) {
  WeeContext ctx(d, w);
  Eigen::VectorXd score;
  ctx.accumulate(beta, &score, nullptr);
  return score;
}

Eigen::MatrixXd wee_jacobian(const Eigen::VectorXd& beta, const Dataset& d,
                             const CensoringWeights& w) {
  WeeContext ctx(d, w);
  Eigen::MatrixXd jac;
  ctx.accumulate(beta, nullptr, &jac);
  return jac;
}

std::vector<int> pl_risk_set(const Dataset& d, double t) {
  std::vector<int> members;
  for (int j = 0; j < static_cast<int>(d.size()); ++j) {
    const SubjectRecord& r = d[static_cast<std::size_t>(j)];
    if (r.a < t && t <= r.y) members.push_back(j);
  }
  return members;
}

namespace {

// One pass over the delayed-entry risk sets; fills any of score /
// information that are non-null. Returns the number of failure times
// whose risk set is empty (possible only for hand-crafted inputs).
int pl_accumulate(const Eigen::VectorXd& beta, const Dataset& d, Eigen::VectorXd* score,
                  Eigen::MatrixXd* information) {
  const FailureIndex idx(d);
  const Eigen::VectorXd lp = linear_predictors(beta, d);
  const int p = d.p();
  if (score) score->setZero(p);
  if (information) information->setZero(p, p);
  int empty = 0;
  for (std::size_t i = 0; i < idx.times.size(); ++i) {
    const std::vector<int> members = pl_risk_set(d, idx.times[i]);
    if (members.empty()) {
      ++empty;
      continue;
    }
    double shift = -INFINITY;
    for (int j : members) shift = std::max(shift, lp[j]);
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
    for (int j : members) {
      const double wj = std::exp(lp[j] - shift);
      const Eigen::VectorXd& z = d[static_cast<std::size_t>(j)].z;
      s0 += wj;
      s1 += wj * z;
      if (information) s2 += wj * (z * z.transpose());
    }
    const Eigen::VectorXd zbar = s1 / s0;
    const auto& failers = idx.failers[i];
    if (score) {
      for (int f : failers) *score += d[static_cast<std::size_t>(f)].z - zbar;
    }
    if (information) {
      *information +=
          static_cast<double>(failers.size()) * (s2 / s0 - zbar * zbar.transpose());
    }
  }
  const double inv_n = 1.0 / static_cast<double>(d.size());
  if (score) *score *= inv_n;
  if (information) *information *= inv_n;
  return empty;
}

}  // namespace

Eigen::VectorXd pl_score(const Eigen::VectorXd& beta, const Dataset& d) {
  Eigen::VectorXd score;
  pl_accumulate(beta, d, &score, nullptr);
  return score;
}

Eigen::MatrixXd pl_information(const Eigen::VectorXd& beta, const Dataset& d) {
  Eigen::MatrixXd info;
  pl_accumulate(beta, d, nullptr, &info);
  return info;
}

FitResult fit_ppl(const Dataset& d, const CensoringWeights& w, int replications, StreamKey key,
                  const NewtonConfig& solver) {
  if (replications < 1) throw std::invalid_argument("fit_ppl: replications must be >= 1");
  const std::uint64_t floor_before = w.floor_hits();
  const int p = d.p();

  FitResult result;
  result.method = "ppl";
  result.replications = replications;
  result.n = d.size();

  Eigen::VectorXd warm = Eigen::VectorXd::Zero(p);
  int dropped = 0;
  for (int l = 0; l < replications; ++l) {
    const std::vector<AdjustedRiskSet> sets =
        sample_adjusted_risk_sets(d, w, key.child(static_cast<std::uint64_t>(l)));
    const auto score = [&](const Eigen::VectorXd& b) { return ppl_score(b, sets, d); };
    const auto jac = [&](const Eigen::VectorXd& b) { return ppl_loglik_hessian(b, sets, d); };
    try {
      auto [beta_l, diag] = newton_solve(score, jac, warm, solver);
      result.replication_betas.push_back(beta_l);
      result.iterations += diag.iterations;
      result.warnings.ridge_engagements += diag.ridge_engagements;
      result.score_norm = std::max(result.score_norm, diag.score_norm);
      warm = beta_l;
    } catch (const NonConvergence&) {
      ++dropped;
    }
  }
  result.warnings.dropped_replications = dropped;
  if (dropped > 0 && static_cast<double>(dropped) > 0.2 * static_cast<double>(replications)) {
    throw NonConvergence("fit_ppl: " + std::to_string(dropped) + " of " +
                         std::to_string(replications) + " replications failed to converge");
  }

  Eigen::VectorXd beta_bar = Eigen::VectorXd::Zero(p);
  for (const Eigen::VectorXd& b : result.replication_betas) beta_bar += b;
  beta_bar /= static_cast<double>(result.replication_betas.size());
  result.beta = beta_bar;
  result.converged = true;

  // Standard errors from the deterministic weighted representation at the
  // averaged estimate; no sampling noise enters the covariance.
  const BaselineHazard baseline = breslow_baseline(d, w, beta_bar);
  const SandwichResult sw = sandwich_covariance(d, w, beta_bar, baseline);
  result.covariance = sw.psi;
  result.standard_errors = ase_report_from(sw.psi, d.size());
  result.warnings.ybar_zero_drops = sw.ybar_zero_drops;
  result.warnings.weight_floor_hits = w.floor_hits() - floor_before;
  return result;
}

FitResult fit_wee(const Dataset& d, const CensoringWeights& w, const NewtonConfig& solver) {
  const std::uint64_t floor_before = w.floor_hits();
  FitResult result;
  result.method = "wee";
  result.replications = 1;
  result.n = d.size();

  const auto score = [&](const Eigen::VectorXd& b) { return wee_score(b, d, w); };
  const auto jac = [&](const Eigen::VectorXd& b) { return wee_jacobian(b, d, w); };
  auto [beta, diag] = newton_solve(score, jac, Eigen::VectorXd::Zero(d.p()), solver);
  result.beta = beta;
  result.iterations = diag.iterations;
  result.converged = true;
  result.score_norm = diag.score_norm;
  result.warnings.ridge_engagements = diag.ridge_engagements;

  const BaselineHazard baseline = breslow_baseline(d, w, beta);
  const SandwichResult sw = sandwich_covariance(d, w, beta, baseline);
  result.covariance = sw.psi;
  result.standard_errors = ase_report_from(sw.psi, d.size());
  result.warnings.ybar_zero_drops = sw.ybar_zero_drops;
  result.warnings.weight_floor_hits = w.floor_hits() - floor_before;
  return result;
}

FitResult fit_reference_pl(const Dataset& d, const NewtonConfig& solver) {
  FitResult result;
  result.method = "pl";
  result.replications = 1;
  result.n = d.size();

  const auto score = [&](const Eigen::VectorXd& b) { return pl_score(b, d); };
  const auto jac = [&](const Eigen::VectorXd& b) -> Eigen::MatrixXd {
    return -pl_information(b, d);
  };
  auto [beta, diag] = newton_solve(score, jac, Eigen::VectorXd::Zero(d.p()),
                                   pl_defaults(solver));
  result.beta = beta;
  result.iterations = diag.iterations;
  result.converged = true;
  result.score_norm = diag.score_norm;
  result.warnings.ridge_engagements = diag.ridge_engagements;
  result.warnings.empty_risk_sets = pl_accumulate(beta, d, nullptr, nullptr);

  // Model-based covariance: inverse of the per-subject information.
  const Eigen::MatrixXd info = pl_information(beta, d);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info);
  if (es.eigenvalues().minCoeff() < 1e-10 * es.eigenvalues().maxCoeff()) {
    throw DegenerateInformation("fit_reference_pl: information matrix is numerically singular");
  }
  result.covariance = info.inverse();
  result.standard_errors = ase_report_from(result.covariance, d.size());
  return result;
}

}  // namespace prevcox
