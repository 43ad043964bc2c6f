#include "prevcox/inference.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "prevcox/errors.hpp"

namespace prevcox {

namespace {

Eigen::VectorXd linear_predictors(const Eigen::VectorXd& beta, const Dataset& d) {
  Eigen::VectorXd lp(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) lp[static_cast<Eigen::Index>(i)] = beta.dot(d[i].z);
  return lp;
}

std::vector<double> omega_values(const Dataset& d, const CensoringWeights& w) {
  std::vector<double> om(d.size());
  const bool cached = w.cached().size() == d.size();
  for (std::size_t j = 0; j < d.size(); ++j) {
    om[j] = cached ? w.omega_at(j) : w.omega(d[j].y);
  }
  return om;
}

void check_information(const Eigen::MatrixXd& gamma, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma);
  const double max_ev = es.eigenvalues().maxCoeff();
  const double min_ev = es.eigenvalues().minCoeff();
  if (!(max_ev > 0.0) || min_ev < 1e-10 * max_ev) {
    throw DegenerateInformation(std::string(who) + ": information matrix is numerically singular");
  }
}

// Weighted risk sums at time t over uncensored subjects:
//   W_k(t) = n^-1 sum_{j: delta_j = 1, y_j >= t} z_j^{(k)} e^{beta'z_j} / Omega(y_j).
// Assembled once on the merged grid by a single descending sweep.
struct WeightedRiskSums {
  std::vector<double> grid;        // ascending query times
  std::vector<double> w0;          // W_0 at each grid point
  std::vector<Eigen::VectorXd> w1; // W_1 at each grid point

  WeightedRiskSums(const Dataset& d, const CensoringWeights& w, const Eigen::VectorXd& beta,
                   std::vector<double> query_times)
      : grid(std::move(query_times)) {
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    const std::size_t n = d.size();
    const int p = d.p();
    const Eigen::VectorXd lp = linear_predictors(beta, d);
    const std::vector<double> om = omega_values(d, w);

    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return d[static_cast<std::size_t>(a)].y > d[static_cast<std::size_t>(b)].y;
    });

    w0.assign(grid.size(), 0.0);
    w1.assign(grid.size(), Eigen::VectorXd::Zero(p));
    double s0 = 0.0;
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
    std::size_t next = 0;  // next subject (descending y) to absorb
    for (std::size_t g = grid.size(); g-- > 0;) {
      const double t = grid[g];
      while (next < n && d[static_cast<std::size_t>(order[next])].y >= t) {
        const int j = order[next++];
        const SubjectRecord& r = d[static_cast<std::size_t>(j)];
        if (r.delta == 1) {
          const double wj =
              std::exp(lp[j]) / w.apply_floor(om[static_cast<std::size_t>(j)]);
          s0 += wj;
          s1 += wj * r.z;
        }
      }
      w0[g] = s0 / static_cast<double>(n);
      w1[g] = s1 / static_cast<double>(n);
    }
  }

  std::size_t index_of(double t) const {
    const auto it = std::lower_bound(grid.begin(), grid.end(), t);
    return static_cast<std::size_t>(it - grid.begin());
  }
};

// Antiderivative of the KM censoring survival: I(t) = int_0^t S_C(u) du,
// piecewise linear between jumps.
struct SurvivalIntegral {
  std::vector<double> knots;   // 0, jump times
  std::vector<double> prefix;  // integral up to each knot
  std::vector<double> slope;   // S_C value on [knot_k, knot_{k+1})

  explicit SurvivalIntegral(const StepSurvival& s) {
    knots.push_back(0.0);
    prefix.push_back(0.0);
    slope.push_back(1.0);
    for (std::size_t k = 0; k < s.jump_times.size(); ++k) {
      const double width = s.jump_times[k] - knots.back();
      prefix.push_back(prefix.back() + slope.back() * width);
      knots.push_back(s.jump_times[k]);
      slope.push_back(s.values[k]);
    }
  }

  double operator()(double t) const {
    if (t <= 0.0) return 0.0;
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - knots.begin()) - 1;
    return prefix[k] + slope[k] * (t - knots[k]);
  }
};

}  // namespace

double BaselineHazard::cumulative(double t) const {
  double total = 0.0;
  for (std::size_t i = 0; i < times.size() && times[i] < t; ++i) total += increments[i];
  return total;
}

StepCumulative BaselineHazard::cumulative_function() const {
  StepCumulative f;
  f.times = times;
  f.values.resize(increments.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < increments.size(); ++i) {
    acc += increments[i];
    f.values[i] = acc;
  }
  return f;
}

BaselineHazard breslow_baseline(const Dataset& d, const CensoringWeights& w,
                                const Eigen::VectorXd& beta) {
  BaselineHazard baseline;
  baseline.times = distinct_failure_times(d);
  baseline.increments.resize(baseline.times.size());

  WeightedRiskSums sums(d, w, beta, baseline.times);
  const std::size_t n = d.size();
  std::vector<int> failures(baseline.times.size(), 0);
  for (const SubjectRecord& r : d.records()) {
    if (r.delta == 1) {
      const auto it = std::lower_bound(baseline.times.begin(), baseline.times.end(), r.y);
      ++failures[static_cast<std::size_t>(it - baseline.times.begin())];
    }
  }
  for (std::size_t i = 0; i < baseline.times.size(); ++i) {
    const double t = baseline.times[i];
    // denominator: sum_j {Omega(t)/Omega(y_j)} e^{beta'z_j} over the
    // weighted uncensored risk mass = n * Omega(t) * W_0(t)
    const double denom =
        static_cast<double>(n) * w.omega(t) * sums.w0[sums.index_of(t)];
    baseline.increments[i] = static_cast<double>(failures[i]) / denom;
  }
  return baseline;
}

MartingaleResiduals martingale_residuals(const Dataset& d, const CensoringWeights& w,
                                         const Eigen::VectorXd& beta,
                                         const BaselineHazard& baseline) {
  const std::size_t n = d.size();
  MartingaleResiduals res;
  res.failure_grid = baseline.times;
  const Eigen::VectorXd lp = linear_predictors(beta, d);
  const std::vector<double> om = omega_values(d, w);

  std::vector<double> omega_grid(res.failure_grid.size());
  for (std::size_t l = 0; l < res.failure_grid.size(); ++l) {
    omega_grid[l] = w.omega(res.failure_grid[l]);
  }
  res.d_failure = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                        static_cast<Eigen::Index>(res.failure_grid.size()));
  for (std::size_t i = 0; i < n; ++i) {
    const SubjectRecord& r = d[i];
    if (r.delta != 1) continue;  // compensator accrues on the uncensored at-risk process
    const double e_lp = std::exp(lp[static_cast<Eigen::Index>(i)]);
    const double inv_om = 1.0 / w.apply_floor(om[i]);
    for (std::size_t l = 0; l < res.failure_grid.size(); ++l) {
      const double t = res.failure_grid[l];
      if (r.y < t) break;
      double value = -omega_grid[l] * inv_om * baseline.increments[l] * e_lp;
      if (r.y == t) value += 1.0;
      res.d_failure(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l)) = value;
    }
  }

  const StepCumulative na = nelson_aalen_residual_censoring(d);
  res.censoring_grid = na.times;
  res.d_censoring = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(res.censoring_grid.size()));
  double prev = 0.0;
  std::vector<double> dh(na.times.size());
  for (std::size_t c = 0; c < na.times.size(); ++c) {
    dh[c] = na.values[c] - prev;
    prev = na.values[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const SubjectRecord& r = d[i];
    const double v = r.y - r.a;
    for (std::size_t c = 0; c < res.censoring_grid.size(); ++c) {
      const double t = res.censoring_grid[c];
      if (v < t) break;
      double value = -dh[c];
      if (v == t && r.delta == 0) value += 1.0;
      res.d_censoring(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = value;
    }
  }
  return res;
}

Eigen::MatrixXd gamma_hat(const Eigen::VectorXd& beta,
                          const std::vector<std::vector<AdjustedRiskSet>>& collections,
                          const Dataset& d) {
  if (collections.empty()) {
    throw std::invalid_argument("gamma_hat: need at least one risk-set collection");
  }
  const int p = d.p();
  Eigen::MatrixXd gamma = Eigen::MatrixXd::Zero(p, p);
  for (const auto& sets : collections) gamma -= ppl_loglik_hessian(beta, sets, d);
  gamma /= static_cast<double>(collections.size());
  check_information(gamma, "gamma_hat");
  return gamma;
}

Eigen::MatrixXd gamma_hat(const Eigen::VectorXd& beta, const Dataset& d,
                          const CensoringWeights& w) {
  Eigen::MatrixXd gamma = -wee_jacobian(beta, d, w);
  check_information(gamma, "gamma_hat");
  return gamma;
}

SandwichResult sandwich_covariance(const Dataset& d, const CensoringWeights& w,
                                   const Eigen::VectorXd& beta,
                                   const BaselineHazard& baseline) {
  const std::size_t n = d.size();
  const int p = d.p();
  const Eigen::VectorXd lp = linear_predictors(beta, d);
  const std::vector<double> om = omega_values(d, w);

  // risk-sum grid: failure times plus every observed y (the latter feed
  // the censoring correction)
  std::vector<double> query = baseline.times;
  for (const SubjectRecord& r : d.records()) query.push_back(r.y);
  WeightedRiskSums sums(d, w, beta, std::move(query));

  const MartingaleResiduals mres = martingale_residuals(d, w, beta, baseline);

  // term 1: integral of (z_i - W1/W0)(t) against the failure residuals
  std::vector<Eigen::VectorXd> zbar(mres.failure_grid.size());
  for (std::size_t l = 0; l < mres.failure_grid.size(); ++l) {
    const std::size_t g = sums.index_of(mres.failure_grid[l]);
    zbar[l] = sums.w1[g] / sums.w0[g];
  }
  std::vector<Eigen::VectorXd> psi(n, Eigen::VectorXd::Zero(p));
  for (std::size_t i = 0; i < n; ++i) {
    const SubjectRecord& r = d[i];
    if (r.delta != 1) continue;
    for (std::size_t l = 0; l < mres.failure_grid.size(); ++l) {
      if (r.y < mres.failure_grid[l]) break;
      const double dm = mres.d_failure(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l));
      if (dm != 0.0) psi[i] += (r.z - zbar[l]) * dm;
    }
  }

  // term 2: censoring correction G(t)/ybar(t) against the censoring
  // residuals, on the grid of distinct censored residual times
  SandwichResult out;
  out.ybar_zero_drops = 0;
  const std::size_t n_grid = mres.censoring_grid.size();
  if (n_grid > 0) {
    const SurvivalIntegral surv_int(w.survival());

    // c_k = sum_{i: y_i <= y_k} 1 / W0(y_i), prefix sums over ascending y
    std::vector<int> asc(n);
    for (std::size_t i = 0; i < n; ++i) asc[i] = static_cast<int>(i);
    std::sort(asc.begin(), asc.end(), [&](int a, int b) {
      return d[static_cast<std::size_t>(a)].y < d[static_cast<std::size_t>(b)].y;
    });
    std::vector<double> inv_w0_prefix(n);  // aligned with asc
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double y = d[static_cast<std::size_t>(asc[k])].y;
      acc += 1.0 / sums.w0[sums.index_of(y)];
      inv_w0_prefix[k] = acc;
    }
    // prefix including ties: position of the last subject with y <= y_k
    std::vector<double> c_of_subject(n, 0.0);
    {
      std::size_t k = 0;
      while (k < n) {
        std::size_t j = k;
        const double y = d[static_cast<std::size_t>(asc[k])].y;
        while (j + 1 < n && d[static_cast<std::size_t>(asc[j + 1])].y == y) ++j;
        for (std::size_t m = k; m <= j; ++m) {
          c_of_subject[static_cast<std::size_t>(asc[m])] = inv_w0_prefix[j];
        }
        k = j + 1;
      }
    }

    // per-subject factor q_k = z_k e^{beta'z_k} / Omega(y_k)^2 for
    // uncensored k, combined with h_k(t) = I(t <= y_k) int_t^{y_k} S_C
    std::vector<Eigen::VectorXd> g_vec(n_grid, Eigen::VectorXd::Zero(p));
    for (std::size_t k = 0; k < n; ++k) {
      const SubjectRecord& r = d[k];
      if (r.delta != 1) continue;
      const double om_k = w.apply_floor(om[k]);
      const double factor = std::exp(lp[static_cast<Eigen::Index>(k)]) / (om_k * om_k);
      const double int_to_yk = surv_int(r.y);
      for (std::size_t c = 0; c < n_grid; ++c) {
        const double t = mres.censoring_grid[c];
        if (t > r.y) break;
        const double h_k = int_to_yk - surv_int(t);
        g_vec[c] += (factor * h_k * c_of_subject[k]) * r.z;
      }
    }
    const double inv_n2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    for (auto& g : g_vec) g *= inv_n2;

    // ybar(t) = n^-1 #{i : y_i - a_i > t}; drop grid points with empty tail
    std::vector<double> v_sorted(n);
    for (std::size_t i = 0; i < n; ++i) v_sorted[i] = d[i].y - d[i].a;
    std::sort(v_sorted.begin(), v_sorted.end());
    std::vector<double> ybar(n_grid);
    for (std::size_t c = 0; c < n_grid; ++c) {
      const auto it =
          std::upper_bound(v_sorted.begin(), v_sorted.end(), mres.censoring_grid[c]);
      ybar[c] = static_cast<double>(v_sorted.end() - it) / static_cast<double>(n);
      if (ybar[c] == 0.0) ++out.ybar_zero_drops;  // empty tail, grid point dropped
    }

    for (std::size_t i = 0; i < n; ++i) {
      const double v = d[i].y - d[i].a;
      for (std::size_t c = 0; c < n_grid; ++c) {
        if (v < mres.censoring_grid[c]) break;
        if (ybar[c] == 0.0) continue;
        const double dmc =
            mres.d_censoring(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
        if (dmc != 0.0) psi[i] += g_vec[c] * (dmc / ybar[c]);
      }
    }
  }

  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < n; ++i) sigma += psi[i] * psi[i].transpose();
  sigma /= static_cast<double>(n);

  out.sigma = sigma;
  out.gamma = gamma_hat(beta, d, w);
  const Eigen::MatrixXd gamma_inv = out.gamma.inverse();
  out.psi = gamma_inv * sigma * gamma_inv;
  out.psi = 0.5 * (out.psi + out.psi.transpose());  // clean up rounding asymmetry
  return out;
}

Eigen::VectorXd ase_report_from(const Eigen::MatrixXd& psi, std::size_t n) {
  return (psi.diagonal() / static_cast<double>(n)).cwiseMax(0.0).cwiseSqrt();
}

Eigen::VectorXd ase_report(const FitResult& fit) {
  return ase_report_from(fit.covariance, fit.n);
}

}  // namespace prevcox
