#pragma once

#include <atomic>
#include <cstdint>
#include <vector>

#include "prevcox/dataset.hpp"
#include "prevcox/step_function.hpp"
#include "prevcox/truncation.hpp"

namespace prevcox {

// Kaplan-Meier estimate of the residual-censoring survival S_C from the
// residual times v_i = y_i - a_i, where a censoring event is observed
// when delta_i = 0 and v_i is right-censored (by failure) when
// delta_i = 1. With no censoring events the constant function 1 is
// returned (flagged by an empty jump list, not an error).
StepSurvival km_residual_censoring(const Dataset& d);

// Nelson-Aalen cumulative hazard of the residual censoring times, same
// reversed-indicator convention as km_residual_censoring.
StepCumulative nelson_aalen_residual_censoring(const Dataset& d);

// How the censoring survival and the truncation density combine into the
// observation weight:
//   Separable:   w(y) = int_0^y S_C(t) g(t) dt
//   Convolution: w(y) = int_0^y g(a) S_C(y - a) da = P(A < y <= A + C)
// The two coincide for uniform truncation and with no censoring. The
// convolution is the probability that a failure at y is observed
// uncensored given recruitment before y, which is what the thinning
// ratios and the estimating-equation weights target; the separable form
// is monotone and saturating, which keeps late-time weights bounded.
enum class WeightForm { Separable, Convolution };

// Weight function built from the KM step survival and the closed-form
// truncation CDF. Both forms are evaluated exactly over the step grid,
// so the only error is rounding.
//
// omega_ratio guards against vanishing denominators with floor_eps and
// counts every engagement; large counts mean the censoring weights are
// too unstable to trust.
class CensoringWeights {
public:
  CensoringWeights(const Dataset& d, TruncationModel truncation, double floor_eps = 1e-12,
                   WeightForm form = WeightForm::Separable);

  // Test/bootstrap entry point: survival curve supplied directly;
  // subject_times feeds the per-subject cache (may be empty).
  CensoringWeights(StepSurvival survival, TruncationModel truncation,
                   std::vector<double> subject_times = {}, double floor_eps = 1e-12,
                   WeightForm form = WeightForm::Separable);

  CensoringWeights(const CensoringWeights& other);
  CensoringWeights& operator=(const CensoringWeights& other);

  // Omega(y). Throws std::domain_error for y < 0.
  double omega(double y) const;

  // Omega(u) / max(Omega(y), floor_eps) for 0 < u <= y.
  double omega_ratio(double u, double y) const;

  // max(omega_value, floor_eps), counting engagements; for callers that
  // already hold precomputed omega values.
  double apply_floor(double omega_value) const {
    if (omega_value < floor_eps_) {
      floor_hits_.fetch_add(1, std::memory_order_relaxed);
      return floor_eps_;
    }
    return omega_value;
  }

  // Cached Omega(y_i) for subject i of the constructing dataset.
  double omega_at(std::size_t subject) const { return cache_[subject]; }
  const std::vector<double>& cached() const noexcept { return cache_; }

  const StepSurvival& survival() const noexcept { return survival_; }
  const TruncationModel& truncation() const noexcept { return truncation_; }
  double floor_eps() const noexcept { return floor_eps_; }
  WeightForm form() const noexcept { return form_; }

  // Number of omega_ratio evaluations that hit the floor guard.
  std::uint64_t floor_hits() const noexcept { return floor_hits_.load(std::memory_order_relaxed); }

private:
  StepSurvival survival_;
  TruncationModel truncation_;
  double floor_eps_;
  WeightForm form_;
  std::vector<double> cache_;  // Omega(y_i) per subject
  mutable std::atomic<std::uint64_t> floor_hits_{0};
};

}  // namespace prevcox
