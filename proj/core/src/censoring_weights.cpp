#include "prevcox/censoring_weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace prevcox {

namespace {

struct TimeEvent {
  double time;
  int event;  // 1 = censoring observed (delta = 0)
};

std::vector<TimeEvent> residual_times(const Dataset& d) {
  std::vector<TimeEvent> v;
  v.reserve(d.size());
  for (const SubjectRecord& r : d.records()) {
    v.push_back({r.y - r.a, 1 - r.delta});
  }
  std::sort(v.begin(), v.end(), [](const TimeEvent& a, const TimeEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    return a.event > b.event;  // ties: events first
  });
  return v;
}

}  // namespace

StepSurvival km_residual_censoring(const Dataset& d) {
  const std::vector<TimeEvent> v = residual_times(d);
  StepSurvival s;
  double surv = 1.0;
  std::size_t i = 0;
  const std::size_t n = v.size();
  while (i < n) {
    const double t = v[i].time;
    int events = 0;
    std::size_t j = i;
    while (j < n && v[j].time == t) {
      events += v[j].event;
      ++j;
    }
    if (events > 0) {
      const double at_risk = static_cast<double>(n - i);
      surv *= 1.0 - static_cast<double>(events) / at_risk;
      s.jump_times.push_back(t);
      s.values.push_back(surv);
    }
    i = j;
  }
  return s;  // no censoring events -> no jumps -> identically 1
}

StepCumulative nelson_aalen_residual_censoring(const Dataset& d) {
  const std::vector<TimeEvent> v = residual_times(d);
  StepCumulative h;
  double cum = 0.0;
  std::size_t i = 0;
  const std::size_t n = v.size();
  while (i < n) {
    const double t = v[i].time;
    int events = 0;
    std::size_t j = i;
    while (j < n && v[j].time == t) {
      events += v[j].event;
      ++j;
    }
    if (events > 0) {
      cum += static_cast<double>(events) / static_cast<double>(n - i);
      h.times.push_back(t);
      h.values.push_back(cum);
    }
    i = j;
  }
  return h;
}

CensoringWeights::CensoringWeights(const Dataset& d, TruncationModel truncation, double floor_eps,
                                   WeightForm form)
    : survival_(km_residual_censoring(d)),
      truncation_(std::move(truncation)),
      floor_eps_(floor_eps),
      form_(form) {
  if (!(floor_eps_ > 0.0)) throw std::invalid_argument("floor_eps must be > 0");
  cache_.reserve(d.size());
  for (const SubjectRecord& r : d.records()) cache_.push_back(omega(r.y));
}

CensoringWeights::CensoringWeights(StepSurvival survival, TruncationModel truncation,
                                   std::vector<double> subject_times, double floor_eps,
                                   WeightForm form)
    : survival_(std::move(survival)),
      truncation_(std::move(truncation)),
      floor_eps_(floor_eps),
      form_(form) {
  if (!(floor_eps_ > 0.0)) throw std::invalid_argument("floor_eps must be > 0");
  cache_.reserve(subject_times.size());
  for (double t : subject_times) cache_.push_back(omega(t));
}

CensoringWeights::CensoringWeights(const CensoringWeights& other)
    : survival_(other.survival_),
      truncation_(other.truncation_),
      floor_eps_(other.floor_eps_),
      form_(other.form_),
      cache_(other.cache_),
      floor_hits_(other.floor_hits_.load(std::memory_order_relaxed)) {}

CensoringWeights& CensoringWeights::operator=(const CensoringWeights& other) {
  if (this != &other) {
    survival_ = other.survival_;
    truncation_ = other.truncation_;
    floor_eps_ = other.floor_eps_;
    form_ = other.form_;
    cache_ = other.cache_;
    floor_hits_.store(other.floor_hits_.load(std::memory_order_relaxed),
                      std::memory_order_relaxed);
  }
  return *this;
}

// Separable: sum_k S_k [G(min(t_{k+1}, y)) - G(t_k)];
// Convolution: sum_k S_k [G(y - t_k) - G(y - min(t_{k+1}, y))].
// Either way the step survival is constant per segment and G is closed
// form, so the evaluation is exact. With no censoring both reduce to
// G(y); with uniform truncation they coincide.
double CensoringWeights::omega(double y) const {
  if (y < 0.0 || std::isnan(y)) throw std::domain_error("omega: y must be >= 0");
  if (y == 0.0) return 0.0;
  const std::vector<double>& jumps = survival_.jump_times;
  const std::vector<double>& values = survival_.values;
  const bool conv = form_ == WeightForm::Convolution;
  double total = 0.0;
  double left = 0.0;
  double g_left = conv ? truncation_.cdf(y) : truncation_.cdf(0.0);
  for (std::size_t k = 0; k < jumps.size() && left < y; ++k) {
    const double seg_end = jumps[k];
    if (seg_end <= left) continue;
    const double right = std::min(seg_end, y);
    const double g_right = conv ? truncation_.cdf(y - right) : truncation_.cdf(right);
    const double value = k == 0 ? 1.0 : values[k - 1];
    total += conv ? value * (g_left - g_right) : value * (g_right - g_left);
    g_left = g_right;
    left = right;
  }
  if (left < y) {
    const double tail = jumps.empty() ? 1.0 : values.back();
    total += conv ? tail * (g_left - truncation_.cdf(0.0))
                  : tail * (truncation_.cdf(y) - g_left);
  }
  return total;
}

double CensoringWeights::omega_ratio(double u, double y) const {
  if (!(u > 0.0) || u > y) {
    throw std::domain_error("omega_ratio: requires 0 < u <= y");
  }
  const double numerator = omega(u);
  double denominator = omega(y);
  if (denominator < floor_eps_) {
    denominator = floor_eps_;
    floor_hits_.fetch_add(1, std::memory_order_relaxed);
  }
  // the weight is not monotone beyond the censoring horizon; keep the
  // sampling probability in (0, 1]
  return std::min(1.0, numerator / denominator);
}

}  // namespace prevcox
