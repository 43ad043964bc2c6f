#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace prevcox {

// Right-continuous survival step function: 1 on [0, jump_times[0]),
// values[k] on [jump_times[k], jump_times[k+1]). Nonincreasing.
struct StepSurvival {
  std::vector<double> jump_times;  // strictly increasing, all > 0
  std::vector<double> values;      // value from jump_times[k] onward

  double operator()(double t) const {
    auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - jump_times.begin());
    return k == 0 ? 1.0 : values[k - 1];
  }

  // Lebesgue integral over [lo, hi]; exact for the step function.
  double integral(double lo, double hi) const {
    if (hi <= lo) return 0.0;
    double total = 0.0;
    double left = lo;
    for (std::size_t k = 0; k < jump_times.size() && left < hi; ++k) {
      const double seg_end = jump_times[k];
      if (seg_end <= left) continue;
      const double value = k == 0 ? 1.0 : values[k - 1];
      const double right = std::min(seg_end, hi);
      total += value * (right - left);
      left = right;
    }
    if (left < hi) {
      const double tail = jump_times.empty() ? 1.0 : values.back();
      total += tail * (hi - left);
    }
    return total;
  }
};

// Nondecreasing right-continuous step function with value 0 before the
// first time point (cumulative hazards).
struct StepCumulative {
  std::vector<double> times;   // strictly increasing
  std::vector<double> values;  // cumulative value from times[k] onward

  double operator()(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin());
    return k == 0 ? 0.0 : values[k - 1];
  }
};

}  // namespace prevcox
