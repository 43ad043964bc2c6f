#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

namespace prevcox {

// One observation from a prevalent-cohort sample: truncation time a
// (onset to recruitment), observed time y = min(T, a + C), event flag
// delta, covariate vector z. The residual time v = y - a is derived,
// never stored.
struct SubjectRecord {
  double a = 0.0;
  double y = 0.0;
  int delta = 1;
  Eigen::VectorXd z;
};

// Immutable after construction; safe to share read-only across workers.
class Dataset {
public:
  // Validates every record; throws DataError on the first violation.
  // Requirements: n >= 2, at least one event, 0 <= a < y, delta in {0,1},
  // finite covariates of a common dimension.
  explicit Dataset(std::vector<SubjectRecord> records);

  std::size_t size() const noexcept { return records_.size(); }
  int p() const noexcept { return p_; }
  double tau() const noexcept { return tau_; }

  const SubjectRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<SubjectRecord>& records() const noexcept { return records_; }

  std::size_t event_count() const noexcept { return n_events_; }

private:
  std::vector<SubjectRecord> records_;
  int p_ = 0;
  double tau_ = 0.0;
  std::size_t n_events_ = 0;
};

// Strictly increasing list of the distinct y-values carrying delta = 1.
std::vector<double> distinct_failure_times(const Dataset& d);

}  // namespace prevcox
