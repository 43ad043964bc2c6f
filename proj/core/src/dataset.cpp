#include "prevcox/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prevcox/errors.hpp"

namespace prevcox {

Dataset::Dataset(std::vector<SubjectRecord> records) : records_(std::move(records)) {
  if (records_.empty()) {
    throw DataError(DataError::Kind::EmptyDataset, "dataset has no records");
  }
  if (records_.size() < 2) {
    throw DataError(DataError::Kind::InvariantViolation,
                    "dataset needs at least 2 records, got 1", 1);
  }
  p_ = static_cast<int>(records_.front().z.size());
  if (p_ < 1) {
    throw DataError(DataError::Kind::InvariantViolation,
                    "record 1 has no covariates", 1);
  }
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const SubjectRecord& r = records_[i];
    const long row = static_cast<long>(i) + 1;
    if (!(r.a >= 0.0) || !std::isfinite(r.a)) {
      throw DataError(DataError::Kind::InvariantViolation,
                      "row " + std::to_string(row) + ": a must be finite and >= 0", row);
    }
    if (!(r.y > 0.0) || !std::isfinite(r.y)) {
      throw DataError(DataError::Kind::InvariantViolation,
                      "row " + std::to_string(row) + ": y must be finite and > 0", row);
    }
    if (r.a >= r.y) {
      throw DataError(DataError::Kind::InvariantViolation,
                      "row " + std::to_string(row) + ": a >= y", row);
    }
    if (r.delta != 0 && r.delta != 1) {
      throw DataError(DataError::Kind::InvariantViolation,
                      "row " + std::to_string(row) + ": delta must be 0 or 1", row);
    }
    if (r.z.size() != p_) {
      throw DataError(DataError::Kind::InvariantViolation,
                      "row " + std::to_string(row) + ": covariate dimension " +
                          std::to_string(r.z.size()) + " != " + std::to_string(p_),
                      row);
    }
    for (Eigen::Index k = 0; k < r.z.size(); ++k) {
      if (!std::isfinite(r.z[k])) {
        throw DataError(DataError::Kind::InvariantViolation,
                        "row " + std::to_string(row) + ": covariate " +
                            std::to_string(k + 1) + " is not finite",
                        row);
      }
    }
    tau_ = std::max(tau_, r.y);
    n_events_ += static_cast<std::size_t>(r.delta);
  }
  if (n_events_ == 0) {
    throw DataError(DataError::Kind::NoEvents, "dataset has no events (all delta = 0)");
  }
}

std::vector<double> distinct_failure_times(const Dataset& d) {
  std::vector<double> times;
  times.reserve(d.event_count());
  for (const SubjectRecord& r : d.records()) {
    if (r.delta == 1) times.push_back(r.y);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

}  // namespace prevcox
