#pragma once

#include <stdexcept>
#include <string>

namespace prevcox {

// Input-data failure carrying enough context to point at the offending row.
// Data rows are 1-indexed in messages (the header row is not counted).
class DataError : public std::runtime_error {
public:
  enum class Kind { MissingColumn, Parse, InvariantViolation, EmptyDataset, NoEvents };

  DataError(Kind kind, const std::string& message, long row = -1, std::string column = {})
      : std::runtime_error(message), kind_(kind), row_(row), column_(std::move(column)) {}

  Kind kind() const noexcept { return kind_; }
  long row() const noexcept { return row_; }  // -1 when not tied to a row
  const std::string& column() const noexcept { return column_; }

  const char* kind_name() const noexcept {
    switch (kind_) {
      case Kind::MissingColumn: return "MissingColumn";
      case Kind::Parse: return "ParseError";
      case Kind::InvariantViolation: return "InvariantViolation";
      case Kind::EmptyDataset: return "EmptyDataset";
      case Kind::NoEvents: return "NoEvents";
    }
    return "DataError";
  }

private:
  Kind kind_;
  long row_;
  std::string column_;
};

class NonConvergence : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DegenerateInformation : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class CalibrationFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class AcceptanceStall : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace prevcox
