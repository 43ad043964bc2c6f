#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "prevcox/dataset.hpp"

namespace prevcox {

// Header-based column resolution. Empty z means "auto-detect z1..zk from
// the header"; anything unresolvable raises DataError::MissingColumn.
struct ColumnMapping {
  std::string a = "a";
  std::string y = "y";
  std::string delta = "delta";
  std::vector<std::string> z;
};

// Strict CSV: comma separated, UTF-8, mandatory header row, '.' decimal
// separator, no thousands separators; delta must be literally 0 or 1.
Dataset load_csv(const std::string& path, const ColumnMapping& mapping = {});
Dataset read_csv(std::istream& in, const ColumnMapping& mapping = {});

// Values are rendered with 17 significant digits so a write/load round
// trip reproduces every double bit-for-bit.
void write_csv(const Dataset& d, std::ostream& out, const ColumnMapping& mapping = {});
void write_csv(const Dataset& d, const std::string& path, const ColumnMapping& mapping = {});

}  // namespace prevcox
