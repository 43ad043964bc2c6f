#include "prevcox/csv.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <system_error>

#include "prevcox/errors.hpp"

namespace prevcox {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& token, long row, const std::string& column) {
  const std::string t = trim(token);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || t.empty()) {
    throw DataError(DataError::Kind::Parse,
                    "row " + std::to_string(row) + ", column '" + column +
                        "': cannot parse '" + t + "' as a number",
                    row, column);
  }
  return value;
}

int parse_delta(const std::string& token, long row, const std::string& column) {
  const std::string t = trim(token);
  if (t == "0") return 0;
  if (t == "1") return 1;
  throw DataError(DataError::Kind::Parse,
                  "row " + std::to_string(row) + ", column '" + column +
                      "': delta must be literally 0 or 1, got '" + t + "'",
                  row, column);
}

std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (trim(header[i]) == name) return i;
  }
  throw DataError(DataError::Kind::MissingColumn, "column '" + name + "' not found in header",
                  -1, name);
}

void render(std::ostream& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.write(buf, ptr - buf);
}

}  // namespace

Dataset read_csv(std::istream& in, const ColumnMapping& mapping) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError(DataError::Kind::EmptyDataset, "file is empty (no header row)");
  }
  const std::vector<std::string> header = split_line(line);

  const std::size_t col_a = find_column(header, mapping.a);
  const std::size_t col_y = find_column(header, mapping.y);
  const std::size_t col_delta = find_column(header, mapping.delta);

  std::vector<std::string> z_names = mapping.z;
  if (z_names.empty()) {
    for (int k = 1;; ++k) {
      const std::string name = "z" + std::to_string(k);
      bool found = false;
      for (const std::string& h : header) {
        if (trim(h) == name) {
          found = true;
          break;
        }
      }
      if (!found) break;
      z_names.push_back(name);
    }
    if (z_names.empty()) {
      throw DataError(DataError::Kind::MissingColumn,
                      "no covariate columns: expected z1, z2, ... in the header", -1, "z1");
    }
  }
  std::vector<std::size_t> col_z;
  col_z.reserve(z_names.size());
  for (const std::string& name : z_names) col_z.push_back(find_column(header, name));

  std::vector<SubjectRecord> records;
  long row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_line(line);
    auto field = [&](std::size_t idx, const std::string& name) -> const std::string& {
      if (idx >= fields.size()) {
        throw DataError(DataError::Kind::Parse,
                        "row " + std::to_string(row) + ": missing value for column '" + name + "'",
                        row, name);
      }
      return fields[idx];
    };
    SubjectRecord r;
    r.a = parse_double(field(col_a, mapping.a), row, mapping.a);
    r.y = parse_double(field(col_y, mapping.y), row, mapping.y);
    r.delta = parse_delta(field(col_delta, mapping.delta), row, mapping.delta);
    r.z.resize(static_cast<Eigen::Index>(col_z.size()));
    for (std::size_t k = 0; k < col_z.size(); ++k) {
      r.z[static_cast<Eigen::Index>(k)] = parse_double(field(col_z[k], z_names[k]), row, z_names[k]);
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) {
    throw DataError(DataError::Kind::EmptyDataset, "file has a header but no data rows");
  }
  return Dataset(std::move(records));
}

Dataset load_csv(const std::string& path, const ColumnMapping& mapping) {
  std::ifstream in(path);
  if (!in) {
    throw DataError(DataError::Kind::EmptyDataset, "cannot open file: " + path);
  }
  return read_csv(in, mapping);
}

void write_csv(const Dataset& d, std::ostream& out, const ColumnMapping& mapping) {
  std::vector<std::string> z_names = mapping.z;
  if (z_names.empty()) {
    for (int k = 1; k <= d.p(); ++k) z_names.push_back("z" + std::to_string(k));
  }
  out << mapping.a << ',' << mapping.y << ',' << mapping.delta;
  for (const std::string& name : z_names) out << ',' << name;
  out << '\n';
  for (const SubjectRecord& r : d.records()) {
    render(out, r.a);
    out << ',';
    render(out, r.y);
    out << ',' << r.delta;
    for (Eigen::Index k = 0; k < r.z.size(); ++k) {
      out << ',';
      render(out, r.z[k]);
    }
    out << '\n';
  }
}

void write_csv(const Dataset& d, const std::string& path, const ColumnMapping& mapping) {
  std::ofstream out(path);
  if (!out) {
    throw DataError(DataError::Kind::EmptyDataset, "cannot open file for writing: " + path);
  }
  write_csv(d, out, mapping);
}

}  // namespace prevcox
