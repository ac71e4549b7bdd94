#include "tsgen/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "tsgen/rng.hpp"

namespace tsgen {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path) {
  if (!out_) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
}

void CsvWriter::header(const std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out_ << ',';
    out_ << names[i];
  }
  out_ << '\n';
}

CsvWriter& CsvWriter::field(const std::string& s) {
  if (row_started_) out_ << ',';
  out_ << s;
  row_started_ = true;
  return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(format_double(v)); }

CsvWriter& CsvWriter::field(long long v) { return field(std::to_string(v)); }

void CsvWriter::end_row() {
  out_ << '\n';
  row_started_ = false;
}

void CsvWriter::close() { out_.close(); }

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

bool parse_number(const std::string& s, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos == s.size() && !s.empty();
  } catch (...) {
    return false;
  }
}

}  // namespace

std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    const std::string& column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path.string());

  std::string line;
  std::vector<double> values;
  long long col = -1;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split_row(line);
    if (first) {
      first = false;
      // Resolve the column: numeric index, or name in a header row.
      try {
        col = std::stoll(column);
      } catch (...) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (cells[i] == column) col = static_cast<long long>(i);
        }
        if (col < 0) {
          throw std::runtime_error("column '" + column + "' not found in " +
                                   path.string());
        }
        continue;  // header row consumed
      }
      double v;
      if (col < static_cast<long long>(cells.size()) &&
          parse_number(cells[static_cast<std::size_t>(col)], v)) {
        values.push_back(v);
      }
      continue;  // header row without named column, or first data row
    }
    if (col < 0 || col >= static_cast<long long>(cells.size())) {
      throw std::runtime_error("row with too few columns in " + path.string());
    }
    double v;
    if (!parse_number(cells[static_cast<std::size_t>(col)], v)) {
      throw std::runtime_error("non-numeric cell in " + path.string());
    }
    values.push_back(v);
  }
  return values;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace tsgen
