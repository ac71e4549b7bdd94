#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace tsgen {

// Round-trip exact, deterministic formatting for doubles ("%.17g").
std::string format_double(double v);

// Minimal CSV writer. All numeric output goes through format_double so
// identical runs produce byte-identical files.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);

  void header(const std::vector<std::string>& names);
  CsvWriter& field(const std::string& s);
  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
  void end_row();
  void close();

 private:
  std::ofstream out_;
  bool row_started_ = false;
};

// Parses a numeric CSV column. Skips a leading header row if the target
// cell does not parse as a number. column may be an index or, when a
// header is present, a column name.
std::vector<double> read_csv_column(const std::filesystem::path& path,
                                    const std::string& column);

std::uint64_t hash_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

}  // namespace tsgen
