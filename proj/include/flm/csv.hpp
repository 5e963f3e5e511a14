#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace flm::csv {

// Minimal reader for the unquoted comma-separated files this project reads and
// writes. The header must match `columns` exactly; parse failures raise
// LoadError with file and line.
class Reader {
 public:
  Reader(const std::filesystem::path& path, std::vector<std::string> columns);

  // Advances to the next non-empty row. Returns false at end of file.
  bool next();

  int line() const noexcept { return line_; }
  const std::string& file() const noexcept { return file_; }

  std::string_view text(std::size_t column) const;
  long long integer(std::size_t column) const;
  double number(std::size_t column) const;

  [[noreturn]] void fail(const std::string& what) const;

 private:
  std::ifstream in_;
  std::string file_;
  std::vector<std::string> columns_;
  std::string row_;
  std::vector<std::string_view> fields_;
  int line_ = 0;
};

std::vector<std::string_view> split(std::string_view line, char sep = ',');

// Fixed six-decimal rendering used for every real-valued CSV field.
std::string fixed(double value);

// Parses "HH:MM" or a plain number of minutes.
double parse_clock(std::string_view text);
std::string format_clock(double minutes);

}  // namespace flm::csv
