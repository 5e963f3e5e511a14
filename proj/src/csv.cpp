#include "flm/csv.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>

#include "flm/error.hpp"

namespace flm::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

Reader::Reader(const std::filesystem::path& path, std::vector<std::string> columns)
    : in_(path), file_(path.string()), columns_(std::move(columns)) {
  if (!in_) throw LoadError(file_, 0, "cannot open file");
  std::string header;
  if (!std::getline(in_, header)) throw LoadError(file_, 1, "missing header");
  line_ = 1;
  if (header.size() >= 3 && header.compare(0, 3, "\xEF\xBB\xBF") == 0) header.erase(0, 3);
  const auto got = split(trim(header));
  bool ok = got.size() == columns_.size();
  for (std::size_t i = 0; ok && i < got.size(); ++i) ok = got[i] == columns_[i];
  if (!ok) {
    std::string expected;
    for (const auto& c : columns_) expected += (expected.empty() ? "" : ",") + c;
    throw LoadError(file_, 1, "header must be '" + expected + "'");
  }
}

bool Reader::next() {
  while (std::getline(in_, row_)) {
    ++line_;
    if (trim(row_).empty()) continue;
    fields_ = split(trim(row_));
    if (fields_.size() != columns_.size()) {
      fail(fmt::format("expected {} fields, found {}", columns_.size(), fields_.size()));
    }
    return true;
  }
  return false;
}

std::string_view Reader::text(std::size_t column) const { return fields_.at(column); }

long long Reader::integer(std::size_t column) const {
  const auto s = text(column);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(fmt::format("column '{}': '{}' is not an integer", columns_[column], s));
  }
  return v;
}

double Reader::number(std::size_t column) const {
  const auto s = text(column);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(fmt::format("column '{}': '{}' is not a number", columns_[column], s));
  }
  return v;
}

void Reader::fail(const std::string& what) const { throw LoadError(file_, line_, what); }

std::string fixed(double value) {
  // Avoid "-0.000000" so byte-identical outputs do not depend on signed zeros.
  std::string s = fmt::format("{:.6f}", value);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

double parse_clock(std::string_view text) {
  text = trim(text);
  const auto colon = text.find(':');
  auto to_num = [&](std::string_view part) {
    double v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc() || ptr != part.data() + part.size()) {
      throw std::invalid_argument("bad clock value '" + std::string(text) + "'");
    }
    return v;
  };
  if (colon == std::string_view::npos) return to_num(text);
  return to_num(text.substr(0, colon)) * 60.0 + to_num(text.substr(colon + 1));
}

std::string format_clock(double minutes) {
  const auto total = static_cast<long long>(std::llround(minutes));
  return fmt::format("{:02d}:{:02d}", total / 60, total % 60);
}

}  // namespace flm::csv
