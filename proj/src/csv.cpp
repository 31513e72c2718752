#include "laker/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>

namespace laker {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return {buf.data(), res.ptr};
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

CsvRow& CsvRow::add(std::string_view s) {
  fields_.push_back(csv_field(s));
  return *this;
}

CsvRow& CsvRow::add(double v) {
  fields_.push_back(format_number(v));
  return *this;
}

CsvRow& CsvRow::add(long long v) {
  fields_.push_back(std::to_string(v));
  return *this;
}

void CsvRow::write(std::ostream& out) const {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (i) out << ',';
    out << fields_[i];
  }
  out << '\n';
}

void write_csv_header(std::ostream& out, const std::vector<std::string>& names) {
  CsvRow row;
  for (const auto& n : names) row.add(std::string_view(n));
  row.write(out);
}

}  // namespace laker
