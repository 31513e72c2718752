#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace laker {

// Shortest decimal form that round-trips to the same double.
std::string format_number(double v);

// RFC-4180 field: quoted only when it contains a comma, quote or line break.
std::string csv_field(std::string_view s);

/// Accumulates one record; empty optionals become empty fields.
class CsvRow {
 public:
  CsvRow& add(std::string_view s);
  CsvRow& add(double v);
  CsvRow& add(long long v);
  CsvRow& add(int v) { return add(static_cast<long long>(v)); }
  template <typename T>
  CsvRow& add(const std::optional<T>& v) {
    return v ? add(*v) : add(std::string_view{});
  }

  void write(std::ostream& out) const;

 private:
  std::vector<std::string> fields_;
};

void write_csv_header(std::ostream& out, const std::vector<std::string>& names);

}  // namespace laker
