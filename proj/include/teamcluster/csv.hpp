#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace teamcluster::csv {

/// Minimal RFC 4180 reader: comma separator, double-quoted fields with ""
/// escapes, CRLF or LF line endings. Lines starting with '#' are skipped.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  /// Next record, or nullopt at end of input. line() is the 1-based
  /// physical line on which the record started.
  std::optional<std::vector<std::string>> next();
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t physical_line_ = 0;
  std::size_t record_line_ = 0;
};

/// Quotes a field only when it contains a separator, quote or newline.
std::string escape(std::string_view field);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_exact(double value);

/// Decimal text rounded to the given number of significant digits.
std::string format_significant(double value, int digits = 12);

/// Parses a full-field decimal number; nullopt when any character is left over.
std::optional<double> parse_double(std::string_view text);

}  // namespace teamcluster::csv
