#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace playtrace::csv {

/// Reads one logical record at a time; quoted fields may span lines.
/// Memory use is bounded by the longest record.
class RecordReader {
 public:
  explicit RecordReader(std::istream& in) : in_(in) {}

  /// Raw record text without the trailing line break. False at end of input.
  bool next_raw(std::string& record);

  std::size_t bytes_read() const noexcept { return bytes_; }
  std::size_t records_read() const noexcept { return records_; }

 private:
  std::istream& in_;
  std::size_t bytes_ = 0;
  std::size_t records_ = 0;
};

/// Splits a raw record into unquoted fields. Returns false on a malformed
/// quote (unterminated or stray characters after a closing quote).
bool split(std::string_view record, std::vector<std::string>& fields);

/// Quotes a field if it contains a delimiter, quote, or line break.
std::string escape(std::string_view field);

void append_field(std::string& line, std::string_view field, bool first);

}  // namespace playtrace::csv
