#include "playtrace/csv.hpp"

namespace playtrace::csv {

bool RecordReader::next_raw(std::string& record) {
  record.clear();
  std::string line;
  bool in_quotes = false;
  bool any = false;
  while (std::getline(in_, line)) {
    any = true;
    bytes_ += line.size() + (in_.eof() ? 0 : 1);
    for (char c : line)
      if (c == '"') in_quotes = !in_quotes;
    record += line;
    if (!in_quotes) break;
    record += '\n';
  }
  if (!any) return false;
  if (!record.empty() && record.back() == '\r') record.pop_back();
  ++records_;
  return true;
}

bool split(std::string_view record, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  std::size_t i = 0;
  const std::size_t n = record.size();
  for (;;) {
    field.clear();
    if (i < n && record[i] == '"') {
      ++i;
      for (;;) {
        if (i >= n) return false;
        char c = record[i++];
        if (c == '"') {
          if (i < n && record[i] == '"') {
            field += '"';
            ++i;
          } else {
            break;
          }
        } else {
          field += c;
        }
      }
      if (i < n && record[i] != ',') return false;
    } else {
      std::size_t end = record.find(',', i);
      if (end == std::string_view::npos) end = n;
      field.assign(record.substr(i, end - i));
      if (field.find('"') != std::string::npos) return false;
      i = end;
    }
    fields.push_back(field);
    if (i >= n) break;
    ++i;  // delimiter
    if (i == n) {
      fields.emplace_back();
      break;
    }
  }
  return true;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out += '"';
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void append_field(std::string& line, std::string_view field, bool first) {
  if (!first) line += ',';
  line += escape(field);
}

}  // namespace playtrace::csv
