#pragma once

// Streaming reader for the CSV dialect used by the knowledge-graph dumps:
// comma separated, UTF-8, double-quote quoting ("" escapes a quote, quoted
// fields may span lines), LF or CRLF record terminators.

#include <charconv>
#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rapidner::csv {

struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line on which the record starts
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Reads the next record; returns false at end of input. A record that ends
  // inside an open quote is reported through `unterminated()`.
  bool next(Record& record) {
    record.fields.clear();
    std::string line;
    if (!read_line(line)) return false;
    record.line = line_no_;
    if (first_) {
      first_ = false;
      if (line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    }
    std::string field;
    bool quoted = false;
    bool field_was_quoted = false;
    unterminated_ = false;
    for (;;) {
      for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
          if (c == '"') {
            if (i + 1 < line.size() && line[i + 1] == '"') {
              field.push_back('"');
              ++i;
            } else {
              quoted = false;
            }
          } else {
            field.push_back(c);
          }
        } else if (c == '"' && field.empty() && !field_was_quoted) {
          quoted = true;
          field_was_quoted = true;
        } else if (c == ',') {
          record.fields.push_back(std::move(field));
          field.clear();
          field_was_quoted = false;
        } else {
          field.push_back(c);
        }
      }
      if (!quoted) break;
      std::string more;
      if (!read_line(more)) {
        unterminated_ = true;
        break;
      }
      field.push_back('\n');
      line = std::move(more);
    }
    record.fields.push_back(std::move(field));
    return true;
  }

  bool unterminated() const noexcept { return unterminated_; }

 private:
  bool read_line(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::istream& in_;
  std::size_t line_no_ = 0;
  bool first_ = true;
  bool unterminated_ = false;
};

// Strict integer parse of a whole field (surrounding blanks tolerated).
inline std::optional<std::int64_t> parse_int(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

// Header detection rule shared by all loaders: a first record whose first
// field is not an integer is a header.
inline bool looks_like_header(const Record& first) {
  return first.fields.empty() || !parse_int(first.fields.front()).has_value();
}

}  // namespace rapidner::csv
