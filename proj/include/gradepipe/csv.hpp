#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "gradepipe/error.hpp"

namespace gradepipe::csv {

using Row = std::vector<std::string>;

/// RFC 4180-style reader: quoted fields, doubled quotes, CRLF or LF.
/// A leading UTF-8 BOM is skipped. Blank lines are dropped.
inline std::vector<Row> parse(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_row = [&] {
    if (field_started || !row.empty() || !field.empty()) {
      row.push_back(std::move(field));
      rows.push_back(std::move(row));
    }
    row.clear();
    field.clear();
    field_started = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  end_row();
  return rows;
}

/// Header-keyed table. Throws ParseError if a required column is missing or a
/// row has the wrong arity.
class Table {
 public:
  Table(std::string_view text, const std::vector<std::string>& required) {
    auto rows = parse(text);
    if (rows.empty()) throw ParseError("missing CSV header");
    header_ = rows.front();
    for (std::size_t i = 0; i < header_.size(); ++i) index_[header_[i]] = i;
    for (const auto& col : required) {
      if (!index_.count(col)) throw ParseError("missing CSV column '" + col + "'");
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != header_.size()) {
        throw ParseError("CSV row " + std::to_string(r + 1) + " has " + std::to_string(rows[r].size()) +
                         " fields, expected " + std::to_string(header_.size()));
      }
      rows_.push_back(std::move(rows[r]));
    }
  }

  std::size_t size() const { return rows_.size(); }
  const std::string& at(std::size_t row, const std::string& column) const {
    return rows_.at(row).at(index_.at(column));
  }
  bool has_column(const std::string& column) const { return index_.count(column) != 0; }

 private:
  Row header_;
  std::map<std::string, std::size_t> index_;
  std::vector<Row> rows_;
};

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string format_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(row[i]);
  }
  out.push_back('\n');
  return out;
}

}  // namespace gradepipe::csv
