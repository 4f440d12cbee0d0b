#include "adatyper/table_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <vector>

namespace adatyper {

TableParseError::TableParseError(std::size_t row, const std::string& message, std::optional<std::size_t> column)
    : FormatError("row " + std::to_string(row) + (column ? ", column " + std::to_string(*column) : std::string()) +
                  ": " + message),
      row_(row),
      column_(column) {}

namespace {

using Record = std::vector<std::string>;

std::vector<Record> split_records(std::string_view text, const DelimitedOptions& opt) {
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    current.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current.clear();
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == opt.quote) {
        if (i + 1 < text.size() && text[i + 1] == opt.quote) {
          field.push_back(opt.quote);
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == opt.quote) {
      if (!field.empty() || field_was_quoted) {
        throw TableParseError(records.size(), "unexpected quote inside an unquoted field", current.size());
      }
      in_quotes = true;
      field_was_quoted = true;
      record_has_content = true;
    } else if (c == opt.delimiter) {
      end_field();
      record_has_content = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // handled by the '\n' branch
    } else if (c == '\n' || c == '\r') {
      if (record_has_content || !field.empty() || !current.empty()) {
        end_record();
      } else {
        // blank line
      }
    } else {
      if (field_was_quoted) {
        throw TableParseError(records.size(), "characters after closing quote", current.size());
      }
      field.push_back(c);
      record_has_content = true;
    }
  }
  if (in_quotes) throw TableParseError(records.size(), "unterminated quoted field", current.size());
  if (record_has_content || !field.empty() || !current.empty()) end_record();
  return records;
}

std::string quote_field(const std::string& v, const DelimitedOptions& opt) {
  const bool needs = v.find(opt.delimiter) != std::string::npos || v.find(opt.quote) != std::string::npos ||
                     v.find('\n') != std::string::npos || v.find('\r') != std::string::npos;
  if (!needs) return v;
  std::string out(1, opt.quote);
  for (char c : v) {
    if (c == opt.quote) out.push_back(opt.quote);
    out.push_back(c);
  }
  out.push_back(opt.quote);
  return out;
}

}  // namespace

Table parse_delimited(std::string_view text, std::string table_id, const DelimitedOptions& options) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  auto records = split_records(text, options);
  if (records.empty()) throw TableParseError(0, "missing header row");
  const auto& headers = records.front();
  if (records.size() < 2) throw TableParseError(1, "table has no data rows");

  std::vector<std::vector<std::string>> cells(headers.size());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != headers.size()) {
      throw TableParseError(r, "expected " + std::to_string(headers.size()) + " fields, found " +
                                   std::to_string(records[r].size()),
                            std::min(headers.size(), records[r].size()));
    }
    for (std::size_t c = 0; c < headers.size(); ++c) cells[c].push_back(std::move(records[r][c]));
  }
  std::vector<Column> columns;
  columns.reserve(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) {
    columns.emplace_back(headers[c], std::move(cells[c]), table_id);
  }
  return Table(std::move(table_id), std::move(columns));
}

Table read_delimited_file(const std::filesystem::path& path, std::string table_id,
                          const DelimitedOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open table file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (table_id.empty()) table_id = path.stem().string();
  return parse_delimited(buf.str(), std::move(table_id), options);
}

std::string to_delimited(const Table& table, const DelimitedOptions& options) {
  std::string out;
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out.push_back(options.delimiter);
    out += quote_field(cols[c].header(), options);
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out.push_back(options.delimiter);
      const auto& v = cols[c].values()[r];
      // A lone empty field would read back as a blank line.
      if (cols.size() == 1 && v.empty()) {
        out += std::string(2, options.quote);
      } else {
        out += quote_field(v, options);
      }
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace adatyper
