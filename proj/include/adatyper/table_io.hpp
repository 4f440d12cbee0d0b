#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "adatyper/core.hpp"

namespace adatyper {

/// Raised for malformed delimited text; `row()` is the 0-based physical record
/// index (0 = header row), `column()` the 0-based field when known.
class TableParseError : public FormatError {
 public:
  TableParseError(std::size_t row, const std::string& message, std::optional<std::size_t> column = {});
  std::size_t row() const noexcept { return row_; }
  std::optional<std::size_t> column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::optional<std::size_t> column_;
};

struct DelimitedOptions {
  char delimiter = ',';
  char quote = '"';
};

/// Parse delimiter-separated UTF-8 text. The first record holds the headers;
/// every following record must have the same field count. Quoted fields
/// follow RFC 4180 (doubled quotes escape, newlines allowed inside quotes).
Table parse_delimited(std::string_view text, std::string table_id, const DelimitedOptions& options = {});

Table read_delimited_file(const std::filesystem::path& path, std::string table_id = {},
                          const DelimitedOptions& options = {});

std::string to_delimited(const Table& table, const DelimitedOptions& options = {});

}  // namespace adatyper
