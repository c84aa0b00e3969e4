#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ecgcl::csv {

/// RFC 4180 table: quoted fields may hold commas, newlines and "" escapes.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws if absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Table parse(std::string_view text);
Table read(const std::filesystem::path& path);

/// Quotes a field if it contains a delimiter, quote or newline.
std::string escape(std::string_view field);

}  // namespace ecgcl::csv
