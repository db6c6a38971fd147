#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "stratdesign/table.hpp"

namespace stratdesign::csv {

/// Parses RFC-4180 CSV. The first record is the header. Unquoted fields are
/// type-inferred per cell (NA/empty, integer, real, text); quoted fields are
/// always text. When `id_column` is given it must exist, be non-missing and
/// unique.
Table parse(std::string_view text, const std::optional<std::string>& id_column = std::nullopt);
Table read_file(const std::filesystem::path& path,
                const std::optional<std::string>& id_column = std::nullopt);

/// Canonical serialization: `\n` line ends, NA for missing, reals always carry
/// a decimal point or exponent, text quoted whenever it would otherwise parse
/// as something else. parse(format(t)) == t.
std::string format(const Table& table);
void write_file(const Table& table, const std::filesystem::path& path);

/// Throws DuplicateId / MissingValues if the column does not identify rows.
void check_unique_ids(const Table& table, std::string_view id_column);

}  // namespace stratdesign::csv
