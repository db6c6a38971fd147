#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace stratdesign {

/// One table cell. `std::monostate` is a missing value (NA).
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

enum class ColumnType { Integer, Real, Text };

struct Column {
  std::string name;
  std::vector<Cell> cells;

  bool operator==(const Column&) const = default;
};

/// Column-oriented unit table: one row per sampling unit, one column per
/// variable. Every column has the same number of cells.
class Table {
 public:
  Table() = default;
  explicit Table(std::vector<Column> columns);

  std::size_t row_count() const noexcept { return rows_; }
  std::size_t column_count() const noexcept { return columns_.size(); }
  bool empty() const noexcept { return columns_.empty(); }

  const std::vector<Column>& columns() const noexcept { return columns_; }
  std::vector<std::string> column_names() const;

  bool has_column(std::string_view name) const noexcept;
  const Column& column(std::string_view name) const;
  Column& column(std::string_view name);
  std::size_t column_index(std::string_view name) const;

  /// Appends a column; throws if the name exists or the length differs.
  void add_column(Column column);
  /// Replaces a column of the same name in place, or appends it.
  void set_column(Column column);
  void remove_column(std::string_view name);

  Table select_rows(std::span<const std::size_t> rows) const;

  bool operator==(const Table&) const = default;

 private:
  std::vector<Column> columns_;
  std::size_t rows_ = 0;
};

inline bool is_missing(const Cell& cell) noexcept {
  return std::holds_alternative<std::monostate>(cell);
}

/// Numeric value of an integer or real cell; nullopt for NA. Text cells that
/// do not parse as numbers throw TypeMismatch.
std::optional<double> cell_number(const Cell& cell);

/// Text used for stratum labels and ids. NA renders as "NA".
std::string cell_text(const Cell& cell);

/// Shortest round-trip decimal rendering of a double ("5", "3.4", "1e-07").
std::string format_real(double value);

/// Infers a cell from raw text: "" and "NA" are missing, then integer, real,
/// and text are tried in that order.
Cell parse_cell(std::string_view text);

ColumnType infer_type(const Column& column) noexcept;
std::string_view type_name(ColumnType type) noexcept;

/// Numeric view of a column; text cells throw TypeMismatch naming the column.
std::vector<std::optional<double>> numeric_column(const Table& table,
                                                  std::string_view name);
std::vector<std::string> text_column(const Table& table, std::string_view name);

/// Distinct values of a column rendered as text, sorted bytewise.
std::vector<std::string> distinct_labels(const Table& table, std::string_view name);

}  // namespace stratdesign
