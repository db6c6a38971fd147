#include "stratdesign/table.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "stratdesign/error.hpp"

namespace stratdesign {

Table::Table(std::vector<Column> columns) {
  for (auto& c : columns) add_column(std::move(c));
}

std::vector<std::string> Table::column_names() const {
  std::vector<std::string> names;
  names.reserve(columns_.size());
  for (const auto& c : columns_) names.push_back(c.name);
  return names;
}

bool Table::has_column(std::string_view name) const noexcept {
  return std::any_of(columns_.begin(), columns_.end(),
                     [&](const Column& c) { return c.name == name; });
}

std::size_t Table::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  throw Error(ErrorKind::ColumnNotFound, "column '" + std::string(name) + "' not found");
}

const Column& Table::column(std::string_view name) const {
  return columns_[column_index(name)];
}

Column& Table::column(std::string_view name) { return columns_[column_index(name)]; }

void Table::add_column(Column column) {
  if (has_column(column.name)) {
    throw Error(ErrorKind::DuplicateColumn, "column '" + column.name + "' already exists");
  }
  if (columns_.empty()) {
    rows_ = column.cells.size();
  } else if (column.cells.size() != rows_) {
    throw Error(ErrorKind::ShapeMismatch,
                "column '" + column.name + "' has " + std::to_string(column.cells.size()) +
                    " rows, table has " + std::to_string(rows_));
  }
  columns_.push_back(std::move(column));
}

void Table::set_column(Column column) {
  for (auto& c : columns_) {
    if (c.name == column.name) {
      if (column.cells.size() != rows_) {
        throw Error(ErrorKind::ShapeMismatch, "column '" + column.name + "' length mismatch");
      }
      c = std::move(column);
      return;
    }
  }
  add_column(std::move(column));
}

void Table::remove_column(std::string_view name) {
  columns_.erase(columns_.begin() + static_cast<std::ptrdiff_t>(column_index(name)));
  if (columns_.empty()) rows_ = 0;
}

Table Table::select_rows(std::span<const std::size_t> rows) const {
  Table out;
  for (const auto& c : columns_) {
    Column picked{c.name, {}};
    picked.cells.reserve(rows.size());
    for (auto r : rows) picked.cells.push_back(c.cells.at(r));
    out.add_column(std::move(picked));
  }
  return out;
}

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || first == s.data() + s.size()) {
    return std::nullopt;
  }
  return v;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || first == s.data() + s.size()) {
    return std::nullopt;
  }
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string format_real(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

Cell parse_cell(std::string_view text) {
  if (text.empty() || text == "NA") return std::monostate{};
  if (auto i = parse_int(text)) return *i;
  if (auto d = parse_double(text)) return *d;
  return std::string(text);
}

std::optional<double> cell_number(const Cell& cell) {
  if (auto i = std::get_if<std::int64_t>(&cell)) return static_cast<double>(*i);
  if (auto d = std::get_if<double>(&cell)) return *d;
  if (auto s = std::get_if<std::string>(&cell)) {
    if (auto d = parse_double(*s)) return d;
    throw Error(ErrorKind::TypeMismatch, "value '" + *s + "' is not numeric");
  }
  return std::nullopt;
}

std::string cell_text(const Cell& cell) {
  if (auto i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (auto d = std::get_if<double>(&cell)) return format_real(*d);
  if (auto s = std::get_if<std::string>(&cell)) return *s;
  return "NA";
}

ColumnType infer_type(const Column& column) noexcept {
  bool any_real = false;
  for (const auto& c : column.cells) {
    if (std::holds_alternative<std::string>(c)) return ColumnType::Text;
    if (std::holds_alternative<double>(c)) any_real = true;
  }
  return any_real ? ColumnType::Real : ColumnType::Integer;
}

std::string_view type_name(ColumnType type) noexcept {
  switch (type) {
    case ColumnType::Integer: return "integer";
    case ColumnType::Real: return "real";
    case ColumnType::Text: return "text";
  }
  return "text";
}

std::vector<std::optional<double>> numeric_column(const Table& table, std::string_view name) {
  const auto& col = table.column(name);
  std::vector<std::optional<double>> out;
  out.reserve(col.cells.size());
  for (const auto& c : col.cells) {
    if (std::holds_alternative<std::string>(c)) {
      throw Error(ErrorKind::TypeMismatch,
                  "column '" + std::string(name) + "' is not numeric (value '" +
                      std::get<std::string>(c) + "')");
    }
    out.push_back(cell_number(c));
  }
  return out;
}

std::vector<std::string> text_column(const Table& table, std::string_view name) {
  const auto& col = table.column(name);
  std::vector<std::string> out;
  out.reserve(col.cells.size());
  for (const auto& c : col.cells) out.push_back(cell_text(c));
  return out;
}

std::vector<std::string> distinct_labels(const Table& table, std::string_view name) {
  std::set<std::string> seen;
  for (const auto& c : table.column(name).cells) seen.insert(cell_text(c));
  return {seen.begin(), seen.end()};
}

}  // namespace stratdesign
