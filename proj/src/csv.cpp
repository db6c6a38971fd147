#include "stratdesign/csv.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "stratdesign/error.hpp"

namespace stratdesign::csv {

namespace {

struct Field {
  std::string text;
  bool quoted = false;
};

// Splits the whole input into records; tracks the starting line of each
// record for diagnostics.
std::vector<std::pair<std::size_t, std::vector<Field>>> tokenize(std::string_view in) {
  std::vector<std::pair<std::size_t, std::vector<Field>>> records;
  std::vector<Field> record;
  Field field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field = Field{};
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.emplace_back(record_line, std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < in.size(); ++i) {
    const char ch = in[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < in.size() && in[i + 1] == '"') {
          field.text.push_back('"');
          ++i;
        } else {
          in_quotes = false;
          if (i + 1 < in.size() && in[i + 1] != ',' && in[i + 1] != '\n' && in[i + 1] != '\r') {
            throw Error(ErrorKind::ParseError,
                        "line " + std::to_string(line) + ": text after closing quote");
          }
        }
      } else {
        if (ch == '\n') ++line;
        field.text.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (field_started) {
          throw Error(ErrorKind::ParseError,
                      "line " + std::to_string(line) + ": quote inside unquoted field");
        }
        in_quotes = true;
        field.quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < in.size() && in[i + 1] == '\n') break;
        [[fallthrough]];
      case '\n':
        end_record();
        ++line;
        record_line = line;
        break;
      default:
        field.text.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(record_line) + ": unterminated quote");
  }
  if (field_started || !record.empty()) end_record();
  return records;
}

bool needs_quotes(const std::string& s) {
  if (s.empty()) return true;
  if (s.find_first_of(",\"\r\n") != std::string::npos) return true;
  if (s.front() == ' ' || s.back() == ' ') return true;
  return !std::holds_alternative<std::string>(parse_cell(s));
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_cell(const Cell& cell) {
  if (is_missing(cell)) return "NA";
  if (auto i = std::get_if<std::int64_t>(&cell)) return std::to_string(*i);
  if (auto d = std::get_if<double>(&cell)) {
    std::string s = format_real(*d);
    if (s.find_first_of(".eE") == std::string::npos && s.find_first_of("0123456789") != std::string::npos) {
      s += ".0";
    }
    return s;
  }
  const auto& s = std::get<std::string>(cell);
  return needs_quotes(s) ? quote(s) : s;
}

}  // namespace

void check_unique_ids(const Table& table, std::string_view id_column) {
  const auto& col = table.column(id_column);
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < col.cells.size(); ++r) {
    if (is_missing(col.cells[r])) {
      throw Error(ErrorKind::MissingValues,
                  "id column '" + std::string(id_column) + "' is missing at row " + std::to_string(r + 1));
    }
    auto text = cell_text(col.cells[r]);
    if (!seen.insert(text).second) {
      throw Error(ErrorKind::DuplicateId, "id '" + text + "' appears more than once");
    }
  }
}

Table parse(std::string_view text, const std::optional<std::string>& id_column) {
  auto records = tokenize(text);
  // Blank lines carry a single empty unquoted field; drop them.
  std::erase_if(records, [](const auto& r) {
    return r.second.size() == 1 && r.second[0].text.empty() && !r.second[0].quoted;
  });
  if (records.empty()) throw Error(ErrorKind::ParseError, "line 1: empty input, no header");

  const auto& header = records.front().second;
  std::vector<Column> columns;
  std::unordered_set<std::string> names;
  for (const auto& f : header) {
    if (f.text.empty()) throw Error(ErrorKind::ParseError, "line 1: empty column name");
    if (!names.insert(f.text).second) {
      throw Error(ErrorKind::ParseError, "line 1: duplicate column name '" + f.text + "'");
    }
    columns.push_back(Column{f.text, {}});
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& [line, fields] = records[r];
    if (fields.size() != columns.size()) {
      throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": expected " +
                                             std::to_string(columns.size()) + " fields, found " +
                                             std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      columns[c].cells.push_back(fields[c].quoted ? Cell{fields[c].text} : parse_cell(fields[c].text));
    }
  }
  Table table(std::move(columns));
  if (id_column) check_unique_ids(table, *id_column);
  return table;
}

Table read_file(const std::filesystem::path& path, const std::optional<std::string>& id_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), id_column);
}

std::string format(const Table& table) {
  std::string out;
  const auto& cols = table.columns();
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (c) out.push_back(',');
    const auto& name = cols[c].name;
    out += name.find_first_of(",\"\r\n") != std::string::npos ? quote(name) : name;
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      if (c) out.push_back(',');
      out += format_cell(cols[c].cells[r]);
    }
    out.push_back('\n');
  }
  return out;
}

void write_file(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
  out << format(table);
}

}  // namespace stratdesign::csv
