#include <random>

#include "fixtures.hpp"
#include "stratdesign/csv.hpp"
#include "stratdesign/table.hpp"
#include "test_util.hpp"

using namespace stratdesign;

TEST_CASE("cells are inferred as missing, integer, real or text") {
  CHECK(is_missing(parse_cell("")));
  CHECK(is_missing(parse_cell("NA")));
  CHECK(std::get<std::int64_t>(parse_cell("42")) == 42);
  CHECK(std::get<std::int64_t>(parse_cell("-7")) == -7);
  CHECK(std::get<double>(parse_cell("3.5")) == 3.5);
  CHECK(std::get<double>(parse_cell("1e-3")) == 1e-3);
  CHECK(std::get<std::string>(parse_cell("setosa")) == "setosa");
  CHECK(std::get<std::string>(parse_cell("inf")) == "inf");
  CHECK(format_real(5.0) == "5");
  CHECK(format_real(3.4) == "3.4");
}

TEST_CASE("column typing and numeric views") {
  const auto t = csv::parse("a,b,c\n1,2.5,x\n2,NA,y\n");
  CHECK(infer_type(t.column("a")) == ColumnType::Integer);
  CHECK(infer_type(t.column("b")) == ColumnType::Real);
  CHECK(infer_type(t.column("c")) == ColumnType::Text);
  const auto b = numeric_column(t, "b");
  CHECK(*b[0] == 2.5);
  CHECK_FALSE(b[1].has_value());
  CHECK_ERROR_KIND(numeric_column(t, "c"), ErrorKind::TypeMismatch);
  CHECK_ERROR_KIND(t.column("zzz"), ErrorKind::ColumnNotFound);
  CHECK(distinct_labels(t, "c") == std::vector<std::string>{"x", "y"});
}

TEST_CASE("iris fixture round-trips byte for byte") {
  const auto text = fixtures::slurp(fixtures::iris_path());
  const auto t = csv::parse(text, std::string("id"));
  CHECK(t.row_count() == 150);
  CHECK(t.column_count() == 6);
  CHECK(csv::format(t) == text);
  CHECK(csv::parse(csv::format(t)) == t);
}

TEST_CASE("malformed input reports ParseError with a line number") {
  CHECK_ERROR_KIND(csv::parse(""), ErrorKind::ParseError);
  CHECK_ERROR_KIND(csv::parse("a,a\n1,2\n"), ErrorKind::ParseError);
  try {
    csv::parse("a,b\n1,2\n3\n");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_ERROR_KIND(csv::parse("a\n\"open\n"), ErrorKind::ParseError);
}

TEST_CASE("RFC-4180 quoting round-trips commas, quotes and newlines") {
  const auto t = csv::parse("name,v\n\"a,b\",1\n\"say \"\"hi\"\"\",2\n\"two\nlines\",3\n");
  CHECK(std::get<std::string>(t.column("name").cells[0]) == "a,b");
  CHECK(std::get<std::string>(t.column("name").cells[1]) == "say \"hi\"");
  CHECK(std::get<std::string>(t.column("name").cells[2]) == "two\nlines");
  CHECK(csv::parse(csv::format(t)) == t);
}

TEST_CASE("text that looks numeric keeps its type through a round-trip") {
  Table t({Column{"s", {Cell{std::string("1")}, Cell{std::string("NA")}, Cell{std::string(" x")}}},
           Column{"r", {Cell{2.0}, Cell{std::monostate{}}, Cell{1e300}}}});
  CHECK(csv::parse(csv::format(t)) == t);
}

TEST_CASE("duplicate or missing ids are rejected") {
  CHECK_ERROR_KIND(csv::parse("id,x\n1,2\n1,3\n", std::string("id")), ErrorKind::DuplicateId);
  CHECK_ERROR_KIND(csv::parse("id,x\n1,2\nNA,3\n", std::string("id")), ErrorKind::MissingValues);
}

TEST_CASE("random tables survive format then parse") {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> kind(0, 3), len(0, 6), chr(0, 9);
  const std::string alphabet = "ab ,\"\n1.-e";
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Column> cols;
    const int ncol = 1 + trial % 4;
    const int nrow = 1 + trial % 7;
    for (int c = 0; c < ncol; ++c) {
      Column col{"c" + std::to_string(c), {}};
      for (int r = 0; r < nrow; ++r) {
        switch (kind(gen)) {
          case 0: col.cells.emplace_back(std::monostate{}); break;
          case 1: col.cells.emplace_back(static_cast<std::int64_t>(gen() % 2001) - 1000); break;
          case 2: col.cells.emplace_back(std::ldexp(static_cast<double>(gen() % 100000), -(int)(gen() % 20))); break;
          default: {
            std::string s;
            for (int k = len(gen); k > 0; --k) s.push_back(alphabet[static_cast<std::size_t>(chr(gen))]);
            col.cells.emplace_back(s);
          }
        }
      }
      cols.push_back(std::move(col));
    }
    // A row of all-empty cells in a single-column table is a blank line; avoid it.
    if (ncol == 1) cols[0].cells[0] = Cell{std::int64_t{0}};
    const Table t(std::move(cols));
    CHECK(csv::parse(csv::format(t)) == t);
  }
}
