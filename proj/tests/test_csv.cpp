#include <catch_amalgamated.hpp>

#include <sstream>

#include "ivpanel/csv.hpp"
#include "ivpanel/rng.hpp"

using namespace ivpanel;

TEST_CASE("csv parses quoted fields, doubled quotes and embedded newlines", "[csv]") {
  const auto rows = csv::parse("a,b,c\n\"x, y\",\"he said \"\"hi\"\"\",\"line1\nline2\"\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[1][0] == "x, y");
  CHECK(rows[1][1] == "he said \"hi\"");
  CHECK(rows[1][2] == "line1\nline2");
}

TEST_CASE("csv handles CRLF, BOM, empty fields and missing trailing newline", "[csv]") {
  const auto rows = csv::parse("\xEF\xBB\xBFid,v\r\n1,\r\n2,\"\"");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0][0] == "id");
  CHECK(rows[1] == csv::Row{"1", ""});
  CHECK(rows[2] == csv::Row{"2", ""});
}

TEST_CASE("csv rejects malformed quoting", "[csv]") {
  CHECK_THROWS_AS(csv::parse("a\n\"open"), SchemaError);
  CHECK_THROWS_AS(csv::parse("a\nab\"c\n"), SchemaError);
}

TEST_CASE("csv write/parse round-trips arbitrary fields", "[csv]") {
  Rng rng(11);
  const std::string alphabet = "ab ,\"\n\r;x1";
  for (int trial = 0; trial < 200; ++trial) {
    csv::Row row;
    const auto width = 1 + rng.below(5);
    for (std::uint64_t j = 0; j < width; ++j) {
      std::string f;
      const auto len = rng.below(8);
      for (std::uint64_t k = 0; k < len; ++k) f += alphabet[rng.below(alphabet.size())];
      row.push_back(f);
    }
    // A lone empty field is indistinguishable from a blank line.
    if (row.size() == 1 && row[0].empty()) row[0] = "z";
    std::ostringstream os;
    csv::write_row(os, row);
    const auto back = csv::parse(os.str());
    REQUIRE(back.size() == 1);
    CHECK(back[0] == row);
  }
}

TEST_CASE("format_double is the shortest exact round-trip", "[csv]") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9, 0.0}) {
    const auto s = csv::format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(csv::format_double(0.1) == "0.1");
  CHECK(csv::format_double(2.0) == "2");
}

TEST_CASE("table reports missing columns and bad cells with location", "[csv]") {
  csv::Table t("f.csv", csv::parse("id,x\n1,2.5\n2,abc\n"));
  CHECK(t.size() == 2);
  CHECK(t.number(0, "x") == 2.5);
  try {
    t.require_columns({"id", "year", "amount"});
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("year, amount"));
  }
  try {
    (void)t.number(1, "x");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("f.csv:3 column 'x'"));
  }
  CHECK_THROWS_AS(t.integer(0, "x"), SchemaError);
  CHECK_THROWS_AS(csv::Table("g.csv", csv::parse("a,b\n1\n")), SchemaError);
  CHECK_THROWS_AS(csv::Table("h.csv", {}), SchemaError);
}

TEST_CASE("table rejects non-finite numbers", "[csv]") {
  csv::Table t("f.csv", csv::parse("x\ninf\nnan\n"));
  CHECK_THROWS_AS(t.number(0, "x"), SchemaError);
  CHECK_THROWS_AS(t.number(1, "x"), SchemaError);
}

TEST_CASE("read_file names the missing path", "[csv]") {
  try {
    (void)csv::read_file("/nonexistent/dir/scholars.csv");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK_THAT(e.what(), Catch::Matchers::ContainsSubstring("/nonexistent/dir/scholars.csv"));
  }
}
