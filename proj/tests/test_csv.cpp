#include <catch_amalgamated.hpp>

#include <limits>

#include "probchain/csv.hpp"

using namespace probchain;

TEST_CASE("numbers print in shortest round-trip form") {
  CHECK(csv::format_number(0.1) == "0.1");
  CHECK(csv::format_number(1.0) == "1");
  CHECK(csv::format_number(1e-300) == "1e-300");
  CHECK(csv::format_number(42) == "42");
  CHECK(csv::format_number(std::uint64_t{18446744073709551615ull}) == "18446744073709551615");
  for (double v : {0.041630344771878214, 1.0 / 3.0, 5.079441541679836, -11.439270684})
    CHECK(csv::parse_double(csv::format_number(v)) == v);
}

TEST_CASE("parse rejects junk") {
  CHECK_THROWS_AS(csv::parse_double("1.5x"), std::invalid_argument);
  CHECK_THROWS_AS(csv::parse_double(""), std::invalid_argument);
  CHECK_THROWS_AS(csv::parse_int("3.0"), std::invalid_argument);
  CHECK(csv::parse_int("-17") == -17);
}

TEST_CASE("tables round-trip, quoting included") {
  csv::Table t;
  t.header = {"name", "value", "note"};
  t.rows = {{"a", "1", "plain"},
            {"b,c", "2", "has \"quotes\""},
            {"", "3", ""}};
  const std::string text = csv::to_string(t);
  CHECK(text.find("\"b,c\"") != std::string::npos);
  CHECK(text.find("\"has \"\"quotes\"\"\"") != std::string::npos);
  CHECK(csv::parse(text) == t);
  CHECK(t.column("note") == 2);
  CHECK_THROWS_AS(t.column("missing"), std::out_of_range);
}

TEST_CASE("malformed input") {
  CHECK_THROWS_AS(csv::parse(""), std::invalid_argument);
  CHECK_THROWS_AS(csv::parse("a,b\n1\n"), std::invalid_argument);
  CHECK_THROWS_AS(csv::parse("a\n\"open\n"), std::invalid_argument);
  CHECK(csv::parse("a,b\r\n1,2\r\n\r\n").rows.size() == 1);
}
