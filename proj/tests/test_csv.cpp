#include <limits>
#include <sstream>

#include "bcvnn/csv.hpp"
#include "bcvnn/error.hpp"
#include "doctest.h"

using namespace bcvnn;

TEST_CASE("escaping follows RFC 4180") {
  CHECK(csv::escape("plain") == "plain");
  CHECK(csv::escape("a,b") == "\"a,b\"");
  CHECK(csv::escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
  CHECK(csv::escape("two\nlines") == "\"two\nlines\"");
  std::ostringstream out;
  csv::write_row(out, {"x", "y,z"});
  CHECK(out.str() == "x,\"y,z\"\r\n");
}

TEST_CASE("reading handles quotes, CRLF and comments") {
  std::istringstream in("# generated\r\na,\"b,c\",\"d\"\"e\"\r\n\"multi\nline\",2\n");
  const auto rows = csv::read_all(in);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "d\"e"});
  CHECK(rows[1] == std::vector<std::string>{"multi\nline", "2"});
  std::istringstream bad("\"open,1\n");
  CHECK_THROWS_AS(csv::read_all(bad), Error);
}

TEST_CASE("doubles round-trip through their shortest form") {
  for (double v : {0.0, 1.0, -2.5, 0.1, 1.0 / 3.0, 6.02214076e23, std::numeric_limits<double>::denorm_min()}) {
    CHECK(csv::parse_double(csv::format_double(v)) == v);
  }
  CHECK(csv::format_double(0.5) == "0.5");
  CHECK_THROWS_AS(csv::parse_double("1.5x"), Error);
  CHECK_THROWS_AS(csv::parse_int("7.0"), Error);
  CHECK(csv::parse_int("-12") == -12);
}
