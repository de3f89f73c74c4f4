#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace bcvnn::csv {

/// RFC-4180 field: quoted only when it contains a comma, quote or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal that round-trips the double.
std::string format_double(double value);

/// Reads all records; lines starting with '#' outside quotes are skipped.
std::vector<std::vector<std::string>> read_all(std::istream& in);

double parse_double(const std::string& field);
long long parse_int(const std::string& field);

}  // namespace bcvnn::csv
