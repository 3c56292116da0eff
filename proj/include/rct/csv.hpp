#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rct::csv {

/// Parsed RFC-4180 document. The first record is the header.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column, or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
    /// Index of a header column; throws ParseError when missing.
    std::size_t require_column(std::string_view name) const;
};

/// Reads a whole CSV document. Throws ParseError (with line) on unbalanced
/// quotes or ragged rows.
Table read(std::istream& in);

/// Parses a finite or non-finite double ("nan", "inf"); throws ParseError.
double parse_double(std::string_view field, std::size_t line, std::string_view column);
long long parse_integer(std::string_view field, std::size_t line, std::string_view column);

/// Round-trip representation (17 significant digits); "NA" for NaN.
std::string format_double(double v);

/// Writes one record, quoting fields that need it.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace rct::csv
