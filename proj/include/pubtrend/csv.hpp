#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pubtrend::csv {

// Splits one record. Fields may be wrapped in double quotes, in which case
// commas are literal and "" is an escaped quote. Throws ValidationError on an
// unterminated quote.
std::vector<std::string> split_record(std::string_view line);

// Quotes a field only if it contains a comma, quote or newline.
std::string escape_field(std::string_view field);

void write_record(std::ostream& out, const std::vector<std::string>& fields);

// Fixed 9-significant-digit rendering used by every report table.
std::string format_real(double value);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace pubtrend::csv
