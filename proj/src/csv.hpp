#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace equirec::csv {

struct Row {
    std::size_t line = 0;  // 1-based line where the record starts
    std::vector<std::string> fields;
};

/// RFC 4180 records; quoted fields may contain commas, quotes and newlines.
/// Throws SchemaError on an unterminated quote.
std::vector<Row> parse(std::string_view text, std::string_view file_name);

std::string escape(std::string_view field);
std::string join(const std::vector<std::string>& fields);

}  // namespace equirec::csv
