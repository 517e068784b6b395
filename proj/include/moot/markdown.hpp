#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace moot::markdown {

/// Shortest text that parses back to the same double.
std::string number(double v);

/// Six significant digits, for summary statistics.
std::string stat(double v);

/// "| a | b | c |"
std::string row(std::span<const std::string> cells);

/// "|---|---|---|" with one dash group per column.
std::string separator(std::size_t columns);

/// Cells of a "| a | b |" line, trimmed. Empty when the line is not a table row.
std::vector<std::string> split_row(std::string_view line);

bool is_separator(std::span<const std::string> cells);

struct TableBlock {
    std::vector<std::string> header;            // empty when the block had no separator line
    std::vector<std::vector<std::string>> rows;  // data rows only
};

/// Every pipe table in `text`, in order. A block whose second line is a
/// separator treats its first line as a header; otherwise all lines are data.
std::vector<TableBlock> tables(std::string_view text);

/// First data row of the first table that has one.
std::optional<std::vector<std::string>> first_data_row(std::string_view text);

}  // namespace moot::markdown
