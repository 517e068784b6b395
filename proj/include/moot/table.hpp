#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace moot {

using RowId = std::size_t;

enum class Kind { numeric, symbolic };
enum class Role { independent, goal };
enum class Direction { none, maximize, minimize };

/// Raised for malformed headers, ragged rows, and bad cells.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ColumnSpec {
    std::string name;  // sigil stripped
    Kind kind = Kind::numeric;
    Role role = Role::independent;
    Direction direction = Direction::none;
    double lo = 0.0;
    double hi = 0.0;
    // Observed levels of a symbolic column, sorted. Empty for numeric columns.
    std::vector<std::string> levels;

    bool is_goal() const { return role == Role::goal; }
    bool is_numeric() const { return kind == Kind::numeric; }

    /// Name as it appears in a MOOT header, with the goal sigil restored.
    std::string header() const;

    /// Index of `level` in `levels`, or -1 when the symbol was never observed.
    int level_index(std::string_view level) const;
};

using Cell = std::variant<double, std::string>;

struct Row {
    RowId id = 0;
    std::vector<Cell> x;    // aligned to Table::x_columns()
    std::vector<double> y;  // aligned to Table::goal_columns()
};

bool operator==(const Row& a, const Row& b);

/// Classifies MOOT header names. A trailing '+' or '-' marks a goal to
/// maximize or minimize; a leading uppercase letter marks a numeric column.
std::vector<ColumnSpec> parse_header(std::span<const std::string> names);

/// An immutable MOOT dataset. Goal values are stored here but are only
/// revealed to learners through a LabelLedger.
class Table {
public:
    /// Validates shape and computes lo/hi (numeric) and levels (symbolic)
    /// from `rows`. Row ids are reassigned to row positions.
    Table(std::string name, std::vector<ColumnSpec> header, std::vector<Row> rows);

    const std::string& name() const { return name_; }
    std::size_t size() const { return rows_.size(); }

    std::span<const Row> rows() const { return rows_; }
    const Row& row(RowId id) const { return rows_.at(id); }

    std::span<const ColumnSpec> x_columns() const { return x_cols_; }
    std::span<const ColumnSpec> goal_columns() const { return y_cols_; }

    /// Header order as read from the source: for each header position, the
    /// role and index into x_columns() or goal_columns().
    struct Slot {
        Role role;
        std::size_t index;
    };
    std::span<const Slot> layout() const { return layout_; }

private:
    std::string name_;
    std::vector<ColumnSpec> x_cols_;
    std::vector<ColumnSpec> y_cols_;
    std::vector<Slot> layout_;
    std::vector<Row> rows_;
};

bool operator==(const Table& a, const Table& b);

/// Reads comma-separated MOOT text. Cells are whitespace-trimmed; empty and
/// "?" cells are rejected.
Table load_table(std::istream& source, std::string name);
Table load_table_file(const std::filesystem::path& path);

/// Writes a table back out as MOOT CSV. Numbers use the shortest
/// representation that parses back to the same double.
std::string serialize(const Table& table);

/// Returns the rows in a seed-determined order with ids renumbered.
Table shuffle_rows(const Table& table, std::uint64_t seed);

}  // namespace moot
