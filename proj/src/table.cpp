#include "moot/table.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

#include "moot/rng.hpp"

namespace moot {

namespace {

std::string_view trim(std::string_view s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    auto b = std::find_if(s.begin(), s.end(), not_space);
    auto e = std::find_if(s.rbegin(), s.rend(), not_space).base();
    return b < e ? std::string_view(b, e) : std::string_view{};
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto comma = line.find(',', start);
        auto piece = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        cells.emplace_back(trim(piece));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

bool parse_number(std::string_view text, double& out) {
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::string ColumnSpec::header() const {
    switch (direction) {
        case Direction::maximize: return name + "+";
        case Direction::minimize: return name + "-";
        case Direction::none: break;
    }
    return name;
}

int ColumnSpec::level_index(std::string_view level) const {
    auto it = std::lower_bound(levels.begin(), levels.end(), level);
    if (it == levels.end() || *it != level) return -1;
    return static_cast<int>(it - levels.begin());
}

bool operator==(const Row& a, const Row& b) { return a.id == b.id && a.x == b.x && a.y == b.y; }

std::vector<ColumnSpec> parse_header(std::span<const std::string> names) {
    if (names.empty()) throw DataError("header has no columns");
    std::vector<ColumnSpec> specs;
    std::set<std::string> seen;
    std::size_t goals = 0;
    for (const auto& raw : names) {
        std::string_view name = trim(raw);
        ColumnSpec spec;
        if (!name.empty() && (name.back() == '+' || name.back() == '-')) {
            spec.role = Role::goal;
            spec.direction = name.back() == '+' ? Direction::maximize : Direction::minimize;
            name.remove_suffix(1);
            ++goals;
        }
        if (name.empty()) throw DataError("empty column name in header");
        spec.name = std::string(name);
        spec.kind = std::isupper(static_cast<unsigned char>(name.front())) ? Kind::numeric : Kind::symbolic;
        if (spec.is_goal() && !spec.is_numeric())
            throw DataError("goal column '" + spec.name + "' must be numeric (uppercase initial)");
        if (!seen.insert(spec.name).second) throw DataError("duplicate column name '" + spec.name + "'");
        specs.push_back(std::move(spec));
    }
    if (goals == 0) throw DataError("header has no goal columns (names ending in + or -)");
    if (goals == specs.size()) throw DataError("header has no independent columns");
    return specs;
}

Table::Table(std::string name, std::vector<ColumnSpec> header, std::vector<Row> rows)
    : name_(std::move(name)), rows_(std::move(rows)) {
    for (auto& spec : header) {
        if (spec.is_goal()) {
            layout_.push_back({Role::goal, y_cols_.size()});
            y_cols_.push_back(std::move(spec));
        } else {
            layout_.push_back({Role::independent, x_cols_.size()});
            x_cols_.push_back(std::move(spec));
        }
    }
    if (x_cols_.empty() || y_cols_.empty()) throw DataError("table needs at least one x and one y column");
    if (rows_.empty()) throw DataError("table '" + name_ + "' has no rows");

    for (RowId i = 0; i < rows_.size(); ++i) {
        auto& row = rows_[i];
        row.id = i;
        if (row.x.size() != x_cols_.size() || row.y.size() != y_cols_.size())
            throw DataError("row " + std::to_string(i) + " does not match the header width");
        for (std::size_t c = 0; c < x_cols_.size(); ++c) {
            bool numeric = std::holds_alternative<double>(row.x[c]);
            if (numeric != x_cols_[c].is_numeric())
                throw DataError("row " + std::to_string(i) + ", column '" + x_cols_[c].name + "': wrong cell type");
        }
    }

    for (std::size_t c = 0; c < x_cols_.size(); ++c) {
        auto& col = x_cols_[c];
        col.levels.clear();
        if (col.is_numeric()) {
            col.lo = col.hi = std::get<double>(rows_.front().x[c]);
            for (const auto& r : rows_) {
                double v = std::get<double>(r.x[c]);
                col.lo = std::min(col.lo, v);
                col.hi = std::max(col.hi, v);
            }
        } else {
            std::set<std::string> levels;
            for (const auto& r : rows_) levels.insert(std::get<std::string>(r.x[c]));
            col.levels.assign(levels.begin(), levels.end());
            col.lo = col.hi = 0.0;
        }
    }
    for (std::size_t c = 0; c < y_cols_.size(); ++c) {
        auto& col = y_cols_[c];
        col.lo = col.hi = rows_.front().y[c];
        for (const auto& r : rows_) {
            col.lo = std::min(col.lo, r.y[c]);
            col.hi = std::max(col.hi, r.y[c]);
        }
    }
}

bool operator==(const Table& a, const Table& b) {
    auto same_cols = [](std::span<const ColumnSpec> p, std::span<const ColumnSpec> q) {
        return std::equal(p.begin(), p.end(), q.begin(), q.end(), [](const ColumnSpec& s, const ColumnSpec& t) {
            return s.name == t.name && s.kind == t.kind && s.role == t.role && s.direction == t.direction &&
                   s.lo == t.lo && s.hi == t.hi && s.levels == t.levels;
        });
    };
    auto same_layout = std::equal(a.layout().begin(), a.layout().end(), b.layout().begin(), b.layout().end(),
                                  [](const Table::Slot& s, const Table::Slot& t) {
                                      return s.role == t.role && s.index == t.index;
                                  });
    return a.name() == b.name() && same_layout && same_cols(a.x_columns(), b.x_columns()) &&
           same_cols(a.goal_columns(), b.goal_columns()) &&
           std::equal(a.rows().begin(), a.rows().end(), b.rows().begin(), b.rows().end());
}

Table load_table(std::istream& source, std::string name) {
    std::string line;
    std::vector<std::string> names;
    while (std::getline(source, line)) {
        if (!trim(line).empty()) {
            names = split_csv_line(line);
            break;
        }
    }
    if (names.empty()) throw DataError("'" + name + "': missing header");
    auto header = parse_header(names);

    std::vector<Row> rows;
    std::size_t lineno = 1;
    while (std::getline(source, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("'" + name + "' line " + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
        Row row;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto& text = cells[c];
            if (text.empty() || text == "?")
                throw DataError("'" + name + "' line " + std::to_string(lineno) + ": missing value in column '" +
                                header[c].name + "'");
            if (header[c].is_numeric()) {
                double v = 0.0;
                if (!parse_number(text, v))
                    throw DataError("'" + name + "' line " + std::to_string(lineno) + ": '" + text +
                                    "' is not a number (column '" + header[c].name + "')");
                if (header[c].is_goal())
                    row.y.push_back(v);
                else
                    row.x.emplace_back(v);
            } else {
                row.x.emplace_back(text);
            }
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("'" + name + "': header but no data rows");
    return Table(std::move(name), std::move(header), std::move(rows));
}

Table load_table_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return load_table(in, path.stem().string());
}

std::string serialize(const Table& table) {
    std::ostringstream out;
    auto emit_row = [&](auto&& cell_text) {
        bool first = true;
        for (const auto& slot : table.layout()) {
            if (!first) out << ',';
            first = false;
            out << cell_text(slot);
        }
        out << '\n';
    };
    emit_row([&](const Table::Slot& s) {
        return s.role == Role::goal ? table.goal_columns()[s.index].header() : table.x_columns()[s.index].header();
    });
    for (const auto& row : table.rows()) {
        emit_row([&](const Table::Slot& s) -> std::string {
            if (s.role == Role::goal) return format_number(row.y[s.index]);
            const auto& cell = row.x[s.index];
            if (auto* v = std::get_if<double>(&cell)) return format_number(*v);
            return std::get<std::string>(cell);
        });
    }
    return out.str();
}

Table shuffle_rows(const Table& table, std::uint64_t seed) {
    std::vector<Row> rows(table.rows().begin(), table.rows().end());
    Rng rng(seed);
    std::shuffle(rows.begin(), rows.end(), rng);
    std::vector<ColumnSpec> header;
    for (const auto& slot : table.layout())
        header.push_back(slot.role == Role::goal ? table.goal_columns()[slot.index] : table.x_columns()[slot.index]);
    return Table(table.name(), std::move(header), std::move(rows));
}

}  // namespace moot
