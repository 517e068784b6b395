#include "moot/encoding.hpp"

#include <stdexcept>

namespace moot {

double scale_unit(double value, const ColumnSpec& col) {
    if (col.hi == col.lo) return 0.0;
    return (value - col.lo) / (col.hi - col.lo);
}

std::size_t encoded_dimension(std::span<const ColumnSpec> columns) {
    std::size_t d = 0;
    for (const auto& c : columns) d += c.is_numeric() ? 1 : c.levels.size();
    return d;
}

std::vector<double> encode_x(std::span<const Cell> x, std::span<const ColumnSpec> columns) {
    if (x.size() != columns.size()) throw std::invalid_argument("x width does not match column count");
    std::vector<double> out;
    out.reserve(encoded_dimension(columns));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        const auto& col = columns[c];
        if (col.is_numeric()) {
            out.push_back(scale_unit(std::get<double>(x[c]), col));
        } else {
            int level = col.level_index(std::get<std::string>(x[c]));
            for (std::size_t k = 0; k < col.levels.size(); ++k)
                out.push_back(static_cast<int>(k) == level ? 1.0 : 0.0);
        }
    }
    return out;
}

std::vector<double> encode_x(const Row& row, std::span<const ColumnSpec> columns) {
    return encode_x(std::span<const Cell>(row.x), columns);
}

MixedPoint encode_mixed(std::span<const Cell> x, std::span<const ColumnSpec> columns) {
    if (x.size() != columns.size()) throw std::invalid_argument("x width does not match column count");
    MixedPoint p;
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c].is_numeric())
            p.numeric.push_back(scale_unit(std::get<double>(x[c]), columns[c]));
        else
            p.symbolic.push_back(columns[c].level_index(std::get<std::string>(x[c])));
    }
    return p;
}

std::vector<std::size_t> level_counts(std::span<const ColumnSpec> columns) {
    std::vector<std::size_t> counts;
    for (const auto& c : columns)
        if (!c.is_numeric()) counts.push_back(c.levels.size());
    return counts;
}

}  // namespace moot
