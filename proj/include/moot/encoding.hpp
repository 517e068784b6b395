#pragma once

#include <span>
#include <vector>

#include "moot/table.hpp"

namespace moot {

/// Numeric x cells min-max scaled by their column's lo/hi (a constant column
/// scales to 0); symbolic cells one-hot expanded over the column's observed
/// levels. An unseen symbol encodes as an all-zero block.
std::vector<double> encode_x(std::span<const Cell> x, std::span<const ColumnSpec> columns);
std::vector<double> encode_x(const Row& row, std::span<const ColumnSpec> columns);

/// Length of encode_x output for these columns.
std::size_t encoded_dimension(std::span<const ColumnSpec> columns);

/// Scaled numeric dims plus symbolic level codes, for estimators that treat
/// categorical blocks as frequencies rather than coordinates.
struct MixedPoint {
    std::vector<double> numeric;  // in [0, 1]
    std::vector<int> symbolic;    // level index, -1 when unseen
};

MixedPoint encode_mixed(std::span<const Cell> x, std::span<const ColumnSpec> columns);

/// Level count of every symbolic column, in column order.
std::vector<std::size_t> level_counts(std::span<const ColumnSpec> columns);

/// Scale a numeric value by the column's range; 0 for a constant column.
double scale_unit(double value, const ColumnSpec& col);

}  // namespace moot
