#pragma once

#include <sstream>
#include <string>

#include "moot/table.hpp"

namespace moot::testing {

inline const char* table2_csv() {
    return "Spout_wait, Spliters, Counters, Throughput+, Latency-\n"
           "10,         6,        17,       23075,       158.68\n"
           "8,          6,        17,       22887,       172.74\n"
           "9,          6,        17,       22799,       156.83\n"
           "9,          3,        17,       22430,       160.14\n"
           "10000,      1,        10,       460.81,      8761.6\n"
           "10000,      1,        18,       402.53,      8797.5\n"
           "10000,      1,        12,       365.07,      9098.9\n"
           "10000,      1,        1,        310.06,      9421\n";
}

inline Table table_from(const std::string& csv, const std::string& name = "t") {
    std::istringstream in(csv);
    return load_table(in, name);
}

inline Table table2() { return table_from(table2_csv(), "table2"); }

}  // namespace moot::testing
