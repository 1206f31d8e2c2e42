#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace ffrelay {

// monostate is an empty (not applicable) cell
using Cell = std::variant<std::monostate, std::int64_t, double, std::string>;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;

    std::size_t column(const std::string& name) const;  // throws std::out_of_range
    const Cell& at(std::size_t row, const std::string& name) const { return rows.at(row).at(column(name)); }
};

// numeric view of a cell; NaN for empty or text
double cell_number(const Cell& c);
std::string cell_text(const Cell& c);  // numbers with 12 significant digits

}  // namespace ffrelay
