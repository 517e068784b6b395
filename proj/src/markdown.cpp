#include "moot/markdown.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>

namespace moot::markdown {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string stat(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string row(std::span<const std::string> cells) {
    std::string out = "|";
    for (const auto& c : cells) out += " " + c + " |";
    return out;
}

std::string separator(std::size_t columns) {
    std::string out = "|";
    for (std::size_t i = 0; i < columns; ++i) out += "---|";
    return out;
}

std::vector<std::string> split_row(std::string_view line) {
    line = trim(line);
    if (line.size() < 2 || line.front() != '|') return {};
    line.remove_prefix(1);
    if (!line.empty() && line.back() == '|') line.remove_suffix(1);
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto bar = line.find('|', start);
        cells.emplace_back(trim(line.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start)));
        if (bar == std::string_view::npos) break;
        start = bar + 1;
    }
    return cells;
}

bool is_separator(std::span<const std::string> cells) {
    if (cells.empty()) return false;
    return std::all_of(cells.begin(), cells.end(), [](const std::string& c) {
        return !c.empty() && c.find('-') != std::string::npos &&
               std::all_of(c.begin(), c.end(), [](char ch) { return ch == '-' || ch == ':' || ch == ' '; });
    });
}

std::vector<TableBlock> tables(std::string_view text) {
    std::vector<TableBlock> blocks;
    std::vector<std::vector<std::string>> current;
    auto flush = [&] {
        if (current.empty()) return;
        TableBlock block;
        std::size_t first = 0;
        if (current.size() >= 2 && is_separator(current[1])) {
            block.header = current[0];
            first = 2;
        }
        for (std::size_t i = first; i < current.size(); ++i)
            if (!is_separator(current[i])) block.rows.push_back(std::move(current[i]));
        blocks.push_back(std::move(block));
        current.clear();
    };
    std::size_t start = 0;
    while (start <= text.size()) {
        auto nl = text.find('\n', start);
        auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        auto cells = split_row(line);
        if (cells.empty())
            flush();
        else
            current.push_back(std::move(cells));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    flush();
    return blocks;
}

std::optional<std::vector<std::string>> first_data_row(std::string_view text) {
    for (auto& block : tables(text))
        if (!block.rows.empty()) return std::move(block.rows.front());
    return std::nullopt;
}

}  // namespace moot::markdown
