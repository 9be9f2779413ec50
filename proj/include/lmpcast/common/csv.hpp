#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lmpcast/common/error.hpp"

namespace lmpcast::csv {

/// A parsed CSV file: header plus raw string cells, with 1-based source line numbers kept for errors.
struct Table {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw ParseError(source, 1, "missing column '" + std::string(name) + "'");
    }
    bool has_column(std::string_view name) const {
        for (const auto& h : header)
            if (h == name) return true;
        return false;
    }
};

inline std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r')) cell.remove_suffix(1);
        while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
        cells.emplace_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    Table table;
    table.source = path.string();
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_line(line);
        if (!have_header) {
            table.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != table.header.size())
            throw ParseError(table.source, lineno,
                             "expected " + std::to_string(table.header.size()) + " fields, got " +
                                 std::to_string(cells.size()));
        table.rows.push_back(std::move(cells));
        table.line_numbers.push_back(lineno);
    }
    if (!have_header) throw ParseError(table.source, 1, "empty file");
    return table;
}

inline double parse_double(const Table& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw ParseError(t.source, t.line_numbers[row], "invalid number '" + s + "' in column '" + t.header[col] + "'");
    return v;
}

inline std::optional<double> parse_optional_double(const Table& t, std::size_t row, std::size_t col) {
    if (t.rows[row][col].empty()) return std::nullopt;
    return parse_double(t, row, col);
}

inline long long parse_int(const Table& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ParseError(t.source, t.line_numbers[row], "invalid integer '" + s + "' in column '" + t.header[col] + "'");
    return v;
}

/// Shortest representation that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw ValidationError("cannot write " + path.string());
    }
    template <typename Range>
    void header(const Range& names) {
        bool first = true;
        for (const auto& n : names) {
            if (!first) out_ << ',';
            out_ << n;
            first = false;
        }
        out_ << '\n';
    }
    Writer& cell(double v) {
        sep();
        out_ << format_double(v);
        return *this;
    }
    Writer& cell(long long v) {
        sep();
        out_ << v;
        return *this;
    }
    Writer& cell(int v) { return cell(static_cast<long long>(v)); }
    Writer& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
    Writer& cell(std::string_view v) {
        sep();
        out_ << v;
        return *this;
    }
    void end_row() {
        out_ << '\n';
        first_ = true;
    }

private:
    void sep() {
        if (!first_) out_ << ',';
        first_ = false;
    }
    std::ofstream out_;
    std::filesystem::path path_;
    bool first_ = true;
};

}  // namespace lmpcast::csv
