#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sharecast/error.hpp"

namespace sharecast::csv {

struct Row {
    std::size_t line = 0;  // 1-based physical line of the record
    std::vector<std::string> cells;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Index of a header column, or nullopt.
    std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }
};

namespace detail {

// Splits one logical record. Handles RFC 4180 quoting, including quoted
// fields that span lines (which consume further physical lines).
inline bool read_record(std::istream& in, std::vector<std::string>& out,
                        std::size_t& line_no) {
    out.clear();
    std::string line;
    if (!std::getline(in, line)) return false;
    ++line_no;
    std::string field;
    bool quoted = false;
    for (;;) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field += '"';
                        ++i;
                    } else {
                        quoted = false;
                    }
                } else {
                    field += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                out.push_back(std::move(field));
                field.clear();
            } else if (c == '\r' && i + 1 == line.size()) {
                // CRLF line ending
            } else {
                field += c;
            }
        }
        if (!quoted) break;
        field += '\n';
        if (!std::getline(in, line))
            throw InputError("unterminated quoted field starting before line " +
                             std::to_string(line_no));
        ++line_no;
    }
    out.push_back(std::move(field));
    return true;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Reads a comma-separated table with a mandatory header row. Blank lines
/// and lines starting with '#' are skipped. A UTF-8 BOM is tolerated.
inline Table read(std::istream& in) {
    Table t;
    std::vector<std::string> rec;
    std::size_t line_no = 0;
    bool have_header = false, first = true;
    while (detail::read_record(in, rec, line_no)) {
        const std::size_t line = line_no;
        if (std::exchange(first, false) && !rec.empty() && rec[0].rfind("\xEF\xBB\xBF", 0) == 0) rec[0].erase(0, 3);
        if (rec.size() == 1 && detail::trim(rec[0]).empty()) continue;
        if (!rec.empty() && !rec[0].empty() && rec[0][0] == '#') continue;
        for (auto& c : rec) c = std::string(detail::trim(c));
        if (!have_header) {
            t.header = rec;
            have_header = true;
            continue;
        }
        if (rec.size() != t.header.size())
            throw InputError("line " + std::to_string(line) + ": expected " +
                             std::to_string(t.header.size()) + " fields, found " +
                             std::to_string(rec.size()));
        t.rows.push_back({line, rec});
    }
    if (!have_header) throw InputError("missing header row");
    return t;
}

/// Parses a decimal number ('.' separator). Empty cells are nullopt;
/// anything else that is not a complete number throws `std::invalid_argument`.
inline std::optional<double> parse_number(std::string_view cell) {
    cell = detail::trim(cell);
    if (cell.empty()) return std::nullopt;
    if (cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
        throw std::invalid_argument("not a number");
    return v;
}

/// Quotes a field when it contains a separator, quote, or newline.
inline std::string escape(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

/// Shortest round-trip representation of a double.
inline std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace sharecast::csv
