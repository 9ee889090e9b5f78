#pragma once

#include <charconv>
#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace evadmm::csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) {
            break;
        }
        start = pos + 1;
    }
    return out;
}

inline double to_double(std::string_view field, std::size_t line, std::string_view name) {
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw ParseError("field '" + std::string(name) + "' is not a number: '" + std::string(field) + "'", line);
    }
    return v;
}

inline long to_int(std::string_view field, std::size_t line, std::string_view name) {
    long v = 0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end || field.empty()) {
        throw ParseError("field '" + std::string(name) + "' is not an integer: '" + std::string(field) + "'", line);
    }
    return v;
}

/**
 * Reads a CSV with a fixed header, calling `row(fields, line_no)` for every
 * non-empty data line. Column count is checked against the header.
 */
template <class RowFn>
void read_table(std::istream& in, const std::vector<std::string>& header, RowFn&& row) {
    std::string line;
    std::size_t line_no = 0;
    bool seen_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split(line);
        if (!seen_header) {
            bool ok = fields.size() == header.size();
            for (std::size_t i = 0; ok && i < header.size(); ++i) {
                ok = fields[i] == header[i];
            }
            if (!ok) {
                std::string expect;
                for (const auto& h : header) {
                    expect += (expect.empty() ? "" : ",") + h;
                }
                throw ParseError("expected header '" + expect + "'", line_no);
            }
            seen_header = true;
            continue;
        }
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        row(fields, line_no);
    }
    if (!seen_header) {
        throw ParseError("missing header");
    }
}

}  // namespace evadmm::csv
