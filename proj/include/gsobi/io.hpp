#pragma once

// Comma-separated numeric tables with a header row.

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gsobi/error.hpp"

namespace gsobi {

/// Malformed input file; names the offending location.
class DataError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return cells;
}

inline std::string format_double(double v) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    return {buf, static_cast<std::size_t>(len)};
}

}  // namespace detail

inline Table read_csv(std::istream& in) {
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<double> cells;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) {
            continue;
        }
        const auto parts = detail::split_commas(line);
        if (!have_header) {
            for (auto part : parts) {
                table.header.emplace_back(part);
            }
            have_header = true;
            continue;
        }
        if (parts.size() != table.header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(table.header.size()) +
                            " columns, found " + std::to_string(parts.size()));
        }
        for (std::size_t c = 0; c < parts.size(); ++c) {
            const std::string_view cell = parts[c];
            double v = 0.0;
            const char* first = cell.data();
            const char* last = cell.data() + cell.size();
            if (!cell.empty() && *first == '+') {
                ++first;
            }
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
                throw DataError("line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) + " (" +
                                table.header[c] + "): cannot parse '" + std::string(cell) + "' as a finite number");
            }
            cells.push_back(v);
        }
        ++rows;
    }
    if (!have_header) {
        throw DataError("input is empty (expected a header row)");
    }
    const auto cols = static_cast<Eigen::Index>(table.header.size());
    table.values.resize(static_cast<Eigen::Index>(rows), cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            table.values(static_cast<Eigen::Index>(r), c) = cells[r * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)];
        }
    }
    return table;
}

inline Table read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("cannot open '" + path + "' for reading");
    }
    return read_csv(in);
}

inline void write_csv(std::ostream& out, const std::vector<std::string>& header, const Eigen::MatrixXd& values) {
    if (static_cast<Eigen::Index>(header.size()) != values.cols()) {
        throw ValidationError("CSV header and data widths differ");
    }
    for (std::size_t c = 0; c < header.size(); ++c) {
        out << (c ? "," : "") << header[c];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            out << (c ? "," : "") << detail::format_double(values(r, c));
        }
        out << '\n';
    }
}

inline void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                           const Eigen::MatrixXd& values) {
    std::ofstream out(path);
    if (!out) {
        throw DataError("cannot open '" + path + "' for writing");
    }
    write_csv(out, header, values);
    if (!out) {
        throw DataError("failed writing '" + path + "'");
    }
}

/// "prefix1", ..., "prefixP".
inline std::vector<std::string> numbered_header(const std::string& prefix, Eigen::Index p) {
    std::vector<std::string> out;
    for (Eigen::Index j = 1; j <= p; ++j) {
        out.push_back(prefix + std::to_string(j));
    }
    return out;
}

}  // namespace gsobi
