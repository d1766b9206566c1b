#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sess/errors.hpp"
#include "sess/groups.hpp"
#include "sess/numerics.hpp"

namespace sess {

/// Shortest round-trippable decimal form of a double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view token, long line, long col) {
    double v = 0.0;
    const char* begin = token.data();
    const char* end = begin + token.size();
    const auto res = std::from_chars(begin, end, v);
    if (res.ec != std::errc() || res.ptr != end || !std::isfinite(v)) {
        throw ParseError("cannot parse '" + std::string(token) + "' as a finite real", line, col);
    }
    return v;
}

/// Write `content` to `path` via a temporary file and atomic rename, so a
/// failed run leaves no partial file behind.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << content;
        os.flush();
        if (!os) {
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw IoError("cannot rename " + tmp.string() + " to " + path.string());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// CSV matrices
// ---------------------------------------------------------------------------

/// Matrix as CSV: header `prefix1,...,prefixC`, one row per line,
/// newline-terminated.
inline std::string matrix_to_csv(const Matrix& m, const std::string& col_prefix) {
    std::string out;
    out.reserve(static_cast<std::size_t>(m.size()) * 12 + 64);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (c > 0) out += ',';
        out += col_prefix + std::to_string(c + 1);
    }
    out += '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c > 0) out += ',';
            out += format_double(m(r, c));
        }
        out += '\n';
    }
    return out;
}

inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m,
                             const std::string& col_prefix) {
    atomic_write(path, matrix_to_csv(m, col_prefix));
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

}  // namespace detail

/// Parse a header-first CSV of finite reals. Ragged rows and malformed
/// cells raise ParseError with the offending line/column.
inline Matrix matrix_from_csv(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::size_t cols = 0;
    long line_no = 0;
    std::istringstream is(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = detail::split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            cols = fields.size();
            continue;
        }
        if (fields.size() != cols) {
            throw ParseError("expected " + std::to_string(cols) + " fields, found " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        std::vector<double> row(cols);
        for (std::size_t c = 0; c < cols; ++c) {
            row[c] = parse_double(fields[c], line_no, static_cast<long>(c) + 1);
        }
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw ParseError("empty CSV document", 1);
    Matrix m(rows.size(), cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = rows[r][c];
    }
    return m;
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
    return matrix_from_csv(read_file(path));
}

// ---------------------------------------------------------------------------
// Sparse estimates (1-based triplets in original coordinates)
// ---------------------------------------------------------------------------

struct EstimateTriplet {
    int row = 0;  ///< original predictor index, 0-based in memory
    int col = 0;  ///< original response index, 0-based in memory
    double value = 0.0;
};

inline std::string triplets_to_csv(const std::vector<EstimateTriplet>& entries) {
    std::string out = "row_index,col_index,value\n";
    for (const auto& e : entries) {
        out += std::to_string(e.row + 1);
        out += ',';
        out += std::to_string(e.col + 1);
        out += ',';
        out += format_double(e.value);
        out += '\n';
    }
    return out;
}

inline std::vector<EstimateTriplet> triplets_from_csv(const std::string& text) {
    std::vector<EstimateTriplet> out;
    std::istringstream is(text);
    std::string line;
    long line_no = 0;
    bool header_seen = false;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != 3) throw ParseError("expected 3 fields", line_no);
        EstimateTriplet t;
        t.row = static_cast<int>(parse_double(fields[0], line_no, 1)) - 1;
        t.col = static_cast<int>(parse_double(fields[1], line_no, 2)) - 1;
        t.value = parse_double(fields[2], line_no, 3);
        if (t.row < 0 || t.col < 0) throw ParseError("indices are 1-based", line_no);
        out.push_back(t);
    }
    if (!header_seen) throw ParseError("empty estimate document", 1);
    return out;
}

/// Dense original-coordinate matrix from triplets (duplicates summed).
inline Matrix triplets_to_dense(const std::vector<EstimateTriplet>& entries, int p, int q) {
    Matrix m = Matrix::Zero(p, q);
    for (const auto& e : entries) {
        if (e.row >= p || e.col >= q) {
            throw DimensionMismatch("estimate entry (" + std::to_string(e.row + 1) + "," +
                                    std::to_string(e.col + 1) + ") outside " + std::to_string(p) +
                                    "x" + std::to_string(q));
        }
        m(e.row, e.col) += e.value;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Groups file
// ---------------------------------------------------------------------------
//
// Plain-text sections, 1-based inclusive indices, ranges allowed:
//
//   [predictors]
//   g1: 1-20
//   g2: 21-30, 35
//   [responses]
//   r1: 1-20
//
// '#' starts a comment; blank lines are ignored.

inline std::string groups_to_text(const GroupSpec& groups) {
    std::string out = "[predictors]\n";
    auto write_side = [&out](const std::vector<std::vector<int>>& side, char prefix) {
        for (std::size_t g = 0; g < side.size(); ++g) {
            out += prefix + std::to_string(g + 1) + ": ";
            // Compress runs of consecutive indices into a-b ranges.
            std::size_t i = 0;
            bool first = true;
            while (i < side[g].size()) {
                std::size_t run_end = i;
                while (run_end + 1 < side[g].size() &&
                       side[g][run_end + 1] == side[g][run_end] + 1)
                    ++run_end;
                if (!first) out += ", ";
                first = false;
                if (run_end > i) {
                    out += std::to_string(side[g][i] + 1) + "-" + std::to_string(side[g][run_end] + 1);
                } else {
                    out += std::to_string(side[g][i] + 1);
                }
                i = run_end + 1;
            }
            out += '\n';
        }
    };
    write_side(groups.predictor_groups, 'g');
    out += "[responses]\n";
    write_side(groups.response_groups, 'r');
    return out;
}

inline void write_groups_file(const std::filesystem::path& path, const GroupSpec& groups) {
    atomic_write(path, groups_to_text(groups));
}

inline GroupSpec groups_from_text(const std::string& text) {
    GroupSpec spec;
    std::vector<std::vector<int>>* side = nullptr;
    bool saw_predictors = false, saw_responses = false;
    std::istringstream is(text);
    std::string raw;
    long line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        std::size_t begin = line.find_first_not_of(" \t");
        if (begin == std::string::npos) continue;
        line.erase(0, begin);
        if (line == "[predictors]") {
            side = &spec.predictor_groups;
            saw_predictors = true;
            continue;
        }
        if (line == "[responses]") {
            side = &spec.response_groups;
            saw_responses = true;
            continue;
        }
        if (side == nullptr) throw ParseError("group line before any section header", line_no);
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw ParseError("expected 'name: indices'", line_no);
        std::vector<int> indices;
        std::string list = line.substr(colon + 1);
        std::istringstream ls(list);
        std::string token;
        while (std::getline(ls, token, ',')) {
            const auto a = token.find_first_not_of(" \t");
            if (a == std::string::npos) throw ParseError("empty index token", line_no);
            const auto b = token.find_last_not_of(" \t");
            token = token.substr(a, b - a + 1);
            const auto dash = token.find('-');
            auto parse_index = [&](std::string_view s) {
                int v = 0;
                const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
                if (res.ec != std::errc() || res.ptr != s.data() + s.size() || v < 1) {
                    throw ParseError("bad index '" + std::string(s) + "'", line_no);
                }
                return v;
            };
            if (dash == std::string::npos) {
                indices.push_back(parse_index(token) - 1);
            } else {
                const int lo = parse_index(std::string_view(token).substr(0, dash));
                const int hi = parse_index(std::string_view(token).substr(dash + 1));
                if (hi < lo) throw ParseError("descending range '" + token + "'", line_no);
                for (int v = lo; v <= hi; ++v) indices.push_back(v - 1);
            }
        }
        if (indices.empty()) throw ParseError("group with no indices", line_no);
        side->push_back(std::move(indices));
    }
    if (!saw_predictors || !saw_responses) {
        throw ParseError("groups file needs [predictors] and [responses] sections", line_no);
    }
    spec.validate();
    return spec;
}

inline GroupSpec read_groups_file(const std::filesystem::path& path) {
    return groups_from_text(read_file(path));
}

}  // namespace sess
