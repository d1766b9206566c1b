#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sess/errors.hpp"
#include "sess/numerics.hpp"

namespace sess {

/// Index sets defining predictor groups and response groups over original
/// columns (0-based). Groups may overlap; together the predictor groups must
/// cover every predictor column and likewise for responses.
struct GroupSpec {
    std::vector<std::vector<int>> predictor_groups;
    std::vector<std::vector<int>> response_groups;

    int predictor_group_count() const { return static_cast<int>(predictor_groups.size()); }
    int response_group_count() const { return static_cast<int>(response_groups.size()); }

    /// Number of original predictor columns implied by the index sets.
    int predictor_span() const { return span_of(predictor_groups); }
    int response_span() const { return span_of(response_groups); }

    int expanded_predictor_count() const { return total_size(predictor_groups); }
    int expanded_response_count() const { return total_size(response_groups); }

    /// Checks: nonempty groups, indices in range, and full coverage of
    /// 0..max_index in both dimensions.
    void validate() const {
        validate_side(predictor_groups, "predictor");
        validate_side(response_groups, "response");
    }

private:
    static int total_size(const std::vector<std::vector<int>>& groups) {
        int t = 0;
        for (const auto& g : groups) t += static_cast<int>(g.size());
        return t;
    }

    static int span_of(const std::vector<std::vector<int>>& groups) {
        int hi = -1;
        for (const auto& g : groups)
            for (int idx : g) hi = std::max(hi, idx);
        return hi + 1;
    }

    static void validate_side(const std::vector<std::vector<int>>& groups, const char* side) {
        if (groups.empty()) throw EmptyGroup(std::string(side) + " groups: none defined");
        std::set<int> seen;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (groups[g].empty()) {
                throw EmptyGroup(std::string(side) + " group " + std::to_string(g + 1) + " is empty");
            }
            for (int idx : groups[g]) {
                if (idx < 0) {
                    throw IndexOutOfRange(std::string(side) + " group " + std::to_string(g + 1) +
                                          " has negative index");
                }
                seen.insert(idx);
            }
        }
        const int hi = *seen.rbegin();
        if (static_cast<int>(seen.size()) != hi + 1) {
            throw IndexOutOfRange(std::string(side) +
                                  " groups do not cover every column up to their maximum index");
        }
    }
};

/// Position of one coefficient: entry (row_a, col_m) of the block linking
/// predictor group k to response group j. All fields 0-based.
struct BlockCoordinate {
    int k = 0;
    int j = 0;
    int row_a = 0;
    int col_m = 0;

    friend auto operator<=>(const BlockCoordinate&, const BlockCoordinate&) = default;
};

/// Group-expanded data: overlapped columns are duplicated so the expanded
/// matrices are plain block concatenations (X_1 | ... | X_K), (Y_1 | ... | Y_J).
struct ExpandedDataset {
    Matrix x;  ///< n x p_expanded
    Matrix y;  ///< n x q_expanded

    std::vector<int> x_offsets;  ///< size K+1; block k occupies [x_offsets[k], x_offsets[k+1])
    std::vector<int> y_offsets;  ///< size J+1
    std::vector<int> x_origin;   ///< expanded predictor column -> original column
    std::vector<int> y_origin;   ///< expanded response column -> original column
    int p_orig = 0;
    int q_orig = 0;

    int n() const { return static_cast<int>(x.rows()); }
    int predictor_group_count() const { return static_cast<int>(x_offsets.size()) - 1; }
    int response_group_count() const { return static_cast<int>(y_offsets.size()) - 1; }
    int x_block_size(int k) const { return x_offsets[k + 1] - x_offsets[k]; }
    int y_block_size(int j) const { return y_offsets[j + 1] - y_offsets[j]; }

    auto x_block(int k) const { return x.middleCols(x_offsets[k], x_block_size(k)); }
    auto y_block(int j) const { return y.middleCols(y_offsets[j], y_block_size(j)); }
};

/// Duplicate overlapped columns of already-standardized data into the
/// block-concatenated layout, preserving within-group order.
inline ExpandedDataset expand(const Matrix& x_orig, const Matrix& y_orig, const GroupSpec& groups) {
    groups.validate();
    if (groups.predictor_span() > x_orig.cols()) {
        throw IndexOutOfRange("predictor group index exceeds X column count");
    }
    if (groups.response_span() > y_orig.cols()) {
        throw IndexOutOfRange("response group index exceeds Y column count");
    }
    if (groups.predictor_span() != x_orig.cols() || groups.response_span() != y_orig.cols()) {
        throw DimensionMismatch("group spec does not cover all data columns");
    }
    ExpandedDataset out;
    out.p_orig = static_cast<int>(x_orig.cols());
    out.q_orig = static_cast<int>(y_orig.cols());
    out.x.resize(x_orig.rows(), groups.expanded_predictor_count());
    out.y.resize(y_orig.rows(), groups.expanded_response_count());
    out.x_offsets.push_back(0);
    for (const auto& g : groups.predictor_groups) {
        for (int idx : g) {
            out.x.col(out.x_origin.size()) = x_orig.col(idx);
            out.x_origin.push_back(idx);
        }
        out.x_offsets.push_back(static_cast<int>(out.x_origin.size()));
    }
    out.y_offsets.push_back(0);
    for (const auto& g : groups.response_groups) {
        for (int idx : g) {
            out.y.col(out.y_origin.size()) = y_orig.col(idx);
            out.y_origin.push_back(idx);
        }
        out.y_offsets.push_back(static_cast<int>(out.y_origin.size()));
    }
    return out;
}

namespace detail {

inline std::vector<int> group_offsets(const std::vector<std::vector<int>>& groups) {
    std::vector<int> offs{0};
    for (const auto& g : groups) offs.push_back(offs.back() + static_cast<int>(g.size()));
    return offs;
}

}  // namespace detail

/// Map a block coordinate to its (expanded predictor column, expanded
/// response column) position. Bijective; inverse is from_flat.
inline std::pair<int, int> to_flat(const BlockCoordinate& coord, const GroupSpec& groups) {
    if (coord.k < 0 || coord.k >= groups.predictor_group_count() || coord.j < 0 ||
        coord.j >= groups.response_group_count()) {
        throw IndexOutOfRange("to_flat: block index out of range");
    }
    if (coord.row_a < 0 ||
        coord.row_a >= static_cast<int>(groups.predictor_groups[coord.k].size()) ||
        coord.col_m < 0 ||
        coord.col_m >= static_cast<int>(groups.response_groups[coord.j].size())) {
        throw IndexOutOfRange("to_flat: entry index out of range");
    }
    const auto x_offs = detail::group_offsets(groups.predictor_groups);
    const auto y_offs = detail::group_offsets(groups.response_groups);
    return {x_offs[coord.k] + coord.row_a, y_offs[coord.j] + coord.col_m};
}

inline BlockCoordinate from_flat(int expanded_row, int expanded_col, const GroupSpec& groups) {
    const auto x_offs = detail::group_offsets(groups.predictor_groups);
    const auto y_offs = detail::group_offsets(groups.response_groups);
    if (expanded_row < 0 || expanded_row >= x_offs.back() || expanded_col < 0 ||
        expanded_col >= y_offs.back()) {
        throw IndexOutOfRange("from_flat: flat index out of range");
    }
    BlockCoordinate c;
    while (x_offs[c.k + 1] <= expanded_row) ++c.k;
    while (y_offs[c.j + 1] <= expanded_col) ++c.j;
    c.row_a = expanded_row - x_offs[c.k];
    c.col_m = expanded_col - y_offs[c.j];
    return c;
}

/// Collapse expanded-coordinate entries onto the original p x q grid.
/// Entries whose coordinates map to the same original cell are summed, so
/// X_expanded * B_expanded equals X_original * collapsed for predictor overlap.
inline Matrix collapse_to_original(const std::map<BlockCoordinate, double>& entries,
                                   const GroupSpec& groups) {
    Matrix out = Matrix::Zero(groups.predictor_span(), groups.response_span());
    for (const auto& [coord, value] : entries) {
        const int i_orig = groups.predictor_groups[coord.k][coord.row_a];
        const int l_orig = groups.response_groups[coord.j][coord.col_m];
        out(i_orig, l_orig) += value;
    }
    return out;
}

}  // namespace sess
