#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>

#include "nadir/embedding.hpp"
#include "nadir/error.hpp"
#include "nadir/log.hpp"

namespace nadir::embedding {

namespace {

int scale_half_up(double v, double lo, double hi, int h) {
    const double scaled = 1.0 + static_cast<double>(h - 1) * (v - lo) / (hi - lo);
    return std::clamp(static_cast<int>(std::floor(scaled + 0.5)), 1, h);
}

/// Nearest free cell by Chebyshev ring; within a ring the smaller row, then column, wins.
std::optional<GridCell> nearest_free(const std::vector<char>& used, int h, GridCell at) {
    for (int r = 1; r < h; ++r) {
        for (int row = at.row - r; row <= at.row + r; ++row) {
            if (row < 1 || row > h) continue;
            for (int col = at.col - r; col <= at.col + r; ++col) {
                if (col < 1 || col > h) continue;
                if (std::max(std::abs(row - at.row), std::abs(col - at.col)) != r) continue;
                if (!used[static_cast<std::size_t>((row - 1) * h + (col - 1))]) return GridCell{row, col};
            }
        }
    }
    return std::nullopt;
}

}  // namespace

GridCoordinates grid_map(const RealMatrix& y, int h) {
    const auto n = static_cast<int>(y.rows());
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "grid_map needs at least one node");
    if (y.cols() != 2) throw Error(ErrorCode::ShapeMismatch, "embedding must have two columns");
    if (h < 1 || static_cast<long long>(n) > static_cast<long long>(h) * h)
        throw Error(ErrorCode::GridTooSmall,
                    std::to_string(n) + " nodes do not fit a " + std::to_string(h) + "x" + std::to_string(h) + " grid");

    GridCoordinates out;
    out.h = h;
    out.cells.resize(static_cast<std::size_t>(n));
    std::vector<int> axis[2];
    for (int c = 0; c < 2; ++c) {
        const double lo = y.col(c).minCoeff();
        const double hi = y.col(c).maxCoeff();
        axis[c].resize(static_cast<std::size_t>(n), 1);
        if (!(hi > lo)) {
            const std::string message = std::string("DegenerateAxis: axis ") + (c == 0 ? "1" : "2") +
                                        " has zero range, all nodes placed at coordinate 1";
            out.warnings.push_back(message);
            log::warn(message);
            continue;
        }
        for (int i = 0; i < n; ++i) axis[c][static_cast<std::size_t>(i)] = scale_half_up(y(i, c), lo, hi, h);
    }

    std::vector<char> used(static_cast<std::size_t>(h) * static_cast<std::size_t>(h), 0);
    for (int i = 0; i < n; ++i) {
        GridCell cell{axis[0][static_cast<std::size_t>(i)], axis[1][static_cast<std::size_t>(i)]};
        auto& slot = used[static_cast<std::size_t>((cell.row - 1) * h + (cell.col - 1))];
        if (slot) {
            const auto free = nearest_free(used, h, cell);
            if (!free) throw Error(ErrorCode::GridTooSmall, "no free cell left on the grid");
            out.relocations.push_back({i, cell.row, cell.col, free->row, free->col});
            cell = *free;
        }
        used[static_cast<std::size_t>((cell.row - 1) * h + (cell.col - 1))] = 1;
        out.cells[static_cast<std::size_t>(i)] = cell;
    }
    if (!out.relocations.empty())
        log::debug("grid_map relocated " + std::to_string(out.relocations.size()) + " colliding nodes");
    return out;
}

}  // namespace nadir::embedding
