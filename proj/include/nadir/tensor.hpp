#pragma once

#include <cstddef>
#include <vector>

namespace nadir {

/// Dense 3-D array stored channel-major: index (c, r, col) → (c·H + r)·W + col.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t index(int c, int r, int col) const {
        return (static_cast<std::size_t>(c) * height + r) * width + col;
    }
    double& at(int c, int r, int col) { return data[index(c, r, col)]; }
    double at(int c, int r, int col) const { return data[index(c, r, col)]; }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

}  // namespace nadir
