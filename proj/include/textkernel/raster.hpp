#pragma once

#include <cstdint>
#include <vector>

namespace textkernel {

// Dense row-major 2-D grid. (row, col) indexing, row 0 at the top, matching
// image conventions everywhere in this library.
template <typename T>
struct Raster {
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Raster() = default;
    Raster(int h, int w, T fill = T{}) : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

    T& at(int row, int col) { return data[static_cast<std::size_t>(row) * width + col]; }
    const T& at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }

    bool in_bounds(int row, int col) const {
        return row >= 0 && row < height && col >= 0 && col < width;
    }

    std::size_t size() const { return data.size(); }

    bool operator==(const Raster& other) const {
        return height == other.height && width == other.width && data == other.data;
    }
};

using Mask = Raster<std::uint8_t>;       // 0/1 occupancy
using LabelMap = Raster<std::int32_t>;   // connected-component ids, 0 = background
using ClassMask = Raster<std::uint8_t>;  // 0 non-text, 1 text kernel, 2 text border
using ScoreMap = Raster<double>;         // per-pixel reals (probabilities, similarities)

// Channel-last H*W*C volume. Held in doubles: the loss kernels are checked
// against 1e-6 finite differences, which float storage cannot survive. File
// serialization narrows to f32 (see io).
struct ProbMap {
    int height = 0;
    int width = 0;
    int channels = 0;
    bool logits = false;  // raw scores vs softmax probabilities
    std::vector<double> data;

    ProbMap() = default;
    ProbMap(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}

    double& at(int row, int col, int ch) {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
    double at(int row, int col, int ch) const {
        return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
    }
};

// Dense feature volumes share the layout; the flag is meaningless for them.
using FeatureMap = ProbMap;

}  // namespace textkernel
