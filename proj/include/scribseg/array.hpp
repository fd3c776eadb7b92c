#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace scribseg {

// Dense row-major 2D array. The workhorse for images and label maps.
template <typename T>
struct Array2D {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Array2D() = default;
    Array2D(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Array2D: negative shape");
    }

    T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }
    template <typename U>
    bool same_shape(const Array2D<U>& o) const { return rows == o.rows && cols == o.cols; }
    bool in_bounds(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

    bool operator==(const Array2D& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

using Image2D = Array2D<double>;
using LabelArray = Array2D<uint8_t>;

// Sentinel for pixels a scribble does not annotate.
inline constexpr uint8_t kUnlabeled = 255;

}  // namespace scribseg
