#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace scribseg::nn {

// Dense NCHW tensor of doubles.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

    size_t numel() const { return v.size(); }
    int plane() const { return h * w; }

    double& at(int in, int ic, int iy, int ix) {
        return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    // Pointer to the (n, c) plane.
    double* plane_ptr(int in, int ic) { return v.data() + (static_cast<size_t>(in) * c + ic) * plane(); }
    const double* plane_ptr(int in, int ic) const {
        return v.data() + (static_cast<size_t>(in) * c + ic) * plane();
    }

    bool same_shape(const Tensor& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }

    void zero() { std::fill(v.begin(), v.end(), 0.0); }

    std::string shape_str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

}  // namespace scribseg::nn
