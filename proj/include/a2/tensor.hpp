#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace a2 {

// Dense row-major 64-bit float array. Rank 1 tensors are treated as a single
// row where a 2-D view is needed (biases, slopes).
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)), values(numel_of(shape), 0.0) {}
    Tensor(std::vector<std::size_t> s, std::vector<double> v)
        : shape(std::move(s)), values(std::move(v)) {
        if (numel_of(shape) != values.size())
            throw std::invalid_argument("Tensor: shape/value length mismatch");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) n *= d;
        return s.empty() ? 0 : n;
    }

    std::size_t numel() const { return values.size(); }

    std::size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
    std::size_t cols() const {
        if (shape.empty()) return 0;
        return shape.size() >= 2 ? shape[1] : shape[0];
    }

    double& at(std::size_t r, std::size_t c) { return values[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

inline std::string shape_str(const Tensor& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i)
        s += (i ? "x" : "") + std::to_string(t.shape[i]);
    return s + "]";
}

}  // namespace a2
