#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "swr/common.hpp"

namespace swr {

inline size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

inline std::string shape_str(const std::vector<size_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major tensor. S is float (training) or double (gradient checks).
template <class S>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<S> values;

    Tensor() = default;
    explicit Tensor(std::vector<size_t> shp, S fill = S(0))
        : shape(std::move(shp)), values(shape_numel(shape), fill) {}
    Tensor(std::vector<size_t> shp, std::vector<S> vals) : shape(std::move(shp)), values(std::move(vals)) {
        require(values.size() == shape_numel(shape), "tensor value count ", values.size(),
                " does not match shape ", shape_str(shape));
    }

    static Tensor matrix(size_t r, size_t c, S fill = S(0)) { return Tensor({r, c}, fill); }

    size_t numel() const { return values.size(); }
    size_t rank() const { return shape.size(); }
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const {
        if (shape.size() == 1) return shape[0];
        size_t c = 1;
        for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
        return c;
    }

    S& at(size_t r, size_t c) { return values[r * cols() + c]; }
    const S& at(size_t r, size_t c) const { return values[r * cols() + c]; }

    S* data() { return values.data(); }
    const S* data() const { return values.data(); }

    void fill(S v) { std::fill(values.begin(), values.end(), v); }

    bool all_finite() const {
        for (S v : values)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    template <class T>
    Tensor<T> cast() const {
        Tensor<T> out;
        out.shape = shape;
        out.values.resize(values.size());
        for (size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<T>(values[i]);
        return out;
    }
};

}  // namespace swr
