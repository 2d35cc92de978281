#pragma once

#include "stmforge/errors.hpp"

#include <numeric>
#include <string>
#include <vector>

namespace stmforge {

// Dense row-major n-d array. First axis is the batch dimension wherever a
// layer consumes one; spatial layout is [N, H, W, C]. Values are computed
// in 64-bit; trainable parameters are kept on the 32-bit grid that the
// checkpoint format stores (see quantize_f32).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;

    static Tensor zeros(std::vector<int> s) {
        Tensor t;
        t.shape = std::move(s);
        t.data.assign(count(t.shape), 0.0);
        return t;
    }

    // Rounds every value to the nearest float32, so serializing as 32-bit
    // and reloading reproduces the tensor exactly.
    void quantize_f32() {
        for (auto& v : data) v = static_cast<double>(static_cast<float>(v));
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d <= 0) throw DataError("tensor dimensions must be positive");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t size() const { return data.size(); }

    std::size_t per_sample() const {
        if (shape.empty()) throw DataError("tensor has no shape");
        return size() / static_cast<std::size_t>(shape[0]);
    }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::string shape_str(const std::vector<int>& shape);

} // namespace stmforge
