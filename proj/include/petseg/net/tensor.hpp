#ifndef PETSEG_NET_TENSOR_HPP
#define PETSEG_NET_TENSOR_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "petseg/errors.hpp"

namespace petseg::net {

// Dense (N, C, D, H, W) array, W fastest. Scalar type is float or double;
// the micronet is the one module that may run in 32-bit.
template <typename T>
struct Tensor {
    std::array<std::int64_t, 5> shape{0, 0, 0, 0, 0};
    std::vector<T> data;

    Tensor() = default;
    Tensor(std::int64_t n, std::int64_t c, std::int64_t d, std::int64_t h, std::int64_t w)
        : shape{n, c, d, h, w} {
        data.assign(static_cast<std::size_t>(count()), T(0));
    }

    std::int64_t count() const {
        return shape[0] * shape[1] * shape[2] * shape[3] * shape[4];
    }
    std::int64_t spatial() const { return shape[2] * shape[3] * shape[4]; }

    // reshape-in-place; reallocates only on growth
    void resize(std::int64_t n, std::int64_t c, std::int64_t d, std::int64_t h, std::int64_t w) {
        shape = {n, c, d, h, w};
        data.resize(static_cast<std::size_t>(count()));
    }
    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    T* plane(std::int64_t n, std::int64_t c) {
        return data.data() + (n * shape[1] + c) * spatial();
    }
    const T* plane(std::int64_t n, std::int64_t c) const {
        return data.data() + (n * shape[1] + c) * spatial();
    }

    T& at(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) {
        return data[static_cast<std::size_t>(
            (((n * shape[1] + c) * shape[2] + z) * shape[3] + y) * shape[4] + x)];
    }
    T at(std::int64_t n, std::int64_t c, std::int64_t z, std::int64_t y, std::int64_t x) const {
        return data[static_cast<std::size_t>(
            (((n * shape[1] + c) * shape[2] + z) * shape[3] + y) * shape[4] + x)];
    }
};

// Batch of voxelwise class targets, shape (N, D, H, W).
struct LabelBatch {
    std::array<std::int64_t, 4> shape{0, 0, 0, 0};
    std::vector<std::uint8_t> values;

    LabelBatch() = default;
    LabelBatch(std::int64_t n, std::int64_t d, std::int64_t h, std::int64_t w) : shape{n, d, h, w} {
        values.assign(static_cast<std::size_t>(n * d * h * w), 0);
    }

    std::int64_t count() const { return shape[0] * shape[1] * shape[2] * shape[3]; }
    std::int64_t spatial() const { return shape[1] * shape[2] * shape[3]; }
    const std::uint8_t* sample(std::int64_t n) const { return values.data() + n * spatial(); }
    std::uint8_t* sample(std::int64_t n) { return values.data() + n * spatial(); }
};

} // namespace petseg::net

#endif
