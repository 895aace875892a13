#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "xray/errors.hpp"

namespace xray {

/// Shape-tagged flat array of doubles, row-major. The shape is fixed at
/// construction; reshape returns a new tensor of the same length.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Row-major indexers for the ranks used by the network.
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t c, std::size_t i, std::size_t j) {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    double at(std::size_t c, std::size_t i, std::size_t j) const {
        return data_[(c * shape_[1] + i) * shape_[2] + j];
    }
    double& at(std::size_t n, std::size_t c, std::size_t i, std::size_t j) {
        return data_[((n * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
    }
    double at(std::size_t n, std::size_t c, std::size_t i, std::size_t j) const {
        return data_[((n * shape_[1] + c) * shape_[2] + i) * shape_[3] + j];
    }

    Tensor reshape(std::vector<std::size_t> new_shape) const;
    void fill(double value);

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

/// c[i][j] = sum_t a[i][t] * b[t][j]
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

Tensor elementwise(const Tensor& a, const std::function<double(double)>& f);

Tensor add(const Tensor& a, const Tensor& b);

/// Deterministic 64-bit generator (splitmix64). Identical seeds give identical
/// sequences on every platform; all randomness in the project flows from here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw ValueError("uniform: lo must be < hi");
        return lo + (hi - lo) * next_double();
    }

    /// Uniform integer in [0, n). Modulo reduction, bias negligible for n << 2^64.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// Fisher-Yates; pinned here instead of std::shuffle so order is portable.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// Independent child stream for (seed, index), used by the experiment rows.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

Tensor rand_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi);

}  // namespace xray
