#include "xray/tensor.hpp"

#include <sstream>

namespace xray {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

static void check_dims_positive(const std::vector<std::size_t>& shape) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive");
    }
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    check_dims_positive(shape_);
    data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_dims_positive(shape_);
    if (data_.size() != shape_product(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::reshape(std::vector<std::size_t> new_shape) const {
    if (shape_product(new_shape) != data_.size()) {
        Tensor probe;
        probe.shape_ = new_shape;
        throw ShapeError("reshape from " + shape_str() + " to " + probe.shape_str() +
                         " changes element count");
    }
    return Tensor(std::move(new_shape), data_);
}

void Tensor::fill(double value) {
    for (double& v : data_) v = value;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
            const double av = a.at(i, t);
            const double* brow = b.data() + t * n;
            double* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) throw ShapeError("transpose expects a matrix, got " + a.shape_str());
    Tensor t({a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor elementwise(const Tensor& a, const std::function<double(double)>& f) {
    Tensor out(a.shape());
    const double* in = a.data();
    double* o = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) o[i] = f(in[i]);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) {
        throw ShapeError("add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    Rng r(seed + 1 + index);
    return r.next_u64();
}

Tensor rand_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
    if (!(lo < hi)) throw ValueError("rand_uniform: lo must be < hi");
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = lo + (hi - lo) * rng.next_double();
    return t;
}

}  // namespace xray
