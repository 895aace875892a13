#include "xray/layers.hpp"

#include <cmath>

namespace xray {

Activation parse_activation(const std::string& s) {
    if (s == "none") return Activation::None;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ValueError("unknown activation: " + s);
}

static double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Tensor activation_apply(const Tensor& x, Activation kind) {
    Tensor out(x.shape());
    const double* in = x.data();
    double* o = out.data();
    switch (kind) {
        case Activation::None:
            for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i];
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i] > 0.0 ? in[i] : 0.0;
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::tanh(in[i]);
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < x.size(); ++i) o[i] = sigmoid_scalar(in[i]);
            break;
    }
    return out;
}

Tensor activation_grad(const Tensor& x, Activation kind, const Tensor& grad_out) {
    if (!x.same_shape(grad_out)) {
        throw ShapeError("activation_grad shape mismatch: " + x.shape_str() + " vs " +
                         grad_out.shape_str());
    }
    Tensor out(x.shape());
    const double* in = x.data();
    const double* g = grad_out.data();
    double* o = out.data();
    switch (kind) {
        case Activation::None:
            for (std::size_t i = 0; i < x.size(); ++i) o[i] = g[i];
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < x.size(); ++i) o[i] = in[i] > 0.0 ? g[i] : 0.0;
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double t = std::tanh(in[i]);
                o[i] = g[i] * (1.0 - t * t);
            }
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double s = sigmoid_scalar(in[i]);
                o[i] = g[i] * s * (1.0 - s);
            }
            break;
    }
    return out;
}

Tensor softmax(const Tensor& z) {
    if (z.size() == 0) throw ValueError("softmax: empty input");
    double zmax = z[0];
    for (std::size_t i = 1; i < z.size(); ++i) zmax = std::max(zmax, z[i]);
    Tensor p(z.shape());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (std::size_t i = 0; i < z.size(); ++i) p[i] /= sum;
    return p;
}

// ---------------------------------------------------------------------------
// convolution

namespace {

Tensor lift_to_4d(const Tensor& x, bool* was_3d) {
    if (x.ndim() == 4) {
        *was_3d = false;
        return x;
    }
    if (x.ndim() == 3) {
        *was_3d = true;
        return x.reshape({1, x.dim(0), x.dim(1), x.dim(2)});
    }
    throw ShapeError("expected a [C,H,W] or [N,C,H,W] tensor, got " + x.shape_str());
}

Tensor drop_batch_dim(Tensor t) {
    return t.reshape({t.dim(1), t.dim(2), t.dim(3)});
}

}  // namespace

Tensor conv2d_forward(const Tensor& kernels, const Tensor& biases, const Tensor& x) {
    bool was_3d = false;
    const Tensor x4 = lift_to_4d(x, &was_3d);
    const std::size_t O = kernels.dim(0), C = kernels.dim(1), K = kernels.dim(2);
    const std::size_t N = x4.dim(0), H = x4.dim(2), W = x4.dim(3);
    if (kernels.ndim() != 4 || kernels.dim(3) != K) {
        throw ShapeError("conv kernels must be [O,C,k,k], got " + kernels.shape_str());
    }
    if (x4.dim(1) != C) {
        throw ShapeError("conv channel mismatch: kernels " + kernels.shape_str() + " vs input " +
                         x4.shape_str());
    }
    if (H < K || W < K) {
        throw ShapeError("conv input " + x4.shape_str() + " smaller than kernel " +
                         kernels.shape_str());
    }
    const std::size_t Ho = H - K + 1, Wo = W - K + 1;
    Tensor out({N, O, Ho, Wo});
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t o = 0; o < O; ++o) {
            double* oplane = out.data() + ((n * O + o) * Ho) * Wo;
            const double b = biases[o];
            for (std::size_t i = 0; i < Ho * Wo; ++i) oplane[i] = b;
            for (std::size_t c = 0; c < C; ++c) {
                const double* xplane = x4.data() + ((n * C + c) * H) * W;
                const double* kplane = kernels.data() + ((o * C + c) * K) * K;
                for (std::size_t a = 0; a < K; ++a) {
                    for (std::size_t bb = 0; bb < K; ++bb) {
                        const double w = kplane[a * K + bb];
                        for (std::size_t i = 0; i < Ho; ++i) {
                            const double* xrow = xplane + (i + a) * W + bb;
                            double* orow = oplane + i * Wo;
                            for (std::size_t j = 0; j < Wo; ++j) orow[j] += w * xrow[j];
                        }
                    }
                }
            }
        }
    }
    return was_3d ? drop_batch_dim(std::move(out)) : out;
}

ConvGrads conv2d_backward(const Tensor& kernels, const Tensor& biases, const Tensor& x,
                          const Tensor& grad_out) {
    bool was_3d = false;
    const Tensor x4 = lift_to_4d(x, &was_3d);
    bool g_was_3d = false;
    const Tensor g4 = lift_to_4d(grad_out, &g_was_3d);
    const std::size_t O = kernels.dim(0), C = kernels.dim(1), K = kernels.dim(2);
    const std::size_t N = x4.dim(0), H = x4.dim(2), W = x4.dim(3);
    const std::size_t Ho = H - K + 1, Wo = W - K + 1;
    if (g4.dim(0) != N || g4.dim(1) != O || g4.dim(2) != Ho || g4.dim(3) != Wo) {
        throw ShapeError("conv grad_out shape " + grad_out.shape_str() +
                         " does not match forward output");
    }
    (void)biases;

    ConvGrads grads{Tensor(x4.shape()), Tensor(kernels.shape()), Tensor({O})};
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t o = 0; o < O; ++o) {
            const double* gplane = g4.data() + ((n * O + o) * Ho) * Wo;
            double bsum = 0.0;
            for (std::size_t i = 0; i < Ho * Wo; ++i) bsum += gplane[i];
            grads.grad_biases[o] += bsum;
            for (std::size_t c = 0; c < C; ++c) {
                const double* xplane = x4.data() + ((n * C + c) * H) * W;
                double* gxplane = grads.grad_x.data() + ((n * C + c) * H) * W;
                const double* kplane = kernels.data() + ((o * C + c) * K) * K;
                double* gkplane = grads.grad_kernels.data() + ((o * C + c) * K) * K;
                for (std::size_t a = 0; a < K; ++a) {
                    for (std::size_t bb = 0; bb < K; ++bb) {
                        const double w = kplane[a * K + bb];
                        double ksum = 0.0;
                        for (std::size_t i = 0; i < Ho; ++i) {
                            const double* grow = gplane + i * Wo;
                            const double* xrow = xplane + (i + a) * W + bb;
                            double* gxrow = gxplane + (i + a) * W + bb;
                            for (std::size_t j = 0; j < Wo; ++j) {
                                ksum += grow[j] * xrow[j];
                                gxrow[j] += w * grow[j];
                            }
                        }
                        gkplane[a * K + bb] += ksum;
                    }
                }
            }
        }
    }
    if (was_3d) grads.grad_x = drop_batch_dim(std::move(grads.grad_x));
    return grads;
}

// ---------------------------------------------------------------------------
// pooling

PoolResult maxpool_forward(const Tensor& x) {
    bool was_3d = false;
    const Tensor x4 = lift_to_4d(x, &was_3d);
    const std::size_t N = x4.dim(0), C = x4.dim(1), H = x4.dim(2), W = x4.dim(3);
    if (H % 2 != 0 || W % 2 != 0) {
        throw ShapeError("maxpool requires even spatial dims, got " + x.shape_str());
    }
    const std::size_t Ho = H / 2, Wo = W / 2;
    PoolResult res{Tensor({N, C, Ho, Wo}), {}};
    res.argmax.resize(N * C * Ho * Wo);
    std::size_t t = 0;
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const std::size_t plane = (n * C + c) * H * W;
            for (std::size_t i = 0; i < Ho; ++i) {
                for (std::size_t j = 0; j < Wo; ++j) {
                    std::size_t best = plane + (2 * i) * W + 2 * j;
                    double bestv = x4[best];
                    const std::size_t cand[3] = {plane + (2 * i) * W + 2 * j + 1,
                                                 plane + (2 * i + 1) * W + 2 * j,
                                                 plane + (2 * i + 1) * W + 2 * j + 1};
                    for (std::size_t idx : cand) {
                        if (x4[idx] > bestv) {  // strict: ties keep the earliest position
                            bestv = x4[idx];
                            best = idx;
                        }
                    }
                    res.out[t] = bestv;
                    res.argmax[t] = best;
                    ++t;
                }
            }
        }
    }
    if (was_3d) res.out = drop_batch_dim(std::move(res.out));
    return res;
}

Tensor maxpool_backward(const std::vector<std::size_t>& argmax, const Tensor& grad_out,
                        const std::vector<std::size_t>& input_shape) {
    if (grad_out.size() != argmax.size()) {
        throw ShapeError("maxpool_backward: grad_out " + grad_out.shape_str() +
                         " does not match recorded argmax count " +
                         std::to_string(argmax.size()));
    }
    Tensor grad_x(input_shape);
    for (std::size_t t = 0; t < argmax.size(); ++t) grad_x[argmax[t]] += grad_out[t];
    return grad_x;
}

// ---------------------------------------------------------------------------
// dropout / flatten

DropoutResult dropout_forward(const Tensor& x, double rate, bool train, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout rate must be in [0,1)");
    if (!train || rate == 0.0) {
        return DropoutResult{x, Tensor::full(x.shape(), 1.0)};
    }
    const double keep_scale = 1.0 / (1.0 - rate);
    DropoutResult res{Tensor(x.shape()), Tensor(x.shape())};
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double m = rng.next_double() < rate ? 0.0 : keep_scale;
        res.mask[i] = m;
        res.out[i] = x[i] * m;
    }
    return res;
}

Tensor flatten(const Tensor& x) { return x.reshape({x.size()}); }

Tensor unflatten(const Tensor& v, const std::vector<std::size_t>& shape) {
    return v.reshape(shape);
}

// ---------------------------------------------------------------------------
// layer classes

static double xavier_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Conv2dLayer::Conv2dLayer(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k,
                         Rng& rng)
    : Layer(std::move(name)) {
    const double lim = xavier_limit(in_ch * k * k, out_ch * k * k);
    kernels = rand_uniform(rng, {out_ch, in_ch, k, k}, -lim, lim);
    biases = Tensor({out_ch});
    grad_kernels = Tensor(kernels.shape());
    grad_biases = Tensor(biases.shape());
}

Tensor Conv2dLayer::forward(const Tensor& x, bool, Rng&) {
    cached_x_ = x;
    return conv2d_forward(kernels, biases, x);
}

Tensor Conv2dLayer::backward(const Tensor& grad_out) {
    ConvGrads g = conv2d_backward(kernels, biases, cached_x_, grad_out);
    grad_kernels = std::move(g.grad_kernels);
    grad_biases = std::move(g.grad_biases);
    return std::move(g.grad_x);
}

std::vector<std::pair<std::string, Tensor*>> Conv2dLayer::param_list() {
    return {{"kernels", &kernels}, {"biases", &biases}};
}

std::vector<Tensor*> Conv2dLayer::grad_list() { return {&grad_kernels, &grad_biases}; }

Tensor ActivationLayer::forward(const Tensor& x, bool, Rng&) {
    cached_x_ = x;
    return activation_apply(x, kind_);
}

Tensor ActivationLayer::backward(const Tensor& grad_out) {
    return activation_grad(cached_x_, kind_, grad_out);
}

Tensor MaxPoolLayer::forward(const Tensor& x, bool, Rng&) {
    in_shape_ = x.shape();
    PoolResult res = maxpool_forward(x);
    argmax_ = std::move(res.argmax);
    return std::move(res.out);
}

Tensor MaxPoolLayer::backward(const Tensor& grad_out) {
    return maxpool_backward(argmax_, grad_out, in_shape_);
}

Tensor EvenCropLayer::forward(const Tensor& x, bool, Rng&) {
    bool was_3d = false;
    const Tensor x4 = lift_to_4d(x, &was_3d);
    in_shape_ = x.shape();
    const std::size_t H = x4.dim(2), W = x4.dim(3);
    const std::size_t th = H - (H % 2), tw = W - (W % 2);
    if (th == H && tw == W) return x;
    Tensor out({x4.dim(0), x4.dim(1), th, tw});
    for (std::size_t n = 0; n < x4.dim(0); ++n)
        for (std::size_t c = 0; c < x4.dim(1); ++c)
            for (std::size_t i = 0; i < th; ++i)
                for (std::size_t j = 0; j < tw; ++j) out.at(n, c, i, j) = x4.at(n, c, i, j);
    return was_3d ? drop_batch_dim(std::move(out)) : out;
}

Tensor EvenCropLayer::backward(const Tensor& grad_out) {
    bool was_3d = false;
    const Tensor g4 = lift_to_4d(grad_out, &was_3d);
    std::vector<std::size_t> full = in_shape_;
    if (full.size() == 3) full.insert(full.begin(), 1);
    if (g4.dim(2) == full[2] && g4.dim(3) == full[3]) return grad_out;
    Tensor grad_x(full);
    for (std::size_t n = 0; n < g4.dim(0); ++n)
        for (std::size_t c = 0; c < g4.dim(1); ++c)
            for (std::size_t i = 0; i < g4.dim(2); ++i)
                for (std::size_t j = 0; j < g4.dim(3); ++j)
                    grad_x.at(n, c, i, j) = g4.at(n, c, i, j);
    return grad_x.reshape(in_shape_);
}

Tensor FlattenLayer::forward(const Tensor& x, bool, Rng&) {
    in_shape_ = x.shape();
    if (x.ndim() == 4) {
        return x.reshape({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
    }
    return x.reshape({x.size()});
}

Tensor FlattenLayer::backward(const Tensor& grad_out) { return grad_out.reshape(in_shape_); }

DenseLayer::DenseLayer(std::string name, std::size_t in, std::size_t out, Activation act,
                       Rng& rng)
    : Layer(std::move(name)), activation(act) {
    const double lim = xavier_limit(in, out);
    weights = rand_uniform(rng, {out, in}, -lim, lim);
    bias = Tensor({out});
    grad_weights = Tensor(weights.shape());
    grad_bias = Tensor(bias.shape());
}

Tensor DenseLayer::forward(const Tensor& x, bool, Rng&) {
    input_was_1d_ = x.ndim() == 1;
    Tensor x2 = input_was_1d_ ? x.reshape({1, x.size()}) : x;
    if (x2.ndim() != 2 || x2.dim(1) != weights.dim(1)) {
        throw ShapeError("dense input " + x.shape_str() + " does not match weights " +
                         weights.shape_str());
    }
    cached_x_ = x2;
    Tensor pre = matmul(x2, transpose(weights));
    for (std::size_t n = 0; n < pre.dim(0); ++n)
        for (std::size_t o = 0; o < pre.dim(1); ++o) pre.at(n, o) += bias[o];
    cached_pre_ = pre;
    Tensor out = activation_apply(pre, activation);
    return input_was_1d_ ? out.reshape({out.size()}) : out;
}

Tensor DenseLayer::backward(const Tensor& grad_out) {
    Tensor g2 = grad_out.ndim() == 1 ? grad_out.reshape({1, grad_out.size()}) : grad_out;
    if (!g2.same_shape(cached_pre_)) {
        throw ShapeError("dense grad_out " + grad_out.shape_str() + " does not match output " +
                         cached_pre_.shape_str());
    }
    Tensor g_pre = activation_grad(cached_pre_, activation, g2);
    grad_weights = matmul(transpose(g_pre), cached_x_);
    grad_bias.fill(0.0);
    for (std::size_t n = 0; n < g_pre.dim(0); ++n)
        for (std::size_t o = 0; o < g_pre.dim(1); ++o) grad_bias[o] += g_pre.at(n, o);
    Tensor grad_x = matmul(g_pre, weights);
    return input_was_1d_ ? grad_x.reshape({grad_x.size()}) : grad_x;
}

std::vector<std::pair<std::string, Tensor*>> DenseLayer::param_list() {
    return {{"weights", &weights}, {"bias", &bias}};
}

std::vector<Tensor*> DenseLayer::grad_list() { return {&grad_weights, &grad_bias}; }

DropoutLayer::DropoutLayer(std::string name, double rate_) : Layer(std::move(name)), rate(rate_) {
    if (rate < 0.0 || rate >= 1.0) throw ValueError("dropout rate must be in [0,1)");
}

Tensor DropoutLayer::forward(const Tensor& x, bool train, Rng& rng) {
    DropoutResult res = dropout_forward(x, rate, train, rng);
    mask_ = std::move(res.mask);
    return std::move(res.out);
}

Tensor DropoutLayer::backward(const Tensor& grad_out) {
    if (!grad_out.same_shape(mask_)) {
        throw ShapeError("dropout grad_out " + grad_out.shape_str() + " does not match mask " +
                         mask_.shape_str());
    }
    Tensor grad_x(grad_out.shape());
    for (std::size_t i = 0; i < grad_x.size(); ++i) grad_x[i] = grad_out[i] * mask_[i];
    return grad_x;
}

// ---------------------------------------------------------------------------
// batch norm

BatchNormLayer::BatchNormLayer(std::string name, std::size_t features, double eps_,
                               double momentum_)
    : Layer(std::move(name)), eps(eps_), momentum(momentum_) {
    gamma = Tensor::full({features}, 1.0);
    beta = Tensor({features});
    running_mean = Tensor({features});
    running_var = Tensor::full({features}, 1.0);
    grad_gamma = Tensor({features});
    grad_beta = Tensor({features});
}

namespace {

// Feature index and group geometry shared by the 2D and 4D batch norm paths:
// for [N,F] feature f covers column f, for [N,C,H,W] it covers channel c.
struct BnView {
    std::size_t features;
    std::size_t groups;   // N for 2D, N for 4D (outer repeats)
    std::size_t spatial;  // 1 for 2D, H*W for 4D

    std::size_t index(std::size_t g, std::size_t f, std::size_t s) const {
        return (g * features + f) * spatial + s;
    }
};

BnView bn_view(const std::vector<std::size_t>& shape, std::size_t features) {
    if (shape.size() == 2) {
        if (shape[1] != features) {
            throw ShapeError("batchnorm expects " + std::to_string(features) + " features");
        }
        return BnView{features, shape[0], 1};
    }
    if (shape.size() == 4) {
        if (shape[1] != features) {
            throw ShapeError("batchnorm expects " + std::to_string(features) + " channels");
        }
        return BnView{features, shape[0], shape[2] * shape[3]};
    }
    throw ShapeError("batchnorm input must be [N,F] or [N,C,H,W]");
}

}  // namespace

Tensor BatchNormLayer::forward(const Tensor& x, bool train, Rng&) {
    const BnView v = bn_view(x.shape(), gamma.size());
    in_shape_ = x.shape();
    train_mode_ = train;
    group_size_ = v.groups * v.spatial;
    inv_std_.assign(v.features, 0.0);
    x_hat_ = Tensor(x.shape());
    Tensor out(x.shape());

    if (train) {
        if (v.groups < 2) throw ValueError("batchnorm train mode needs batch size >= 2");
        for (std::size_t f = 0; f < v.features; ++f) {
            double mean = 0.0;
            for (std::size_t g = 0; g < v.groups; ++g)
                for (std::size_t s = 0; s < v.spatial; ++s) mean += x[v.index(g, f, s)];
            mean /= static_cast<double>(group_size_);
            double var = 0.0;
            for (std::size_t g = 0; g < v.groups; ++g)
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    const double d = x[v.index(g, f, s)] - mean;
                    var += d * d;
                }
            var /= static_cast<double>(group_size_);  // biased, same as the running estimate
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std_[f] = is;
            for (std::size_t g = 0; g < v.groups; ++g)
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    const std::size_t idx = v.index(g, f, s);
                    x_hat_[idx] = (x[idx] - mean) * is;
                    out[idx] = gamma[f] * x_hat_[idx] + beta[f];
                }
            running_mean[f] = (1.0 - momentum) * running_mean[f] + momentum * mean;
            running_var[f] = (1.0 - momentum) * running_var[f] + momentum * var;
        }
    } else {
        for (std::size_t f = 0; f < v.features; ++f) {
            const double is = 1.0 / std::sqrt(running_var[f] + eps);
            inv_std_[f] = is;
            for (std::size_t g = 0; g < v.groups; ++g)
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    const std::size_t idx = v.index(g, f, s);
                    x_hat_[idx] = (x[idx] - running_mean[f]) * is;
                    out[idx] = gamma[f] * x_hat_[idx] + beta[f];
                }
        }
    }
    return out;
}

Tensor BatchNormLayer::backward(const Tensor& grad_out) {
    if (grad_out.shape() != in_shape_) {
        throw ShapeError("batchnorm grad_out " + grad_out.shape_str() +
                         " does not match forward input");
    }
    const BnView v = bn_view(in_shape_, gamma.size());
    Tensor grad_x(in_shape_);
    grad_gamma.fill(0.0);
    grad_beta.fill(0.0);

    const double m = static_cast<double>(group_size_);
    for (std::size_t f = 0; f < v.features; ++f) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t g = 0; g < v.groups; ++g)
            for (std::size_t s = 0; s < v.spatial; ++s) {
                const std::size_t idx = v.index(g, f, s);
                sum_g += grad_out[idx];
                sum_gx += grad_out[idx] * x_hat_[idx];
            }
        grad_gamma[f] += sum_gx;
        grad_beta[f] += sum_g;
        if (train_mode_) {
            // d/dx of the batch statistics folded into the compact form:
            // dx = gamma*inv_std/m * (m*dy - sum(dy) - x_hat*sum(dy*x_hat))
            const double scale = gamma[f] * inv_std_[f] / m;
            for (std::size_t g = 0; g < v.groups; ++g)
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    const std::size_t idx = v.index(g, f, s);
                    grad_x[idx] =
                        scale * (m * grad_out[idx] - sum_g - x_hat_[idx] * sum_gx);
                }
        } else {
            const double scale = gamma[f] * inv_std_[f];
            for (std::size_t g = 0; g < v.groups; ++g)
                for (std::size_t s = 0; s < v.spatial; ++s) {
                    const std::size_t idx = v.index(g, f, s);
                    grad_x[idx] = scale * grad_out[idx];
                }
        }
    }
    return grad_x;
}

std::vector<std::pair<std::string, Tensor*>> BatchNormLayer::param_list() {
    return {{"gamma", &gamma}, {"beta", &beta}};
}

std::vector<Tensor*> BatchNormLayer::grad_list() { return {&grad_gamma, &grad_beta}; }

std::vector<std::pair<std::string, Tensor*>> BatchNormLayer::state_list() {
    return {{"running_mean", &running_mean}, {"running_var", &running_var}};
}

// ---------------------------------------------------------------------------
// residual block

Tensor crop_center(const Tensor& x, std::size_t th, std::size_t tw, std::size_t* top,
                   std::size_t* left) {
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (th > H || tw > W) {
        throw ShapeError("crop_center target exceeds input " + x.shape_str());
    }
    const std::size_t t = (H - th) / 2, l = (W - tw) / 2;
    if (top) *top = t;
    if (left) *left = l;
    Tensor out({N, C, th, tw});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < th; ++i)
                for (std::size_t j = 0; j < tw; ++j)
                    out.at(n, c, i, j) = x.at(n, c, i + t, j + l);
    return out;
}

Tensor pad_center(const Tensor& g, const std::vector<std::size_t>& full_shape, std::size_t top,
                  std::size_t left) {
    Tensor out(full_shape);
    for (std::size_t n = 0; n < g.dim(0); ++n)
        for (std::size_t c = 0; c < g.dim(1); ++c)
            for (std::size_t i = 0; i < g.dim(2); ++i)
                for (std::size_t j = 0; j < g.dim(3); ++j)
                    out.at(n, c, i + top, j + left) = g.at(n, c, i, j);
    return out;
}

ResidualBlock::ResidualBlock(std::string name, std::size_t in_ch, std::size_t out_ch,
                             std::size_t k, Rng& rng, double bn_eps, double bn_momentum)
    : Layer(std::move(name)),
      conv1("conv1", in_ch, out_ch, k, rng),
      bn1("bn1", out_ch, bn_eps, bn_momentum),
      conv2("conv2", out_ch, out_ch, k, rng),
      bn2("bn2", out_ch, bn_eps, bn_momentum) {
    if (in_ch != out_ch) {
        projection = std::make_unique<Conv2dLayer>("projection", in_ch, out_ch, 1, rng);
    }
}

Tensor ResidualBlock::forward(const Tensor& x, bool train, Rng& rng) {
    bool was_3d = false;
    const Tensor x4 = lift_to_4d(x, &was_3d);
    in_shape_ = x4.shape();

    Tensor h = conv1.forward(x4, train, rng);
    cached_mid_pre_ = bn1.forward(h, train, rng);
    Tensor t = activation_apply(cached_mid_pre_, Activation::Tanh);
    Tensor inner = bn2.forward(conv2.forward(t, train, rng), train, rng);

    Tensor shortcut = crop_center(x4, inner.dim(2), inner.dim(3), &crop_top_, &crop_left_);
    if (projection) shortcut = projection->forward(shortcut, train, rng);
    if (!shortcut.same_shape(inner)) {
        throw ShapeError("residual branches disagree: " + inner.shape_str() + " vs " +
                         shortcut.shape_str());
    }
    cached_sum_ = add(inner, shortcut);
    Tensor out = activation_apply(cached_sum_, Activation::Tanh);
    return was_3d ? drop_batch_dim(std::move(out)) : out;
}

Tensor ResidualBlock::backward(const Tensor& grad_out) {
    bool was_3d = false;
    const Tensor g4 = lift_to_4d(grad_out, &was_3d);
    Tensor d_sum = activation_grad(cached_sum_, Activation::Tanh, g4);

    Tensor d_inner = conv2.backward(bn2.backward(d_sum));
    Tensor d_mid = activation_grad(cached_mid_pre_, Activation::Tanh, d_inner);
    Tensor dx = conv1.backward(bn1.backward(d_mid));

    Tensor d_short = projection ? projection->backward(d_sum) : d_sum;
    Tensor padded = pad_center(d_short, in_shape_, crop_top_, crop_left_);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += padded[i];
    return was_3d ? drop_batch_dim(std::move(dx)) : dx;
}

static void append_prefixed(std::vector<std::pair<std::string, Tensor*>>& dst, Layer& child) {
    for (auto& [n, t] : child.param_list()) dst.emplace_back(child.name() + "." + n, t);
}

std::vector<std::pair<std::string, Tensor*>> ResidualBlock::param_list() {
    std::vector<std::pair<std::string, Tensor*>> out;
    append_prefixed(out, conv1);
    append_prefixed(out, bn1);
    append_prefixed(out, conv2);
    append_prefixed(out, bn2);
    if (projection) append_prefixed(out, *projection);
    return out;
}

std::vector<Tensor*> ResidualBlock::grad_list() {
    std::vector<Tensor*> out;
    for (Tensor* t : conv1.grad_list()) out.push_back(t);
    for (Tensor* t : bn1.grad_list()) out.push_back(t);
    for (Tensor* t : conv2.grad_list()) out.push_back(t);
    for (Tensor* t : bn2.grad_list()) out.push_back(t);
    if (projection)
        for (Tensor* t : projection->grad_list()) out.push_back(t);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> ResidualBlock::state_list() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& [n, t] : bn1.state_list()) out.emplace_back(bn1.name() + "." + n, t);
    for (auto& [n, t] : bn2.state_list()) out.emplace_back(bn2.name() + "." + n, t);
    return out;
}

}  // namespace xray
