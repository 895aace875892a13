#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "xray/tensor.hpp"

namespace xray {

enum class Activation { None, Relu, Tanh, Sigmoid };

Activation parse_activation(const std::string& s);

/// Elementwise relu / tanh / sigmoid. None is the identity.
Tensor activation_apply(const Tensor& x, Activation kind);

/// Chain rule through the activation at pre-activation x.
/// relu subgradient at 0 is 0.
Tensor activation_grad(const Tensor& x, Activation kind, const Tensor& grad_out);

/// Stable softmax over a vector: exponents are shifted by max(z).
Tensor softmax(const Tensor& z);

// ---------------------------------------------------------------------------
// Stateless functional forms. x may be [C,H,W] or batched [N,C,H,W]; the
// gradient tensor shapes mirror the forward arguments.

struct ConvGrads {
    Tensor grad_x;
    Tensor grad_kernels;
    Tensor grad_biases;
};

/// Valid-padding stride-1 cross-correlation:
/// out[o][i][j] = bias[o] + sum_{c,a,b} kernels[o][c][a][b] * x[c][i+a][j+b]
Tensor conv2d_forward(const Tensor& kernels, const Tensor& biases, const Tensor& x);
ConvGrads conv2d_backward(const Tensor& kernels, const Tensor& biases, const Tensor& x,
                          const Tensor& grad_out);

struct PoolResult {
    Tensor out;
    std::vector<std::size_t> argmax;  // flat input index of each window winner
};

/// 2x2 stride-2 max pooling. H and W must be even; ties go to the first
/// (row-major) position so the backward route is deterministic.
PoolResult maxpool_forward(const Tensor& x);
Tensor maxpool_backward(const std::vector<std::size_t>& argmax, const Tensor& grad_out,
                        const std::vector<std::size_t>& input_shape);

struct DropoutResult {
    Tensor out;
    Tensor mask;  // per-element multiplier: 0 or 1/(1-rate); all ones in eval
};

/// Inverted dropout: train mode zeroes with probability `rate` and scales
/// survivors by 1/(1-rate); eval mode is the exact identity.
DropoutResult dropout_forward(const Tensor& x, double rate, bool train, Rng& rng);

/// Row-major linearization [c,h,w] -> [c*h*w].
Tensor flatten(const Tensor& x);
Tensor unflatten(const Tensor& v, const std::vector<std::size_t>& shape);

// ---------------------------------------------------------------------------
// Stateful layers composed into a model. forward caches whatever the matching
// backward needs; backward overwrites the layer's gradient buffers and returns
// the gradient w.r.t. its input. Parameters are updated in place by the
// optimizer between steps.

class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual std::string type() const = 0;

    virtual Tensor forward(const Tensor& x, bool train, Rng& rng) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;

    /// Trainable parameters with names local to the layer, and the matching
    /// gradient buffers in the same order.
    virtual std::vector<std::pair<std::string, Tensor*>> param_list() { return {}; }
    virtual std::vector<Tensor*> grad_list() { return {}; }

    /// Non-trainable tensors that still belong in a checkpoint (running stats).
    virtual std::vector<std::pair<std::string, Tensor*>> state_list() { return {}; }

private:
    std::string name_;
};

class Conv2dLayer : public Layer {
public:
    Conv2dLayer(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k, Rng& rng);

    std::string type() const override { return "conv2d"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::pair<std::string, Tensor*>> param_list() override;
    std::vector<Tensor*> grad_list() override;

    std::size_t kernel_size() const { return kernels.dim(2); }

    Tensor kernels;  // [out_ch, in_ch, k, k]
    Tensor biases;   // [out_ch]
    Tensor grad_kernels;
    Tensor grad_biases;

private:
    Tensor cached_x_;
};

class ActivationLayer : public Layer {
public:
    ActivationLayer(std::string name, Activation kind) : Layer(std::move(name)), kind_(kind) {}

    std::string type() const override { return "activation"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;

    Activation kind() const { return kind_; }

private:
    Activation kind_;
    Tensor cached_x_;
};

class MaxPoolLayer : public Layer {
public:
    explicit MaxPoolLayer(std::string name) : Layer(std::move(name)) {}

    std::string type() const override { return "maxpool"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<std::size_t> argmax_;
    std::vector<std::size_t> in_shape_;
};

/// Drops the last row/column when a spatial dimension is odd, so the 2x2 pool
/// downstream always sees even sizes. Identity on even inputs.
class EvenCropLayer : public Layer {
public:
    explicit EvenCropLayer(std::string name) : Layer(std::move(name)) {}

    std::string type() const override { return "even_crop"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<std::size_t> in_shape_;
};

class FlattenLayer : public Layer {
public:
    explicit FlattenLayer(std::string name) : Layer(std::move(name)) {}

    std::string type() const override { return "flatten"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;

private:
    std::vector<std::size_t> in_shape_;
};

class DenseLayer : public Layer {
public:
    DenseLayer(std::string name, std::size_t in, std::size_t out, Activation act, Rng& rng);

    std::string type() const override { return "dense"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::pair<std::string, Tensor*>> param_list() override;
    std::vector<Tensor*> grad_list() override;

    Tensor weights;  // [out, in]
    Tensor bias;     // [out]
    Tensor grad_weights;
    Tensor grad_bias;
    Activation activation;

private:
    Tensor cached_x_;    // [N, in]
    Tensor cached_pre_;  // [N, out], pre-activation
    bool input_was_1d_ = false;
};

class DropoutLayer : public Layer {
public:
    DropoutLayer(std::string name, double rate);

    std::string type() const override { return "dropout"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;

    double rate;

private:
    Tensor mask_;
};

/// Per-feature standardization over the batch (2D input) or per channel over
/// batch and spatial positions (4D input), with learned scale/shift and
/// running statistics for eval mode.
class BatchNormLayer : public Layer {
public:
    BatchNormLayer(std::string name, std::size_t features, double eps = 1e-5,
                   double momentum = 0.1);

    std::string type() const override { return "batchnorm"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::pair<std::string, Tensor*>> param_list() override;
    std::vector<Tensor*> grad_list() override;
    std::vector<std::pair<std::string, Tensor*>> state_list() override;

    Tensor gamma;
    Tensor beta;
    Tensor running_mean;
    Tensor running_var;
    Tensor grad_gamma;
    Tensor grad_beta;
    double eps;
    double momentum;

private:
    // forward cache
    bool train_mode_ = false;
    std::vector<std::size_t> in_shape_;
    Tensor x_hat_;
    std::vector<double> inv_std_;  // per feature
    std::size_t group_size_ = 0;   // elements averaged per feature
};

/// Two valid convolutions with batch norm, plus a shortcut that re-aligns the
/// identity branch: a centered spatial crop (valid convs shrink the map) and a
/// 1x1 projection when channel counts differ. Output is tanh(inner + shortcut).
class ResidualBlock : public Layer {
public:
    ResidualBlock(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t k,
                  Rng& rng, double bn_eps = 1e-5, double bn_momentum = 0.1);

    std::string type() const override { return "residual"; }
    Tensor forward(const Tensor& x, bool train, Rng& rng) override;
    Tensor backward(const Tensor& grad_out) override;
    std::vector<std::pair<std::string, Tensor*>> param_list() override;
    std::vector<Tensor*> grad_list() override;
    std::vector<std::pair<std::string, Tensor*>> state_list() override;

    Conv2dLayer conv1;
    BatchNormLayer bn1;
    Conv2dLayer conv2;
    BatchNormLayer bn2;
    std::unique_ptr<Conv2dLayer> projection;  // 1x1, only when in_ch != out_ch

private:
    Tensor cached_mid_pre_;  // bn1 output (tanh input inside the block)
    Tensor cached_sum_;      // inner + shortcut, input of the final tanh
    std::vector<std::size_t> in_shape_;
    std::size_t crop_top_ = 0, crop_left_ = 0;
};

/// Centered spatial crop of a [N,C,H,W] tensor to [N,C,th,tw]; offsets are
/// floor((H-th)/2), floor((W-tw)/2). pad_center is its adjoint.
Tensor crop_center(const Tensor& x, std::size_t th, std::size_t tw, std::size_t* top = nullptr,
                   std::size_t* left = nullptr);
Tensor pad_center(const Tensor& g, const std::vector<std::size_t>& full_shape, std::size_t top,
                  std::size_t left);

}  // namespace xray
