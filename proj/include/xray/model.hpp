#pragma once

#include <memory>
#include <string>
#include <vector>

#include "xray/layers.hpp"

namespace xray {

/// Ordered stack of layers plus the architecture tag it was built from.
/// Parameters are exclusively owned; one training context drives the stack.
struct Model {
    std::string arch;
    std::vector<std::unique_ptr<Layer>> layers;

    Tensor forward(const Tensor& x, bool train, Rng& rng);
    /// Walks the stack in reverse; each layer refreshes its gradient buffers.
    Tensor backward(const Tensor& grad_out);

    std::vector<std::pair<std::string, Tensor*>> named_params();
    std::vector<Tensor*> param_tensors();
    std::vector<Tensor*> grad_tensors();
    std::vector<std::pair<std::string, Tensor*>> named_state();

    std::size_t output_width() const;  // per-sample outputs: 1 (sigmoid) or 2 (softmax logits)
};

/// Channel widths and kernel sizes; kernel size defaults follow the 3/3/4
/// convolution plan, widths 16/32/64.
struct ArchParams {
    std::size_t conv1_filters = 16;
    std::size_t conv2_filters = 32;
    std::size_t conv3_filters = 64;
    std::size_t k1 = 3, k2 = 3, k3 = 4;

    std::size_t stem_filters = 16;  // resnet stem (k=3)
    std::size_t block_kernel = 3;   // resnet residual block convs
    std::size_t late_filters = 32;  // resnet tail conv (k=4)
    std::size_t late_kernel = 4;

    std::size_t dense_hidden = 64;
    double dropout_rate = 0.4;
    double bn_eps = 1e-5;
    double bn_momentum = 0.1;
};

/// conv(3) relu pool, conv(3) relu, conv(4) relu pool, flatten,
/// dense(hidden, relu), dropout, dense(1, sigmoid).
Model build_cnn(int image_size, const ArchParams& p, Rng& rng);

/// conv(3), batchnorm, tanh, pool, residual block, pool, conv(4), flatten,
/// dense(hidden, tanh), dropout, dense(1, sigmoid). One residual block.
Model build_resnet(int image_size, const ArchParams& p, Rng& rng);

/// arch is "cnn" or "resnet".
Model build_model(const std::string& arch, int image_size, const ArchParams& p, Rng& rng);

}  // namespace xray
