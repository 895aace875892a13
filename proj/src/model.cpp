#include "xray/model.hpp"

namespace xray {

Tensor Model::forward(const Tensor& x, bool train, Rng& rng) {
    Tensor cur = x;
    for (auto& layer : layers) cur = layer->forward(cur, train, rng);
    return cur;
}

Tensor Model::backward(const Tensor& grad_out) {
    Tensor cur = grad_out;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& layer : layers)
        for (auto& [n, t] : layer->param_list()) out.emplace_back(layer->name() + "." + n, t);
    return out;
}

std::vector<Tensor*> Model::param_tensors() {
    std::vector<Tensor*> out;
    for (auto& layer : layers)
        for (auto& [n, t] : layer->param_list()) out.push_back(t);
    return out;
}

std::vector<Tensor*> Model::grad_tensors() {
    std::vector<Tensor*> out;
    for (auto& layer : layers)
        for (Tensor* t : layer->grad_list()) out.push_back(t);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> Model::named_state() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& layer : layers)
        for (auto& [n, t] : layer->state_list()) out.emplace_back(layer->name() + "." + n, t);
    return out;
}

std::size_t Model::output_width() const {
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        if (auto* d = dynamic_cast<DenseLayer*>(it->get())) return d->weights.dim(0);
    }
    throw ValueError("model has no dense output layer");
}

namespace {

std::size_t after_conv(std::size_t s, std::size_t k, const std::string& where) {
    if (s < k) {
        throw ShapeError("spatial size " + std::to_string(s) + " too small for kernel " +
                         std::to_string(k) + " at " + where);
    }
    return s - k + 1;
}

std::size_t after_pool(std::size_t s, const std::string& where) {
    const std::size_t even = s - (s % 2);
    if (even < 2) {
        throw ShapeError("spatial size " + std::to_string(s) + " too small to pool at " + where);
    }
    return even / 2;
}

}  // namespace

Model build_cnn(int image_size, const ArchParams& p, Rng& rng) {
    if (image_size <= 0) throw ValueError("image_size must be positive");
    std::size_t s = static_cast<std::size_t>(image_size);

    Model m;
    m.arch = "cnn";
    m.layers.push_back(std::make_unique<Conv2dLayer>("conv1", 3, p.conv1_filters, p.k1, rng));
    s = after_conv(s, p.k1, "conv1");
    m.layers.push_back(std::make_unique<ActivationLayer>("relu1", Activation::Relu));
    m.layers.push_back(std::make_unique<EvenCropLayer>("crop1"));
    m.layers.push_back(std::make_unique<MaxPoolLayer>("pool1"));
    s = after_pool(s, "pool1");

    m.layers.push_back(
        std::make_unique<Conv2dLayer>("conv2", p.conv1_filters, p.conv2_filters, p.k2, rng));
    s = after_conv(s, p.k2, "conv2");
    m.layers.push_back(std::make_unique<ActivationLayer>("relu2", Activation::Relu));

    m.layers.push_back(
        std::make_unique<Conv2dLayer>("conv3", p.conv2_filters, p.conv3_filters, p.k3, rng));
    s = after_conv(s, p.k3, "conv3");
    m.layers.push_back(std::make_unique<ActivationLayer>("relu3", Activation::Relu));
    m.layers.push_back(std::make_unique<EvenCropLayer>("crop2"));
    m.layers.push_back(std::make_unique<MaxPoolLayer>("pool2"));
    s = after_pool(s, "pool2");

    m.layers.push_back(std::make_unique<FlattenLayer>("flatten"));
    const std::size_t flat = p.conv3_filters * s * s;
    m.layers.push_back(
        std::make_unique<DenseLayer>("dense1", flat, p.dense_hidden, Activation::Relu, rng));
    m.layers.push_back(std::make_unique<DropoutLayer>("dropout", p.dropout_rate));
    m.layers.push_back(
        std::make_unique<DenseLayer>("dense2", p.dense_hidden, 1, Activation::Sigmoid, rng));
    return m;
}

Model build_resnet(int image_size, const ArchParams& p, Rng& rng) {
    if (image_size <= 0) throw ValueError("image_size must be positive");
    std::size_t s = static_cast<std::size_t>(image_size);

    Model m;
    m.arch = "resnet";
    m.layers.push_back(std::make_unique<Conv2dLayer>("stem", 3, p.stem_filters, 3, rng));
    s = after_conv(s, 3, "stem");
    m.layers.push_back(
        std::make_unique<BatchNormLayer>("stem_bn", p.stem_filters, p.bn_eps, p.bn_momentum));
    m.layers.push_back(std::make_unique<ActivationLayer>("stem_tanh", Activation::Tanh));
    m.layers.push_back(std::make_unique<EvenCropLayer>("crop1"));
    m.layers.push_back(std::make_unique<MaxPoolLayer>("pool1"));
    s = after_pool(s, "pool1");

    m.layers.push_back(std::make_unique<ResidualBlock>("res1", p.stem_filters, p.stem_filters,
                                                       p.block_kernel, rng, p.bn_eps,
                                                       p.bn_momentum));
    s = after_conv(s, p.block_kernel, "res1.conv1");
    s = after_conv(s, p.block_kernel, "res1.conv2");
    m.layers.push_back(std::make_unique<EvenCropLayer>("crop2"));
    m.layers.push_back(std::make_unique<MaxPoolLayer>("pool2"));
    s = after_pool(s, "pool2");

    m.layers.push_back(std::make_unique<Conv2dLayer>("late", p.stem_filters, p.late_filters,
                                                     p.late_kernel, rng));
    s = after_conv(s, p.late_kernel, "late");

    m.layers.push_back(std::make_unique<FlattenLayer>("flatten"));
    const std::size_t flat = p.late_filters * s * s;
    m.layers.push_back(
        std::make_unique<DenseLayer>("dense1", flat, p.dense_hidden, Activation::Tanh, rng));
    m.layers.push_back(std::make_unique<DropoutLayer>("dropout", p.dropout_rate));
    m.layers.push_back(
        std::make_unique<DenseLayer>("dense2", p.dense_hidden, 1, Activation::Sigmoid, rng));
    return m;
}

Model build_model(const std::string& arch, int image_size, const ArchParams& p, Rng& rng) {
    if (arch == "cnn") return build_cnn(image_size, p, rng);
    if (arch == "resnet") return build_resnet(image_size, p, rng);
    throw ValueError("unknown architecture: " + arch);
}

}  // namespace xray
