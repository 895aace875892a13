#include "xray/preprocess.hpp"

#include <cmath>

namespace xray {

PreprocessMode parse_preprocess_mode(const std::string& s) {
    if (s == "raw") return PreprocessMode::Raw;
    if (s == "expanded") return PreprocessMode::Expanded;
    if (s == "contrast") return PreprocessMode::Contrast;
    if (s == "contrast-light" || s == "contrast+light") return PreprocessMode::ContrastLight;
    throw ValueError("unknown preprocess mode: " + s);
}

std::string preprocess_mode_name(PreprocessMode mode) {
    switch (mode) {
        case PreprocessMode::Raw: return "raw";
        case PreprocessMode::Expanded: return "expanded";
        case PreprocessMode::Contrast: return "contrast";
        case PreprocessMode::ContrastLight: return "contrast-light";
    }
    return "raw";
}

static std::uint8_t clamp_channel(double v) {
    double r = std::round(v);  // half away from zero
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

Image adjust_brightness(const Image& img, double delta) {
    Image out = img;
    for (auto& p : out.pixels) p = clamp_channel(static_cast<double>(p) + delta);
    return out;
}

Image adjust_contrast(const Image& img, double alpha, double beta) {
    if (!(alpha > 0.0)) throw ValueError("adjust_contrast: alpha must be > 0");
    Image out = img;
    for (auto& p : out.pixels) p = clamp_channel(alpha * static_cast<double>(p) + beta);
    return out;
}

ChannelAverages compute_channel_averages(const std::vector<Image>& imgs) {
    if (imgs.empty()) throw ValueError("compute_channel_averages: empty image sequence");
    double sum[3] = {0.0, 0.0, 0.0};
    std::size_t count = 0;
    for (const Image& img : imgs) {
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            sum[0] += img.pixels[i * 3 + 0];
            sum[1] += img.pixels[i * 3 + 1];
            sum[2] += img.pixels[i * 3 + 2];
        }
        count += img.pixel_count();
    }
    return ChannelAverages{sum[0] / count, sum[1] / count, sum[2] / count};
}

Image expand_color_scheme(const Image& img, const ChannelAverages& avgs, double denom) {
    if (!(denom > 0.0)) throw ValueError("expand_color_scheme: denom must be > 0");
    const double scale[3] = {avgs.r_mean / denom, avgs.g_mean / denom, avgs.b_mean / denom};
    Image out = img;
    for (std::size_t i = 0; i < out.pixel_count(); ++i) {
        for (int c = 0; c < 3; ++c) {
            out.pixels[i * 3 + c] =
                clamp_channel(static_cast<double>(img.pixels[i * 3 + c]) * scale[c]);
        }
    }
    return out;
}

Image pipeline_apply(const Image& img, const PreprocessConfig& cfg, PreprocessMode mode,
                     const ChannelAverages& avgs) {
    switch (mode) {
        case PreprocessMode::Raw:
            return img;
        case PreprocessMode::Expanded:
            return expand_color_scheme(img, avgs, cfg.expansion_denom);
        case PreprocessMode::Contrast:
            return adjust_contrast(img, cfg.alpha, cfg.beta);
        case PreprocessMode::ContrastLight:
            return adjust_brightness(adjust_contrast(img, cfg.alpha, cfg.beta),
                                     cfg.brightness_delta);
    }
    throw ValueError("pipeline_apply: unknown mode");
}

Tensor to_tensor(const Image& img, int target_size) {
    if (target_size <= 0) throw ValueError("to_tensor: target_size must be > 0");
    const std::size_t t = static_cast<std::size_t>(target_size);
    Tensor out({3, t, t});
    for (std::size_t y = 0; y < t; ++y) {
        const int sy = static_cast<int>(y * static_cast<std::size_t>(img.height) / t);
        for (std::size_t x = 0; x < t; ++x) {
            const int sx = static_cast<int>(x * static_cast<std::size_t>(img.width) / t);
            for (std::size_t c = 0; c < 3; ++c) {
                out.at(c, y, x) = img.at(sx, sy, static_cast<int>(c)) / 255.0;
            }
        }
    }
    return out;
}

}  // namespace xray
