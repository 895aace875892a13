#pragma once

#include <string>
#include <vector>

#include "xray/image.hpp"
#include "xray/tensor.hpp"

namespace xray {

enum class PreprocessMode { Raw, Expanded, Contrast, ContrastLight };

PreprocessMode parse_preprocess_mode(const std::string& s);
std::string preprocess_mode_name(PreprocessMode mode);

struct PreprocessConfig {
    double alpha = 1.5;              // contrast gain, must be > 0
    double beta = 0.0;               // contrast additive offset
    double brightness_delta = 40.0;  // artificial lighting constant
    double expansion_denom = 128.0;  // per-channel scale is channel_mean / denom
};

/// Mean R, G, B over every pixel of a corpus; drives color-scheme expansion.
struct ChannelAverages {
    double r_mean = 0.0;
    double g_mean = 0.0;
    double b_mean = 0.0;
};

// All transforms are pure: a fresh image is returned, inputs untouched.
// Out-of-range results are rounded half-away-from-zero and clamped to [0,255].

Image adjust_brightness(const Image& img, double delta);

/// g = alpha * f + beta, per channel value. alpha must be > 0.
Image adjust_contrast(const Image& img, double alpha, double beta);

ChannelAverages compute_channel_averages(const std::vector<Image>& imgs);

/// Per-channel amplification by avg_c / denom. denom must be > 0.
Image expand_color_scheme(const Image& img, const ChannelAverages& avgs, double denom);

/// Applies cfg under the given mode. Order for ContrastLight is fixed:
/// contrast first, then brightness. `avgs` is only consulted in Expanded mode.
Image pipeline_apply(const Image& img, const PreprocessConfig& cfg, PreprocessMode mode,
                     const ChannelAverages& avgs = ChannelAverages{});

/// Nearest-neighbor resize to target x target, scaled to [0,1], channels-first
/// [3 x target x target]. Source index for output i is (i * src_dim) / target.
Tensor to_tensor(const Image& img, int target_size);

}  // namespace xray
