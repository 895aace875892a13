#pragma once

#include <string>

#include "xray/config.hpp"
#include "xray/model.hpp"

namespace xray {

inline constexpr char kCheckpointMagic[6] = {'X', 'R', 'N', 'E', 'T', '1'};

/// Binary checkpoint: magic, config echo, architecture tag, a descriptor per
/// tensor (name + shape) and a little-endian float64 payload. Saving a loaded
/// checkpoint reproduces the file byte for byte.
void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg,
                     const ChannelAverages* averages = nullptr);

struct LoadedCheckpoint {
    TrainConfig config;
    bool has_averages = false;
    ChannelAverages averages;
    Model model;
};

/// Rebuilds the architecture from the embedded config and restores every
/// parameter and running-statistics tensor. Descriptor mismatches against the
/// rebuilt architecture raise ShapeError.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace xray
