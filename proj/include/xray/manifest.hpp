#pragma once

#include <string>
#include <vector>

#include "xray/preprocess.hpp"
#include "xray/train.hpp"

namespace xray {

struct ManifestRow {
    std::string path;  // relative to the manifest's directory
    int label;         // 0 or 1
};

/// Reads a `path,label` CSV. Header required; labels restricted to 0/1.
std::vector<ManifestRow> read_manifest(const std::string& path);

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);

/// Decodes every referenced image, applies the preprocessing mode, and resizes
/// into network tensors. For Expanded mode the channel averages come from
/// `fixed_avgs` when given (e.g. the ones recorded in a checkpoint), otherwise
/// they are computed over the images in this manifest; either way the values
/// used are reported through `used_avgs`.
Dataset load_dataset(const std::string& manifest_path, PreprocessMode mode,
                     const PreprocessConfig& pcfg, int image_size,
                     const ChannelAverages* fixed_avgs = nullptr,
                     ChannelAverages* used_avgs = nullptr);

/// Directory of a path, "" when the path has no separator.
std::string parent_dir(const std::string& path);

}  // namespace xray
