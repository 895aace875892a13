#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xray/image.hpp"
#include "xray/manifest.hpp"

namespace xray {

/// Two-class synthetic corpus: dark gradient fields, with bright soft-edged
/// elliptical blobs added on positive images. Separable enough that a small
/// network trains and verifies in minutes.
struct SyntheticSpec {
    int n_images = 200;
    int image_size = 64;
    double positive_fraction = 0.5;
    int blob_count_min = 1;
    int blob_count_max = 4;
    double blob_intensity_min = 120.0;
    double blob_intensity_max = 200.0;
    double background_min = 10.0;
    double background_max = 60.0;
    double noise_amplitude = 8.0;
    double train_fraction = 0.75;
    std::uint64_t seed = 42;
};

/// Renders one image. Exposed so tests can probe pixel statistics without
/// touching the filesystem. Consumes `rng` sequentially.
Image render_synthetic(const SyntheticSpec& spec, int label, Rng& rng);

struct GeneratedCorpus {
    std::vector<ManifestRow> all;    // img_<i>.ppm in generation order
    std::vector<ManifestRow> train;  // stratified split, train_fraction
    std::vector<ManifestRow> test;
};

/// Writes img_<index>.ppm files plus manifest.csv, manifest_train.csv and
/// manifest_test.csv into out_dir. Byte-deterministic for a given spec.
GeneratedCorpus generate(const SyntheticSpec& spec, const std::string& out_dir);

/// Label assignment and split logic without any file IO (used by generate and
/// directly testable).
std::vector<int> assign_labels(const SyntheticSpec& spec, Rng& rng);

}  // namespace xray
