#include "xray/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace xray {

std::vector<int> assign_labels(const SyntheticSpec& spec, Rng& rng) {
    const int n = spec.n_images;
    if (n < 2) throw ValueError("datagen: n_images must be >= 2");
    if (!(spec.positive_fraction > 0.0 && spec.positive_fraction < 1.0)) {
        throw ValueError("datagen: positive_fraction must be in (0,1)");
    }
    const int n_pos = static_cast<int>(std::llround(n * spec.positive_fraction));
    std::vector<int> labels(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n_pos; ++i) labels[static_cast<std::size_t>(i)] = 1;
    rng.shuffle(labels);
    return labels;
}

namespace {

struct Blob {
    double cx, cy, rx, ry, amplitude;
};

std::uint8_t clamp_value(double v) {
    const double r = std::round(v);
    if (r <= 0.0) return 0;
    if (r >= 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

}  // namespace

Image render_synthetic(const SyntheticSpec& spec, int label, Rng& rng) {
    const int s = spec.image_size;
    if (s < 4) throw ValueError("datagen: image_size must be >= 4");

    // Keep the field inside [background_min, background_max] but with a modest
    // per-image spread, so mean intensity stays informative about the label.
    const double top = rng.uniform(spec.background_min, spec.background_min + 10.0);
    const double span_cap = std::min(25.0, spec.background_max - top);
    const double bottom = top + rng.uniform(5.0, std::max(5.0 + 1e-9, span_cap));

    std::vector<Blob> blobs;
    if (label == 1) {
        const int count =
            spec.blob_count_min +
            static_cast<int>(rng.next_below(
                static_cast<std::uint64_t>(spec.blob_count_max - spec.blob_count_min + 1)));
        for (int b = 0; b < count; ++b) {
            Blob blob{};
            blob.cx = rng.uniform(0.2, 0.8) * s;
            blob.cy = rng.uniform(0.2, 0.8) * s;
            blob.rx = rng.uniform(s / 6.0, s / 3.0);
            blob.ry = rng.uniform(s / 6.0, s / 3.0);
            blob.amplitude = rng.uniform(spec.blob_intensity_min, spec.blob_intensity_max);
            blobs.push_back(blob);
        }
    }

    Image img(s, s);
    for (int y = 0; y < s; ++y) {
        const double base = top + (bottom - top) * y / static_cast<double>(s - 1);
        for (int x = 0; x < s; ++x) {
            double v = base + rng.uniform(-spec.noise_amplitude, spec.noise_amplitude);
            for (const Blob& b : blobs) {
                const double dx = (x - b.cx) / b.rx;
                const double dy = (y - b.cy) / b.ry;
                const double d2 = dx * dx + dy * dy;
                if (d2 < 1.0) v += b.amplitude * (1.0 - d2) * (1.0 - d2);
            }
            const std::uint8_t q = clamp_value(v);
            img.at(x, y, 0) = q;
            img.at(x, y, 1) = q;
            img.at(x, y, 2) = q;
        }
    }
    return img;
}

GeneratedCorpus generate(const SyntheticSpec& spec, const std::string& out_dir) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw ValueError("datagen: train_fraction must be in (0,1)");
    }
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir)) {
        throw IoError("cannot create output directory " + out_dir);
    }

    Rng rng(spec.seed);
    const std::vector<int> labels = assign_labels(spec, rng);

    GeneratedCorpus corpus;
    for (int i = 0; i < spec.n_images; ++i) {
        const Image img = render_synthetic(spec, labels[static_cast<std::size_t>(i)], rng);
        const std::string name = "img_" + std::to_string(i) + ".ppm";
        write_ppm(out_dir + "/" + name, img);
        corpus.all.push_back(ManifestRow{name, labels[static_cast<std::size_t>(i)]});
    }

    // Stratified split: each class contributes train_fraction of its images,
    // membership drawn from the corpus rng, manifests kept in index order.
    std::vector<std::size_t> by_class[2];
    for (std::size_t i = 0; i < corpus.all.size(); ++i) {
        by_class[corpus.all[i].label].push_back(i);
    }
    std::vector<bool> in_train(corpus.all.size(), false);
    for (auto& members : by_class) {
        rng.shuffle(members);
        const std::size_t take = static_cast<std::size_t>(
            std::llround(static_cast<double>(members.size()) * spec.train_fraction));
        for (std::size_t k = 0; k < take; ++k) in_train[members[k]] = true;
    }
    for (std::size_t i = 0; i < corpus.all.size(); ++i) {
        (in_train[i] ? corpus.train : corpus.test).push_back(corpus.all[i]);
    }

    write_manifest(out_dir + "/manifest.csv", corpus.all);
    write_manifest(out_dir + "/manifest_train.csv", corpus.train);
    write_manifest(out_dir + "/manifest_test.csv", corpus.test);
    return corpus;
}

}  // namespace xray
