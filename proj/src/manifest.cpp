#include "xray/manifest.hpp"

#include <fstream>
#include <sstream>

#include "xray/image.hpp"

namespace xray {

std::string parent_dir(const std::string& path) {
    const std::size_t pos = path.find_last_of('/');
    return pos == std::string::npos ? std::string() : path.substr(0, pos);
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path);
    std::string line;
    int line_no = 0;
    std::vector<ManifestRow> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "path,label") throw ParseError("manifest header must be 'path,label'", 1);
            continue;
        }
        const std::size_t comma = line.find_last_of(',');
        if (comma == std::string::npos || comma == 0) {
            throw ParseError("manifest row must be 'path,label'", line_no);
        }
        const std::string p = line.substr(0, comma);
        const std::string lab = line.substr(comma + 1);
        if (lab != "0" && lab != "1") {
            throw ParseError("label must be 0 or 1, got '" + lab + "'", line_no);
        }
        rows.push_back(ManifestRow{p, lab == "1" ? 1 : 0});
    }
    return rows;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest " + path);
    out << "path,label\n";
    for (const ManifestRow& r : rows) out << r.path << "," << r.label << "\n";
    if (!out) throw IoError("short write to " + path);
}

Dataset load_dataset(const std::string& manifest_path, PreprocessMode mode,
                     const PreprocessConfig& pcfg, int image_size,
                     const ChannelAverages* fixed_avgs, ChannelAverages* used_avgs) {
    const std::vector<ManifestRow> rows = read_manifest(manifest_path);
    if (rows.empty()) throw ValueError("manifest " + manifest_path + " lists no images");
    const std::string base = parent_dir(manifest_path);

    std::vector<Image> images;
    images.reserve(rows.size());
    for (const ManifestRow& r : rows) {
        const std::string full = base.empty() ? r.path : base + "/" + r.path;
        images.push_back(read_image(full));
    }

    ChannelAverages avgs;
    if (mode == PreprocessMode::Expanded) {
        avgs = fixed_avgs ? *fixed_avgs : compute_channel_averages(images);
    }
    if (used_avgs) *used_avgs = avgs;

    Dataset set;
    set.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Image processed = pipeline_apply(images[i], pcfg, mode, avgs);
        set.push_back(Sample{to_tensor(processed, image_size), rows[i].label});
    }
    return set;
}

}  // namespace xray
