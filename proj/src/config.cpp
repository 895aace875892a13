#include "xray/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace xray {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, int line) {
    double out = 0.0;
    const char* begin = v.data();
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
        throw ParseError("expected a finite number, got '" + v + "'", line);
    }
    return out;
}

long parse_long(const std::string& v, int line) {
    long out = 0;
    const char* begin = v.data();
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("expected an integer, got '" + v + "'", line);
    }
    return out;
}

std::uint64_t parse_u64(const std::string& v, int line) {
    std::uint64_t out = 0;
    const char* begin = v.data();
    const char* end = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    if (ec != std::errc() || ptr != end) {
        throw ParseError("expected an unsigned integer, got '" + v + "'", line);
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty()) throw ParseError("expected 'key = value'", line_no);

        if (key == "arch") {
            if (val != "cnn" && val != "resnet") {
                throw ParseError("arch must be cnn or resnet, got '" + val + "'", line_no);
            }
            cfg.arch = val;
        } else if (key == "epochs") {
            const long v = parse_long(val, line_no);
            if (v <= 0) throw ParseError("epochs must be positive", line_no);
            cfg.epochs = static_cast<int>(v);
        } else if (key == "batch_size") {
            const long v = parse_long(val, line_no);
            if (v <= 0) throw ParseError("batch_size must be positive", line_no);
            cfg.batch_size = static_cast<int>(v);
        } else if (key == "learning_rate") {
            const double v = parse_double(val, line_no);
            if (!(v > 0.0)) throw ParseError("learning_rate must be > 0", line_no);
            cfg.learning_rate = v;
        } else if (key == "dropout_rate") {
            const double v = parse_double(val, line_no);
            if (v < 0.0 || v >= 1.0) throw ParseError("dropout_rate must be in [0,1)", line_no);
            cfg.dropout_rate = v;
        } else if (key == "preprocess_mode") {
            try {
                cfg.preprocess_mode = parse_preprocess_mode(val);
            } catch (const ValueError& e) {
                throw ParseError(e.what(), line_no);
            }
        } else if (key == "image_size") {
            const long v = parse_long(val, line_no);
            if (v <= 0) throw ParseError("image_size must be positive", line_no);
            cfg.image_size = static_cast<int>(v);
        } else if (key == "seed") {
            cfg.seed = parse_u64(val, line_no);
        } else if (key == "threshold") {
            const double v = parse_double(val, line_no);
            if (v < 0.0 || v > 1.0) throw ParseError("threshold must be in [0,1]", line_no);
            cfg.threshold = v;
        } else if (key == "alpha") {
            const double v = parse_double(val, line_no);
            if (!(v > 0.0)) throw ParseError("alpha must be > 0", line_no);
            cfg.preprocess.alpha = v;
        } else if (key == "beta") {
            cfg.preprocess.beta = parse_double(val, line_no);
        } else if (key == "brightness_delta") {
            cfg.preprocess.brightness_delta = parse_double(val, line_no);
        } else if (key == "expansion_denom") {
            const double v = parse_double(val, line_no);
            if (!(v > 0.0)) throw ParseError("expansion_denom must be > 0", line_no);
            cfg.preprocess.expansion_denom = v;
        } else {
            throw ParseError("unknown key '" + key + "'", line_no);
        }
    }
    return cfg;
}

TrainConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string serialize_config(const TrainConfig& cfg) {
    std::ostringstream os;
    os << "arch = " << cfg.arch << "\n";
    os << "epochs = " << cfg.epochs << "\n";
    os << "batch_size = " << cfg.batch_size << "\n";
    os << "learning_rate = " << format_double(cfg.learning_rate) << "\n";
    os << "dropout_rate = " << format_double(cfg.dropout_rate) << "\n";
    os << "preprocess_mode = " << preprocess_mode_name(cfg.preprocess_mode) << "\n";
    os << "image_size = " << cfg.image_size << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "threshold = " << format_double(cfg.threshold) << "\n";
    os << "alpha = " << format_double(cfg.preprocess.alpha) << "\n";
    os << "beta = " << format_double(cfg.preprocess.beta) << "\n";
    os << "brightness_delta = " << format_double(cfg.preprocess.brightness_delta) << "\n";
    os << "expansion_denom = " << format_double(cfg.preprocess.expansion_denom) << "\n";
    return os.str();
}

}  // namespace xray
