#include "xray/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace xray {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out += s;
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string& origin;

    void need(std::size_t n) const {
        if (buf.size() - pos < n) throw IoError("truncated checkpoint " + origin);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(
            static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(
            static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d = 0.0;
        std::memcpy(&d, &bits, sizeof(d));
        return d;
    }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

// Serialized tensor walk: all parameters first, then running state, both in
// model order with dotted names.
std::vector<std::pair<std::string, Tensor*>> serialized_tensors(Model& model) {
    auto out = model.named_params();
    for (auto& entry : model.named_state()) out.push_back(entry);
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const TrainConfig& cfg,
                     const ChannelAverages* averages) {
    std::string out;
    out.append(kCheckpointMagic, sizeof(kCheckpointMagic));
    out.push_back(1);  // format version
    out.push_back(averages ? 1 : 0);
    put_f64(out, averages ? averages->r_mean : 0.0);
    put_f64(out, averages ? averages->g_mean : 0.0);
    put_f64(out, averages ? averages->b_mean : 0.0);
    put_str(out, serialize_config(cfg));
    put_str(out, model.arch);

    auto tensors = serialized_tensors(model);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (auto& [name, t] : tensors) {
        put_str(out, name);
        put_u32(out, static_cast<std::uint32_t>(t->ndim()));
        for (std::size_t d : t->shape()) put_u64(out, d);
    }
    for (auto& [name, t] : tensors) {
        for (std::size_t i = 0; i < t->size(); ++i) put_f64(out, (*t)[i]);
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write to " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kCheckpointMagic) ||
        std::memcmp(buf.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
        throw IoError("not a checkpoint file: " + path);
    }
    Reader r{buf, sizeof(kCheckpointMagic), path};
    r.need(2);
    const unsigned char version = static_cast<unsigned char>(buf[r.pos++]);
    if (version != 1) throw IoError("unsupported checkpoint version in " + path);
    const bool has_avgs = buf[r.pos++] != 0;

    LoadedCheckpoint loaded;
    loaded.has_averages = has_avgs;
    loaded.averages.r_mean = r.f64();
    loaded.averages.g_mean = r.f64();
    loaded.averages.b_mean = r.f64();
    loaded.config = parse_config(r.str());
    const std::string arch = r.str();
    if (arch != loaded.config.arch) {
        throw IoError("checkpoint arch tag disagrees with its config in " + path);
    }

    ArchParams arch_params;
    arch_params.dropout_rate = loaded.config.dropout_rate;
    Rng init_rng(loaded.config.seed);
    loaded.model = build_model(arch, loaded.config.image_size, arch_params, init_rng);

    auto tensors = serialized_tensors(loaded.model);
    const std::uint32_t count = r.u32();
    if (count != tensors.size()) {
        throw ShapeError("checkpoint lists " + std::to_string(count) + " tensors, architecture " +
                         arch + " has " + std::to_string(tensors.size()));
    }
    for (auto& [name, t] : tensors) {
        const std::string got_name = r.str();
        if (got_name != name) {
            throw ShapeError("checkpoint tensor '" + got_name + "' does not match expected '" +
                             name + "'");
        }
        const std::uint32_t ndim = r.u32();
        std::vector<std::size_t> dims(ndim);
        for (auto& d : dims) d = static_cast<std::size_t>(r.u64());
        if (dims != t->shape()) {
            throw ShapeError("checkpoint tensor '" + name + "' shape mismatch");
        }
    }
    for (auto& [name, t] : tensors) {
        for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = r.f64();
    }
    if (r.pos != buf.size()) throw IoError("trailing bytes in checkpoint " + path);
    return loaded;
}

}  // namespace xray
