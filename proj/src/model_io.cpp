#include <bit>
#include <cstring>
#include <string>

#include <json.hpp>
#include <zlib.h>

#include "brushwork/error.hpp"
#include "brushwork/fsutil.hpp"
#include "brushwork/nnet.hpp"

namespace brushwork::nnet {

static_assert(std::endian::native == std::endian::little, "model files are written in host byte order");

namespace {

constexpr char kMagic[4] = {'B', 'R', 'S', 'H'};
constexpr std::uint32_t kVersion = 1;

using nlohmann::json;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

json metadata_json(const Model& model) {
    return json{
        {"architecture",
         {{"input_resolution", model.arch.input_resolution},
          {"channels", model.arch.channels},
          {"conv_channels", model.arch.conv_channels},
          {"hidden_units", model.arch.hidden_units}}},
        {"tile_size", model.meta.tile_size},
        {"stride", model.meta.stride},
        {"tau", model.meta.tau},
        {"seed", model.meta.seed},
        {"epochs", model.meta.epochs},
        {"normalization", {{"scale", model.meta.norm_scale}, {"offset", model.meta.norm_offset}}},
    };
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return std::bit_cast<double>(bits);
    }

    std::string text(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw Error(ErrorCode::ShapeMismatch, "model payload truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
    std::vector<std::uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kVersion);
    const std::string meta = metadata_json(model).dump();
    put_u32(out, static_cast<std::uint32_t>(meta.size()));
    out.insert(out.end(), meta.begin(), meta.end());
    for (const Tensor& t : model.params) {
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t e : t.shape) put_u32(out, static_cast<std::uint32_t>(e));
        for (double v : t.data) put_f64(out, v);
    }
    put_u32(out, crc_of(out));
    return out;
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error(ErrorCode::BadMagic, "expected BRSH");
    if (bytes.size() < 12) throw Error(ErrorCode::ChecksumMismatch, "model file truncated");
    Reader header(bytes.subspan(4, 4));
    const std::uint32_t version = header.u32();
    if (version != kVersion) throw Error(ErrorCode::UnsupportedVersion, std::to_string(version));

    const auto body = bytes.first(bytes.size() - 4);
    Reader trailer(bytes.last(4));
    if (crc_of(body) != trailer.u32()) throw Error(ErrorCode::ChecksumMismatch, "CRC32 does not match payload");

    Reader in(body.subspan(8));
    const std::uint32_t meta_len = in.u32();
    Model model;
    try {
        const json meta = json::parse(in.text(meta_len));
        const json& a = meta.at("architecture");
        model.arch.input_resolution = a.at("input_resolution").get<int>();
        model.arch.channels = a.at("channels").get<int>();
        model.arch.conv_channels = a.at("conv_channels").get<std::vector<int>>();
        model.arch.hidden_units = a.at("hidden_units").get<int>();
        model.meta.tile_size = meta.at("tile_size").get<int>();
        model.meta.stride = meta.at("stride").get<int>();
        model.meta.tau = meta.at("tau").get<double>();
        model.meta.seed = meta.at("seed").get<std::uint64_t>();
        model.meta.epochs = meta.at("epochs").get<int>();
        model.meta.norm_scale = meta.at("normalization").at("scale").get<double>();
        model.meta.norm_offset = meta.at("normalization").at("offset").get<double>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ShapeMismatch, std::string("model metadata: ") + e.what());
    }
    model.arch.validate();
    if (model.meta.tile_size < 1) throw Error(ErrorCode::InvalidArgument, "model tile size must be >= 1");

    for (const auto& expected : model.arch.parameter_shapes()) {
        Tensor t;
        const std::uint32_t rank = in.u32();
        for (std::uint32_t i = 0; i < rank; ++i) t.shape.push_back(in.u32());
        if (t.shape != expected) throw Error(ErrorCode::ShapeMismatch, "tensor shape disagrees with architecture");
        t.data.resize(element_count(t.shape));
        for (double& v : t.data) v = in.f64();
        model.params.push_back(std::move(t));
    }
    if (in.remaining() != 0) throw Error(ErrorCode::ShapeMismatch, "trailing bytes after last tensor");
    return model;
}

void save_model(const Model& model, const std::filesystem::path& path) {
    write_file_atomic(path, serialize_model(model));
}

Model load_model(const std::filesystem::path& path) { return deserialize_model(read_file(path)); }

}  // namespace brushwork::nnet
