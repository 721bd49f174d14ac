#include "cfrl/numkit/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "cfrl/errors.hpp"

namespace cfrl::numkit {
namespace {

constexpr char kMagic[4] = {'C', 'F', 'N', 'N'};

}  // namespace

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void ByteReader::need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ArtifactError("truncated binary payload");
}

std::uint8_t ByteReader::u8() {
    need(1);
    return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> serialize_mlp(const MlpParams& params) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_u32(out, kMlpFormatVersion);
    put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        put_u32(out, static_cast<std::uint32_t>(l.out_dim()));
        put_u32(out, static_cast<std::uint32_t>(l.in_dim()));
        out.push_back(static_cast<std::uint8_t>(l.act));
    }
    for (const auto& l : params.layers) {
        for (double w : l.weight.data()) put_f64(out, w);
        for (double b : l.bias) put_f64(out, b);
    }
    return out;
}

MlpParams deserialize_mlp(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    char magic[4];
    for (auto& c : magic) c = static_cast<char>(in.u8());
    if (std::memcmp(magic, kMagic, 4) != 0) throw ArtifactError("not an MLP parameter file (bad magic)");
    const auto version = in.u32();
    if (version != kMlpFormatVersion) {
        throw ArtifactError("unsupported MLP format version " + std::to_string(version));
    }
    const auto count = in.u32();
    if (count == 0 || count > 4096) throw ArtifactError("implausible layer count");
    MlpParams p;
    p.layers.resize(count);
    for (auto& l : p.layers) {
        const auto out = in.u32();
        const auto inp = in.u32();
        const auto act = in.u8();
        if (act > static_cast<std::uint8_t>(Activation::tanh)) throw ArtifactError("bad activation tag");
        l.weight = Matrix(out, inp);
        l.bias.assign(out, 0.0);
        l.act = static_cast<Activation>(act);
    }
    for (auto& l : p.layers) {
        for (auto& w : l.weight.data()) w = in.f64();
        for (auto& b : l.bias) b = in.f64();
    }
    if (!in.done()) throw ArtifactError("trailing bytes after MLP payload");
    try {
        p.validate();
    } catch (const Error& e) {
        throw ArtifactError(std::string("corrupt MLP payload: ") + e.what());
    }
    return p;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ArtifactError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ArtifactError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw ArtifactError("write failed for " + path.string());
}

void save_mlp(const MlpParams& params, const std::filesystem::path& path) {
    write_file_bytes(path, serialize_mlp(params));
}

MlpParams load_mlp(const std::filesystem::path& path) { return deserialize_mlp(read_file_bytes(path)); }

std::string mlp_to_json(const MlpParams& params) {
    nlohmann::json j;
    j["format_version"] = kMlpFormatVersion;
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& l : params.layers) {
        nlohmann::json lj;
        lj["in"] = l.in_dim();
        lj["out"] = l.out_dim();
        lj["activation"] = std::string(activation_name(l.act));
        lj["weight"] = l.weight.data();
        lj["bias"] = l.bias;
        layers.push_back(std::move(lj));
    }
    return j.dump(2);
}

std::uint64_t mlp_hash(const MlpParams& params) {
    const auto bytes = serialize_mlp(params);
    return fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace cfrl::numkit
