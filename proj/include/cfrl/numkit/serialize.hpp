#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cfrl/numkit/mlp.hpp"

namespace cfrl::numkit {

/// Binary layout (all integers and floats little-endian):
///   "CFNN" | u32 version | u32 layer_count
///   per layer: u32 out | u32 in | u8 activation
///   payload: per layer, weights row-major then bias, as f64
inline constexpr std::uint32_t kMlpFormatVersion = 1;

std::vector<std::uint8_t> serialize_mlp(const MlpParams& params);
MlpParams deserialize_mlp(std::span<const std::uint8_t> bytes);

void save_mlp(const MlpParams& params, const std::filesystem::path& path);
MlpParams load_mlp(const std::filesystem::path& path);

/// Human-readable JSON dump, for debugging only.
std::string mlp_to_json(const MlpParams& params);

/// FNV-1a over the serialized bytes.
std::uint64_t mlp_hash(const MlpParams& params);

// Little-endian helpers shared with other binary formats in the project.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    bool done() const noexcept { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cfrl::numkit
