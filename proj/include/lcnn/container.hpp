#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lcnn/audio.hpp"
#include "lcnn/model.hpp"

// `.lcnn` container, little-endian throughout:
//
//   "LCNN" u16 version
//   sections: tag[4] u32 payload_length payload
//     ARCH  u32 c1 c2 c3 dense n_classes in_channels in_height in_width, u8 precision
//     LAYR  one per parameterized layer, in stack order:
//           str16 name, u8 kind, u8 tensor_count, then per tensor
//           u8 dtype (0 float32, 1 int8), u8 rank, u32 dims[rank],
//           [int8 only: f32 scale, i32 zero_point], raw row-major data
//     FEAT  feature map: u8 dtype, u8 rank, u32 dims[rank], raw float32 data
//     META  u32 count, then (str16 key, str32 value) pairs
//     "CRC " u32 CRC-32 (zlib polynomial) of every byte before this section
//
// str16/str32 are a u16/u32 byte length followed by UTF-8 bytes. Tensors are
// channels-first; the flatten before D1 is channel-major (C,H,W).
namespace lcnn {

inline constexpr std::uint16_t kContainerVersion = 1;

std::vector<std::uint8_t> serialize(const Network& net);
Network deserialize(std::span<const std::uint8_t> bytes);

void save(const Network& net, const std::filesystem::path& path);
Network load(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_features(const audio::FeatureMap& features);
audio::FeatureMap deserialize_features(std::span<const std::uint8_t> bytes);

void save_features(const audio::FeatureMap& features, const std::filesystem::path& path);
audio::FeatureMap load_features(const std::filesystem::path& path);

}  // namespace lcnn
