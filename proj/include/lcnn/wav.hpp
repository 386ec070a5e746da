#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lcnn/audio.hpp"

namespace lcnn::audio {

enum class WavEncoding { Pcm16, Float32 };

// RIFF/WAVE with PCM 16-bit or IEEE float 32-bit samples (plain or
// WAVE_FORMAT_EXTENSIBLE); multi-channel input is averaged to mono.
// PCM16 is scaled by 1/32768. Malformed input raises ParseError with the chunk
// name and byte offset.
AudioClip parse_wav(std::span<const std::uint8_t> bytes);
AudioClip load_wav(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding = WavEncoding::Float32);
void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding = WavEncoding::Float32);

}  // namespace lcnn::audio
