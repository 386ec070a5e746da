#include "lcnn/wav.hpp"

#include <algorithm>
#include <cmath>

#include "lcnn/bytes.hpp"

namespace lcnn::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FormatChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
};

}  // namespace

AudioClip parse_wav(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes, "RIFF");
    if (r.tag() != "RIFF") {
        r.seek(0);
        r.fail("missing RIFF magic");
    }
    const std::uint32_t riff_size = r.u32();
    if (r.tag() != "WAVE") {
        r.seek(8);
        r.fail("RIFF form type is not WAVE");
    }
    const std::size_t riff_end = std::min<std::size_t>(bytes.size(), std::size_t{8} + riff_size);

    FormatChunk fmt;
    bool have_fmt = false;
    std::span<const std::uint8_t> payload;
    bool have_data = false;
    while (r.offset() + 8 <= riff_end && !(have_fmt && have_data)) {
        r.set_section("chunk");
        const std::string id = r.tag();
        const std::uint32_t size = r.u32();
        r.set_section(id);
        const std::size_t body = r.offset();
        if (id == "fmt ") {
            if (size < 16) r.fail("fmt chunk shorter than 16 bytes");
            fmt.format = r.u16();
            fmt.channels = r.u16();
            fmt.sample_rate = r.u32();
            r.u32();  // byte rate
            r.u16();  // block align
            fmt.bits = r.u16();
            if (fmt.format == kFormatExtensible) {
                if (size < 40) r.fail("extensible fmt chunk shorter than 40 bytes");
                r.u16();  // cbSize
                r.u16();  // valid bits
                r.u32();  // channel mask
                fmt.format = r.u16();  // first two bytes of the sub-format GUID
            }
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) r.fail("data chunk before fmt chunk");
            payload = r.bytes(std::min<std::size_t>(size, r.remaining()));
            if (payload.size() < size) {
                r.seek(body);
                r.fail("data chunk declares " + std::to_string(size) + " bytes, file holds " +
                       std::to_string(payload.size()));
            }
            have_data = true;
        }
        r.seek(body);
        const std::size_t next = body + size + (size & 1u);
        if (next > bytes.size()) {
            if (id == "data") break;
            r.fail("chunk extends past end of file");
        }
        r.seek(next);
    }
    if (!have_fmt) r.fail("no fmt chunk");
    if (!have_data) r.fail("no data chunk");

    r.set_section("fmt ");
    if (fmt.channels == 0) r.fail("zero channels");
    if (fmt.sample_rate == 0) r.fail("zero sample rate");
    std::size_t width = 0;
    if (fmt.format == kFormatPcm && fmt.bits == 16) {
        width = 2;
    } else if (fmt.format == kFormatFloat && fmt.bits == 32) {
        width = 4;
    } else {
        r.fail("unsupported codec: format " + std::to_string(fmt.format) + " with " + std::to_string(fmt.bits) +
               " bits (need PCM16 or float32)");
    }

    const std::size_t frame_bytes = width * fmt.channels;
    const std::size_t frames = payload.size() / frame_bytes;
    AudioClip clip;
    clip.sample_rate = fmt.sample_rate;
    clip.samples.resize(frames);
    ByteReader data(payload, "data");
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < fmt.channels; ++c) {
            if (width == 2) {
                acc += static_cast<double>(static_cast<std::int16_t>(data.u16())) / 32768.0;
            } else {
                acc += static_cast<double>(data.f32());
            }
        }
        clip.samples[f] = fmt.channels == 1 ? static_cast<float>(acc) : static_cast<float>(acc / fmt.channels);
    }
    return clip;
}

AudioClip load_wav(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    try {
        return parse_wav(bytes);
    } catch (const ParseError& e) {
        throw ParseError(e.section(), e.offset(), path.string() + ": " + e.detail());
    }
}

std::vector<std::uint8_t> encode_wav(const AudioClip& clip, WavEncoding encoding) {
    const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
    const std::uint32_t block = bits / 8;
    const auto data_bytes = static_cast<std::uint32_t>(clip.samples.size() * block);
    ByteWriter w;
    w.tag("RIFF");
    w.u32(36 + data_bytes);
    w.tag("WAVE");
    w.tag("fmt ");
    w.u32(16);
    w.u16(encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat);
    w.u16(1);
    w.u32(clip.sample_rate);
    w.u32(clip.sample_rate * block);
    w.u16(static_cast<std::uint16_t>(block));
    w.u16(bits);
    w.tag("data");
    w.u32(data_bytes);
    for (float s : clip.samples) {
        if (encoding == WavEncoding::Pcm16) {
            const double scaled = std::nearbyint(static_cast<double>(s) * 32768.0);
            w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0))));
        } else {
            w.f32(s);
        }
    }
    return w.take();
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding) {
    write_file(path, encode_wav(clip, encoding));
}

}  // namespace lcnn::audio
