#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lcnn/error.hpp"

namespace lcnn {

// Little-endian encoder.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { put_le(v, 2); }
    void u32(std::uint32_t v) { put_le(v, 4); }
    void i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v), 4); }
    void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v), 4); }
    void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void tag(std::string_view fourcc) { bytes({reinterpret_cast<const std::uint8_t*>(fourcc.data()), 4}); }
    void str16(std::string_view s) {
        u16(static_cast<std::uint16_t>(s.size()));
        bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    }
    void str32(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    }

    void patch_u32(std::size_t at, std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
    }

    std::size_t size() const noexcept { return buf_.size(); }
    const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    void put_le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    std::vector<std::uint8_t> buf_;
};

// Little-endian decoder over a borrowed buffer. Every failure is a ParseError
// naming the current section and absolute byte offset.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data, std::string section = "header")
        : data_(data), section_(std::move(section)) {}

    void set_section(std::string section) { section_ = std::move(section); }
    const std::string& section() const noexcept { return section_; }
    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == data_.size(); }
    void seek(std::size_t pos) {
        if (pos > data_.size()) fail("seek past end of data");
        pos_ = pos;
    }

    std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get_le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }

    std::span<const std::uint8_t> bytes(std::size_t n) {
        need(n);
        auto out = data_.subspan(pos_, n);
        pos_ += n;
        return out;
    }
    std::string tag() {
        auto b = bytes(4);
        return std::string(b.begin(), b.end());
    }
    std::string str16() {
        const std::size_t n = u16();
        auto b = bytes(n);
        return std::string(b.begin(), b.end());
    }
    std::string str32() {
        const std::size_t n = u32();
        auto b = bytes(n);
        return std::string(b.begin(), b.end());
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(section_, pos_, what); }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            fail("truncated: need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) + " left");
        }
    }
    std::uint64_t get_le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::string section_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lcnn
