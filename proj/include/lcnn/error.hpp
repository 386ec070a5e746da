#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lcnn {

// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class PrecisionError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class StructuralError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed file content. `section` names the container section (or WAV chunk)
// being decoded and `offset` the byte position where decoding failed.
class ParseError : public Error {
public:
    ParseError(std::string section, std::size_t offset, const std::string& what)
        : Error(section + " @" + std::to_string(offset) + ": " + what),
          section_(std::move(section)),
          offset_(offset),
          detail_(what) {}

    const std::string& section() const noexcept { return section_; }
    std::size_t offset() const noexcept { return offset_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string section_;
    std::size_t offset_;
    std::string detail_;
};

}  // namespace lcnn
