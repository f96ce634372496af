#pragma once

#include <stdexcept>
#include <string>

namespace ccp {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& m) : std::runtime_error("shape error: " + m) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error("config error: " + m) {}
};

struct StateError : std::runtime_error {
    explicit StateError(const std::string& m) : std::runtime_error("state error: " + m) {}
};

// Parse failures carry the file and the byte offset where parsing stopped.
struct ParseError : std::runtime_error {
    ParseError(const std::string& path, std::size_t offset, const std::string& m)
        : std::runtime_error("parse error: " + path + " @ byte " + std::to_string(offset) + ": " + m),
          path(path),
          offset(offset) {}
    std::string path;
    std::size_t offset;
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error("io error: " + m) {}
};

}  // namespace ccp
