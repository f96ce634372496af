#pragma once
// CCT1 binary tensor format:
//   magic "CCT1", u8 precision (0=f32, 1=f64), u8 rank,
//   rank x u32 LE extents, raw LE values in canonical layout.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "ccp/tensor.hpp"

namespace ccp {

namespace detail {

inline void write_bytes(std::ostream& os, const void* p, size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& is, void* p, size_t n, const std::string& path) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is.gcount()) != n) {
        auto pos = is.tellg();
        throw ParseError(path, pos < 0 ? 0 : static_cast<size_t>(pos), "truncated payload");
    }
}

template <class T>
constexpr uint8_t precision_code() {
    return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace detail

template <class T>
void save_cct1(const Tensor<T>& t, std::ostream& os) {
    os.write("CCT1", 4);
    uint8_t prec = detail::precision_code<T>();
    uint8_t rank = static_cast<uint8_t>(t.rank());
    detail::write_bytes(os, &prec, 1);
    detail::write_bytes(os, &rank, 1);
    for (int a = 0; a < t.rank(); ++a) {
        uint32_t e = static_cast<uint32_t>(t.extent(a));
        detail::write_bytes(os, &e, 4);
    }
    detail::write_bytes(os, t.data(), sizeof(T) * static_cast<size_t>(t.size()));
}

template <class T>
void save_cct1(const Tensor<T>& t, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    save_cct1(t, os);
    if (!os) throw IoError("write failed: " + path);
}

// Loads a CCT1 tensor; values stored at the other precision are converted.
template <class T>
Tensor<T> load_cct1(std::istream& is, const std::string& path = "<stream>") {
    char magic[4];
    detail::read_bytes(is, magic, 4, path);
    if (std::memcmp(magic, "CCT1", 4) != 0) throw ParseError(path, 0, "bad magic, expected CCT1");
    uint8_t prec = 0, rank = 0;
    detail::read_bytes(is, &prec, 1, path);
    detail::read_bytes(is, &rank, 1, path);
    if (prec > 1) throw ParseError(path, 4, "unknown precision code " + std::to_string(prec));
    if (rank < 1 || rank > 5) throw ParseError(path, 5, "rank must be 1..5");
    Extents e(rank);
    for (auto& d : e) {
        uint32_t v;
        detail::read_bytes(is, &v, 4, path);
        d = v;
    }
    int64_t n = 1;
    for (int64_t d : e) n *= d;
    std::vector<T> data(static_cast<size_t>(n));
    if (prec == detail::precision_code<T>()) {
        detail::read_bytes(is, data.data(), sizeof(T) * data.size(), path);
    } else if (prec == 0) {
        std::vector<float> raw(data.size());
        detail::read_bytes(is, raw.data(), 4 * raw.size(), path);
        for (size_t i = 0; i < raw.size(); ++i) data[i] = static_cast<T>(raw[i]);
    } else {
        std::vector<double> raw(data.size());
        detail::read_bytes(is, raw.data(), 8 * raw.size(), path);
        for (size_t i = 0; i < raw.size(); ++i) data[i] = static_cast<T>(raw[i]);
    }
    return Tensor<T>::from_data(e, std::move(data));
}

template <class T>
Tensor<T> load_cct1_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    return load_cct1<T>(is, path);
}

}  // namespace ccp
