#pragma once
// CCPW checkpoint format: magic "CCPW", u32 parameter count, then per
// parameter: u16 name length, name bytes, u8 rank, rank x u32 LE extents,
// f32 values in canonical layout.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "ccp/network.hpp"
#include "ccp/tensor_io.hpp"

namespace ccp {

template <class T>
void save_checkpoint(Network<T>& net, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    uint32_t count = 0;
    net.for_each_parameter([&](Parameter<T>&) { ++count; });
    os.write("CCPW", 4);
    detail::write_bytes(os, &count, 4);
    net.for_each_parameter([&](Parameter<T>& p) {
        uint16_t nl = static_cast<uint16_t>(p.name.size());
        detail::write_bytes(os, &nl, 2);
        os.write(p.name.data(), nl);
        uint8_t rank = static_cast<uint8_t>(p.value.rank());
        detail::write_bytes(os, &rank, 1);
        for (int a = 0; a < p.value.rank(); ++a) {
            uint32_t e = static_cast<uint32_t>(p.value.extent(a));
            detail::write_bytes(os, &e, 4);
        }
        for (int64_t i = 0; i < p.value.size(); ++i) {
            float v = static_cast<float>(p.value[i]);
            detail::write_bytes(os, &v, 4);
        }
    });
    if (!os) throw IoError("write failed: " + path);
}

// Loads every stored parameter into the network by name; throws on unknown
// names or shape mismatches.
template <class T>
void load_checkpoint(Network<T>& net, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4];
    detail::read_bytes(is, magic, 4, path);
    if (std::memcmp(magic, "CCPW", 4) != 0) throw ParseError(path, 0, "bad magic, expected CCPW");
    uint32_t count = 0;
    detail::read_bytes(is, &count, 4, path);

    std::map<std::string, Parameter<T>*> registry;
    net.for_each_parameter([&](Parameter<T>& p) { registry[p.name] = &p; });

    for (uint32_t i = 0; i < count; ++i) {
        uint16_t nl = 0;
        detail::read_bytes(is, &nl, 2, path);
        std::string name(nl, '\0');
        detail::read_bytes(is, name.data(), nl, path);
        uint8_t rank = 0;
        detail::read_bytes(is, &rank, 1, path);
        if (rank < 1 || rank > 5)
            throw ParseError(path, static_cast<size_t>(is.tellg()), "bad rank for " + name);
        Extents e(rank);
        for (auto& d : e) {
            uint32_t v;
            detail::read_bytes(is, &v, 4, path);
            d = v;
        }
        int64_t n = 1;
        for (int64_t d : e) n *= d;
        std::vector<float> vals(static_cast<size_t>(n));
        detail::read_bytes(is, vals.data(), 4 * vals.size(), path);

        auto it = registry.find(name);
        if (it == registry.end())
            throw ParseError(path, static_cast<size_t>(is.tellg()),
                             "checkpoint parameter '" + name + "' not in network");
        if (it->second->value.extents() != e)
            throw ParseError(path, static_cast<size_t>(is.tellg()),
                             "extent mismatch for '" + name + "'");
        for (int64_t j = 0; j < n; ++j) it->second->value[j] = static_cast<T>(vals[static_cast<size_t>(j)]);
    }
}

}  // namespace ccp
