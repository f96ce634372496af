#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "ccp/tensor.hpp"

namespace ccp {

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Every parameter draws from its own stream keyed by (seed, name), so adding
// or removing layers elsewhere never shifts another layer's initialization.
inline std::mt19937_64 param_rng(uint64_t seed, const std::string& name) {
    return std::mt19937_64(seed ^ fnv1a(name));
}

template <class T>
Tensor<T> gaussian_tensor(const Extents& extents, double stddev, std::mt19937_64& rng) {
    Tensor<T> t = Tensor<T>::zeros(extents);
    std::normal_distribution<double> dist(0.0, stddev);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(rng));
    return t;
}

}  // namespace ccp
