#pragma once
// Runtime-dispatched SIMD kernels for the dense inner loops.
// Scalar reference implementations are the source of truth; the AVX2
// variants are equivalence-tested against them and selected at runtime.

#include <cstddef>
#include <string>

namespace ccp::simd {

enum class Backend { scalar, avx2 };

// Best backend the CPU supports, honoring the CCP_SIMD env override
// ("scalar" or "avx2").
Backend active_backend();

// Force a backend (tests use this); throws if the CPU lacks it.
void set_backend(Backend b);

const char* backend_name(Backend b);

// y[i] += a * x[i]
void axpy(float a, const float* x, float* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);

// sum_i x[i] * y[i]
float dot(const float* x, const float* y, std::size_t n);
double dot(const double* x, const double* y, std::size_t n);

// out[i] = x[i] + y[i]
void add(const float* x, const float* y, float* out, std::size_t n);
void add(const double* x, const double* y, double* out, std::size_t n);

// out[i] = max(x[i], 0)
void relu(const float* x, float* out, std::size_t n);
void relu(const double* x, double* out, std::size_t n);

// out[i] = x[i] > 0 ? g[i] : 0   (ReLU backward, subgradient 0 at 0)
void relu_backward(const float* x, const float* g, float* out, std::size_t n);
void relu_backward(const double* x, const double* g, double* out, std::size_t n);

// sum_i x[i]
float sum(const float* x, std::size_t n);
double sum(const double* x, std::size_t n);

// Scalar reference kernels, always available regardless of dispatch.
namespace scalar {
template <class T>
inline void axpy(T a, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}
template <class T>
inline T dot(const T* x, const T* y, std::size_t n) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}
template <class T>
inline void add(const T* x, const T* y, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}
template <class T>
inline void relu(const T* x, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}
template <class T>
inline void relu_backward(const T* x, const T* g, T* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? g[i] : T(0);
}
template <class T>
inline T sum(const T* x, std::size_t n) {
    T acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}
}  // namespace scalar

}  // namespace ccp::simd
