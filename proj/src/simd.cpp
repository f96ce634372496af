#include "ccp/simd.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#if defined(__x86_64__) || defined(_M_X64)
#define CCP_X86 1
#else
#define CCP_X86 0
#endif

namespace ccp::simd {

#if CCP_X86
namespace avx2 {
void axpy_f32(float, const float*, float*, std::size_t);
void axpy_f64(double, const double*, double*, std::size_t);
float dot_f32(const float*, const float*, std::size_t);
double dot_f64(const double*, const double*, std::size_t);
void add_f32(const float*, const float*, float*, std::size_t);
void add_f64(const double*, const double*, double*, std::size_t);
void relu_f32(const float*, float*, std::size_t);
void relu_f64(const double*, double*, std::size_t);
void relu_backward_f32(const float*, const float*, float*, std::size_t);
void relu_backward_f64(const double*, const double*, double*, std::size_t);
float sum_f32(const float*, std::size_t);
double sum_f64(const double*, std::size_t);
}  // namespace avx2
#endif

namespace {

bool cpu_has_avx2() {
#if CCP_X86
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect() {
    if (const char* env = std::getenv("CCP_SIMD")) {
        std::string v(env);
        if (v == "scalar") return Backend::scalar;
        if (v == "avx2") {
            if (!cpu_has_avx2()) throw std::runtime_error("CCP_SIMD=avx2 but CPU lacks AVX2/FMA");
            return Backend::avx2;
        }
    }
    return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

Backend g_backend = detect();

}  // namespace

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !cpu_has_avx2())
        throw std::runtime_error("CPU does not support AVX2/FMA");
    g_backend = b;
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

void axpy(float a, const float* x, float* y, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::axpy_f32(a, x, y, n);
#endif
    scalar::axpy(a, x, y, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::axpy_f64(a, x, y, n);
#endif
    scalar::axpy(a, x, y, n);
}

float dot(const float* x, const float* y, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::dot_f32(x, y, n);
#endif
    return scalar::dot(x, y, n);
}
double dot(const double* x, const double* y, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::dot_f64(x, y, n);
#endif
    return scalar::dot(x, y, n);
}

void add(const float* x, const float* y, float* out, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::add_f32(x, y, out, n);
#endif
    scalar::add(x, y, out, n);
}
void add(const double* x, const double* y, double* out, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::add_f64(x, y, out, n);
#endif
    scalar::add(x, y, out, n);
}

void relu(const float* x, float* out, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::relu_f32(x, out, n);
#endif
    scalar::relu(x, out, n);
}
void relu(const double* x, double* out, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::relu_f64(x, out, n);
#endif
    scalar::relu(x, out, n);
}

void relu_backward(const float* x, const float* g, float* out, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::relu_backward_f32(x, g, out, n);
#endif
    scalar::relu_backward(x, g, out, n);
}
void relu_backward(const double* x, const double* g, double* out, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::relu_backward_f64(x, g, out, n);
#endif
    scalar::relu_backward(x, g, out, n);
}

float sum(const float* x, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::sum_f32(x, n);
#endif
    return scalar::sum(x, n);
}
double sum(const double* x, std::size_t n) {
#if CCP_X86
    if (g_backend == Backend::avx2) return avx2::sum_f64(x, n);
#endif
    return scalar::sum(x, n);
}

}  // namespace ccp::simd
