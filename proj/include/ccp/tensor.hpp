#pragma once
// Dense N-axis tensors (rank 1..5), row-major with the last axis fastest.
// Canonical 5-axis order is (batch, channel, depth z, height y, width x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ccp/error.hpp"
#include "ccp/simd.hpp"

namespace ccp {

using Extents = std::vector<int64_t>;

inline std::string extents_str(const Extents& e) {
    std::string s = "[";
    for (size_t i = 0; i < e.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(e[i]);
    }
    return s + "]";
}

template <class T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Extents& extents) { return full(extents, T(0)); }

    static Tensor full(const Extents& extents, T fill) {
        check_extents(extents);
        Tensor t;
        t.extents_ = extents;
        t.data_.assign(static_cast<size_t>(element_count(extents)), fill);
        return t;
    }

    static Tensor from_data(const Extents& extents, std::vector<T> data) {
        check_extents(extents);
        if (static_cast<int64_t>(data.size()) != element_count(extents))
            throw ShapeError("data length " + std::to_string(data.size()) +
                             " does not match extents " + extents_str(extents));
        Tensor t;
        t.extents_ = extents;
        t.data_ = std::move(data);
        return t;
    }

    const Extents& extents() const { return extents_; }
    int rank() const { return static_cast<int>(extents_.size()); }
    int64_t extent(int axis) const { return extents_[static_cast<size_t>(axis)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    // Linear index of a full coordinate, last axis fastest.
    int64_t index(const Extents& coord) const {
        if (coord.size() != extents_.size()) throw ShapeError("coordinate rank mismatch");
        int64_t lin = 0;
        for (size_t a = 0; a < extents_.size(); ++a) {
            if (coord[a] < 0 || coord[a] >= extents_[a])
                throw ShapeError("coordinate out of range on axis " + std::to_string(a));
            lin = lin * extents_[a] + coord[a];
        }
        return lin;
    }

    Extents coord(int64_t lin) const {
        Extents c(extents_.size());
        for (size_t a = extents_.size(); a-- > 0;) {
            c[a] = lin % extents_[a];
            lin /= extents_[a];
        }
        return c;
    }

    T& at(const Extents& coord) { return data_[static_cast<size_t>(index(coord))]; }
    const T& at(const Extents& coord) const { return data_[static_cast<size_t>(index(coord))]; }

    template <class Fn>
    Tensor map(Fn fn) const {
        Tensor out = *this;
        for (auto& v : out.data_) v = fn(v);
        return out;
    }

    template <class Fn>
    static Tensor zip(const Tensor& a, const Tensor& b, Fn fn) {
        if (a.extents_ != b.extents_)
            throw ShapeError("zip extents mismatch: " + extents_str(a.extents_) + " vs " +
                             extents_str(b.extents_));
        Tensor out = a;
        for (int64_t i = 0; i < out.size(); ++i) out.data_[static_cast<size_t>(i)] = fn(a[i], b[i]);
        return out;
    }

    static Tensor add(const Tensor& a, const Tensor& b) {
        if (a.extents_ != b.extents_)
            throw ShapeError("add extents mismatch: " + extents_str(a.extents_) + " vs " +
                             extents_str(b.extents_));
        Tensor out;
        out.extents_ = a.extents_;
        out.data_.resize(a.data_.size());
        simd::add(a.data(), b.data(), out.data(), a.data_.size());
        return out;
    }

    // Removes `axis`, summing along it.
    Tensor reduce_sum(int axis) const {
        check_axis(axis);
        auto [outer, mid, inner] = split(axis);
        Extents oe = removed_axis_extents(axis);
        Tensor out = Tensor::zeros(oe.empty() ? Extents{1} : oe);
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t m = 0; m < mid; ++m) {
                const T* src = data() + (o * mid + m) * inner;
                simd::axpy(T(1), src, out.data() + o * inner, static_cast<size_t>(inner));
            }
        return out;
    }

    // Removes `axis`, keeping the index of the maximum (ties -> lowest index).
    Tensor reduce_argmax(int axis) const {
        check_axis(axis);
        auto [outer, mid, inner] = split(axis);
        Extents oe = removed_axis_extents(axis);
        Tensor out = Tensor::zeros(oe.empty() ? Extents{1} : oe);
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < inner; ++i) {
                T best = data_[static_cast<size_t>(o * mid * inner + i)];
                int64_t arg = 0;
                for (int64_t m = 1; m < mid; ++m) {
                    T v = data_[static_cast<size_t>((o * mid + m) * inner + i)];
                    if (v > best) {
                        best = v;
                        arg = m;
                    }
                }
                out[o * inner + i] = static_cast<T>(arg);
            }
        return out;
    }

    T sum() const { return simd::sum(data(), data_.size()); }

    bool all_finite() const {
        for (const T& v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    bool operator==(const Tensor& o) const { return extents_ == o.extents_ && data_ == o.data_; }

private:
    static void check_extents(const Extents& e) {
        if (e.empty() || e.size() > 5)
            throw ShapeError("rank must be 1..5, got " + std::to_string(e.size()));
        for (int64_t d : e)
            if (d < 1) throw ShapeError("extent must be >= 1, got " + std::to_string(d));
    }

    static int64_t element_count(const Extents& e) {
        return std::accumulate(e.begin(), e.end(), int64_t{1}, std::multiplies<int64_t>());
    }

    void check_axis(int axis) const {
        if (axis < 0 || axis >= rank())
            throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                             std::to_string(rank()));
    }

    // outer * extents[axis] * inner decomposition around `axis`.
    std::tuple<int64_t, int64_t, int64_t> split(int axis) const {
        int64_t outer = 1, inner = 1;
        for (int a = 0; a < axis; ++a) outer *= extents_[static_cast<size_t>(a)];
        for (int a = axis + 1; a < rank(); ++a) inner *= extents_[static_cast<size_t>(a)];
        return {outer, extents_[static_cast<size_t>(axis)], inner};
    }

    Extents removed_axis_extents(int axis) const {
        Extents oe;
        for (int a = 0; a < rank(); ++a)
            if (a != axis) oe.push_back(extents_[static_cast<size_t>(a)]);
        return oe;
    }

    Extents extents_;
    std::vector<T> data_;
};

template <class T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, Tensor<T> v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor<T>::zeros(value.extents())) {}

    void zero_grad() { grad = Tensor<T>::zeros(value.extents()); }
};

}  // namespace ccp
