#pragma once
// Layer primitives with manual forward/backward passes. Every layer caches
// what its backward pass needs; parameter gradients accumulate additively.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ccp/error.hpp"
#include "ccp/rng.hpp"
#include "ccp/simd.hpp"
#include "ccp/tensor.hpp"

namespace ccp {

// Layer hyperparameters in the (filters, kernel, stride, dilation,
// subvolumes) convention. Subvolumes partition the channels into S
// contiguous groups; each output group reads only its input group.
struct ConvSpec {
    int in_channels = 0;
    int filters = 0;
    int kernel = 1;
    int stride = 1;
    int dilation = 1;
    int subvolumes = 1;
    int pad = -1;  // -1: dilation*(kernel-1)/2, preserves extent at stride 1

    int effective_pad() const { return pad >= 0 ? pad : dilation * (kernel - 1) / 2; }

    void validate() const {
        if (in_channels < 1 || filters < 1) throw ShapeError("conv: channels must be >= 1");
        if (kernel < 1 || kernel % 2 == 0) throw ShapeError("conv: kernel must be odd");
        if (stride < 1 || dilation < 1) throw ShapeError("conv: stride/dilation must be >= 1");
        if (subvolumes < 1 || in_channels % subvolumes != 0 || filters % subvolumes != 0)
            throw ShapeError("conv: channels not divisible by subvolumes");
    }

    int64_t out_extent(int64_t in) const {
        return (in + 2 * effective_pad() - int64_t(dilation) * (kernel - 1) - 1) / stride + 1;
    }

    int64_t weight_params() const {
        return int64_t(filters) * (in_channels / subvolumes) * kernel * kernel * kernel;
    }
};

template <class T>
class Conv3d {
public:
    Conv3d() = default;
    Conv3d(ConvSpec spec, const std::string& name, uint64_t seed) : spec_(spec) {
        spec_.validate();
        int cg = spec_.in_channels / spec_.subvolumes;
        Extents we{spec_.filters, cg, spec_.kernel, spec_.kernel, spec_.kernel};
        auto rng = param_rng(seed, name + ".weight");
        double fan_in = double(cg) * spec_.kernel * spec_.kernel * spec_.kernel;
        weight_ = Parameter<T>(name + ".weight",
                               gaussian_tensor<T>(we, std::sqrt(2.0 / fan_in), rng));
        bias_ = Parameter<T>(name + ".bias", Tensor<T>::zeros({spec_.filters}));
    }

    const ConvSpec& spec() const { return spec_; }
    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }
    const Parameter<T>& weight() const { return weight_; }
    const Parameter<T>& bias() const { return bias_; }

    Extents out_extents(const Extents& in) const {
        if (in.size() != 5) throw ShapeError("conv: input must be rank 5");
        if (in[1] != spec_.in_channels)
            throw ShapeError("conv: expected " + std::to_string(spec_.in_channels) +
                             " input channels, got " + std::to_string(in[1]));
        Extents out{in[0], spec_.filters, spec_.out_extent(in[2]), spec_.out_extent(in[3]),
                    spec_.out_extent(in[4])};
        for (int a = 2; a < 5; ++a)
            if (out[static_cast<size_t>(a)] < 1) throw ShapeError("conv: non-positive output extent");
        return out;
    }

    Tensor<T> forward(const Tensor<T>& input, bool cache = true) {
        Extents oe = out_extents(input.extents());
        Tensor<T> out = Tensor<T>::zeros(oe);
        run_conv(input, out);
        if (cache) cached_input_ = input;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (!cached_input_) throw StateError("conv backward before forward");
        const Tensor<T>& in = *cached_input_;
        if (grad_out.extents() != out_extents(in.extents()))
            throw ShapeError("conv backward: grad extents mismatch");
        Tensor<T> grad_in = Tensor<T>::zeros(in.extents());
        run_backward(in, grad_out, grad_in);
        return grad_in;
    }

    void clear_cache() { cached_input_.reset(); }

private:
    // Shared geometry for one (b, f) output plane walk.
    struct Geo {
        int64_t D, H, W, Do, Ho, Wo;
        int pad, dil, stride, k;
    };

    Geo geo(const Extents& ie, const Extents& oe) const {
        return Geo{ie[2], ie[3], ie[4], oe[2], oe[3], oe[4],
                   spec_.effective_pad(), spec_.dilation, spec_.stride, spec_.kernel};
    }

    void run_conv(const Tensor<T>& in, Tensor<T>& out) const {
        const Geo g = geo(in.extents(), out.extents());
        const int S = spec_.subvolumes;
        const int cg = spec_.in_channels / S;
        const int fg = spec_.filters / S;
        const int64_t B = in.extent(0);
        const int k3 = g.k * g.k * g.k;
        for (int64_t b = 0; b < B; ++b)
            for (int f = 0; f < spec_.filters; ++f) {
                const int grp = f / fg;
                const T* wf = weight_.value.data() + int64_t(f) * cg * k3;
                const T bv = bias_.value[f];
                for (int64_t zo = 0; zo < g.Do; ++zo)
                    for (int64_t yo = 0; yo < g.Ho; ++yo) {
                        T* orow = out.data() + (((b * spec_.filters + f) * g.Do + zo) * g.Ho + yo) * g.Wo;
                        for (int64_t x = 0; x < g.Wo; ++x) orow[x] = bv;
                        for (int ci = 0; ci < cg; ++ci) {
                            const int64_t c = int64_t(grp) * cg + ci;
                            const T* iplane = in.data() + ((b * spec_.in_channels + c) * g.D) * g.H * g.W;
                            const T* wc = wf + int64_t(ci) * k3;
                            accumulate_rows(iplane, wc, orow, g, zo, yo, /*transpose=*/false);
                        }
                    }
            }
    }

    // For one output row (zo,yo) and one (input channel, filter) pair:
    // walk the kernel taps. transpose=false: orow += w * input row.
    // transpose=true is used by the input-gradient pass with roles swapped.
    static void accumulate_rows(const T* iplane, const T* wc, T* orow, const Geo& g, int64_t zo,
                                int64_t yo, bool transpose, T* gin_plane = nullptr,
                                const T* gout_row = nullptr) {
        for (int kz = 0; kz < g.k; ++kz) {
            const int64_t z = zo * g.stride - g.pad + int64_t(kz) * g.dil;
            if (z < 0 || z >= g.D) continue;
            for (int ky = 0; ky < g.k; ++ky) {
                const int64_t y = yo * g.stride - g.pad + int64_t(ky) * g.dil;
                if (y < 0 || y >= g.H) continue;
                const T* irow = transpose ? nullptr : iplane + (z * g.H + y) * g.W;
                T* grow = transpose ? gin_plane + (z * g.H + y) * g.W : nullptr;
                const T* wrow = wc + (int64_t(kz) * g.k + ky) * g.k;
                for (int kx = 0; kx < g.k; ++kx) {
                    const T w = wrow[kx];
                    const int64_t off = -int64_t(g.pad) + int64_t(kx) * g.dil;
                    if (g.stride == 1) {
                        int64_t xlo = std::max<int64_t>(0, -off);
                        int64_t xhi = std::min<int64_t>(g.Wo - 1, g.W - 1 - off);
                        if (xhi < xlo) continue;
                        const size_t n = static_cast<size_t>(xhi - xlo + 1);
                        if (!transpose)
                            simd::axpy(w, irow + xlo + off, orow + xlo, n);
                        else
                            simd::axpy(w, gout_row + xlo, grow + xlo + off, n);
                    } else {
                        for (int64_t xo = 0; xo < g.Wo; ++xo) {
                            const int64_t x = xo * g.stride + off;
                            if (x < 0 || x >= g.W) continue;
                            if (!transpose)
                                orow[xo] += w * irow[x];
                            else
                                grow[x] += w * gout_row[xo];
                        }
                    }
                }
            }
        }
    }

    void run_backward(const Tensor<T>& in, const Tensor<T>& gout, Tensor<T>& gin) {
        const Geo g = geo(in.extents(), gout.extents());
        const int S = spec_.subvolumes;
        const int cg = spec_.in_channels / S;
        const int fg = spec_.filters / S;
        const int64_t B = in.extent(0);
        const int k3 = g.k * g.k * g.k;
        for (int64_t b = 0; b < B; ++b)
            for (int f = 0; f < spec_.filters; ++f) {
                const int grp = f / fg;
                const T* wf = weight_.value.data() + int64_t(f) * cg * k3;
                T* gwf = weight_.grad.data() + int64_t(f) * cg * k3;
                const int64_t gplane = ((b * spec_.filters + f) * g.Do) * g.Ho * g.Wo;
                // bias gradient
                bias_.grad[f] += simd::sum(gout.data() + gplane,
                                           static_cast<size_t>(g.Do * g.Ho * g.Wo));
                for (int64_t zo = 0; zo < g.Do; ++zo)
                    for (int64_t yo = 0; yo < g.Ho; ++yo) {
                        const T* grow = gout.data() + gplane + (zo * g.Ho + yo) * g.Wo;
                        for (int ci = 0; ci < cg; ++ci) {
                            const int64_t c = int64_t(grp) * cg + ci;
                            const int64_t plane = ((b * spec_.in_channels + c) * g.D) * g.H * g.W;
                            const T* iplane = in.data() + plane;
                            T* ginp = gin.data() + plane;
                            // input gradient: scatter grow through the taps
                            accumulate_rows(nullptr, wf + int64_t(ci) * k3, nullptr, g, zo, yo,
                                            /*transpose=*/true, ginp, grow);
                            // weight gradient: per-tap dot of input row with grad row
                            weight_grad_rows(iplane, gwf + int64_t(ci) * k3, grow, g, zo, yo);
                        }
                    }
            }
    }

    static void weight_grad_rows(const T* iplane, T* gwc, const T* grow, const Geo& g, int64_t zo,
                                 int64_t yo) {
        for (int kz = 0; kz < g.k; ++kz) {
            const int64_t z = zo * g.stride - g.pad + int64_t(kz) * g.dil;
            if (z < 0 || z >= g.D) continue;
            for (int ky = 0; ky < g.k; ++ky) {
                const int64_t y = yo * g.stride - g.pad + int64_t(ky) * g.dil;
                if (y < 0 || y >= g.H) continue;
                const T* irow = iplane + (z * g.H + y) * g.W;
                T* gwrow = gwc + (int64_t(kz) * g.k + ky) * g.k;
                for (int kx = 0; kx < g.k; ++kx) {
                    const int64_t off = -int64_t(g.pad) + int64_t(kx) * g.dil;
                    if (g.stride == 1) {
                        int64_t xlo = std::max<int64_t>(0, -off);
                        int64_t xhi = std::min<int64_t>(g.Wo - 1, g.W - 1 - off);
                        if (xhi < xlo) continue;
                        gwrow[kx] += simd::dot(irow + xlo + off, grow + xlo,
                                               static_cast<size_t>(xhi - xlo + 1));
                    } else {
                        T acc = 0;
                        for (int64_t xo = 0; xo < g.Wo; ++xo) {
                            const int64_t x = xo * g.stride + off;
                            if (x >= 0 && x < g.W) acc += irow[x] * grow[xo];
                        }
                        gwrow[kx] += acc;
                    }
                }
            }
        }
    }

    ConvSpec spec_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    std::optional<Tensor<T>> cached_input_;
};

// 2x2x2 max pooling (window == stride); ties route to the first element in
// scan order.
template <class T>
class MaxPool3d {
public:
    explicit MaxPool3d(int window = 2) : window_(window) {}

    Extents out_extents(const Extents& in) const {
        if (in.size() != 5) throw ShapeError("pool: input must be rank 5");
        Extents out = in;
        for (int a = 2; a < 5; ++a) {
            if (in[static_cast<size_t>(a)] % window_ != 0)
                throw ShapeError("pool: extent " + std::to_string(in[static_cast<size_t>(a)]) +
                                 " not divisible by window " + std::to_string(window_));
            out[static_cast<size_t>(a)] = in[static_cast<size_t>(a)] / window_;
        }
        return out;
    }

    Tensor<T> forward(const Tensor<T>& in, bool cache = true) {
        Extents oe = out_extents(in.extents());
        Tensor<T> out = Tensor<T>::zeros(oe);
        std::vector<int64_t> arg(static_cast<size_t>(out.size()));
        const int64_t D = in.extent(2), H = in.extent(3), W = in.extent(4);
        const int64_t BC = in.extent(0) * in.extent(1);
        const int64_t Do = oe[2], Ho = oe[3], Wo = oe[4];
        for (int64_t bc = 0; bc < BC; ++bc) {
            const T* ip = in.data() + bc * D * H * W;
            for (int64_t zo = 0; zo < Do; ++zo)
                for (int64_t yo = 0; yo < Ho; ++yo)
                    for (int64_t xo = 0; xo < Wo; ++xo) {
                        T best{};
                        int64_t bi = -1;
                        for (int dz = 0; dz < window_; ++dz)
                            for (int dy = 0; dy < window_; ++dy)
                                for (int dx = 0; dx < window_; ++dx) {
                                    int64_t idx = ((zo * window_ + dz) * H + yo * window_ + dy) * W +
                                                  xo * window_ + dx;
                                    if (bi < 0 || ip[idx] > best) {
                                        best = ip[idx];
                                        bi = idx;
                                    }
                                }
                        int64_t o = ((bc * Do + zo) * Ho + yo) * Wo + xo;
                        out[o] = best;
                        arg[static_cast<size_t>(o)] = bc * D * H * W + bi;
                    }
        }
        if (cache) {
            argmax_ = std::move(arg);
            in_extents_ = in.extents();
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (argmax_.empty()) throw StateError("pool backward before forward");
        if (static_cast<size_t>(grad_out.size()) != argmax_.size())
            throw ShapeError("pool backward: grad extents mismatch");
        Tensor<T> gin = Tensor<T>::zeros(in_extents_);
        for (int64_t i = 0; i < grad_out.size(); ++i)
            gin[argmax_[static_cast<size_t>(i)]] += grad_out[i];
        return gin;
    }

private:
    int window_;
    std::vector<int64_t> argmax_;
    Extents in_extents_;
};

// Transposed convolution; output spatial extents = stride x input extents.
// Requires kernel >= stride with (kernel - stride) even.
struct DeconvSpec {
    int in_channels = 0;
    int filters = 0;
    int kernel = 2;
    int stride = 2;

    void validate() const {
        if (in_channels < 1 || filters < 1) throw ShapeError("deconv: channels must be >= 1");
        if (kernel < stride || (kernel - stride) % 2 != 0)
            throw ShapeError("deconv: need kernel >= stride with even difference");
    }
    int pad() const { return (kernel - stride) / 2; }
    int64_t weight_params() const {
        return int64_t(filters) * in_channels * kernel * kernel * kernel;
    }
};

template <class T>
class Deconv3d {
public:
    Deconv3d() = default;
    Deconv3d(DeconvSpec spec, const std::string& name, uint64_t seed) : spec_(spec) {
        spec_.validate();
        Extents we{spec_.filters, spec_.in_channels, spec_.kernel, spec_.kernel, spec_.kernel};
        auto rng = param_rng(seed, name + ".weight");
        double fan_in = double(spec_.in_channels) * spec_.kernel * spec_.kernel * spec_.kernel /
                        double(spec_.stride * spec_.stride * spec_.stride);
        weight_ = Parameter<T>(name + ".weight",
                               gaussian_tensor<T>(we, std::sqrt(2.0 / fan_in), rng));
        bias_ = Parameter<T>(name + ".bias", Tensor<T>::zeros({spec_.filters}));
    }

    const DeconvSpec& spec() const { return spec_; }
    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }

    Extents out_extents(const Extents& in) const {
        if (in.size() != 5) throw ShapeError("deconv: input must be rank 5");
        if (in[1] != spec_.in_channels) throw ShapeError("deconv: input channel mismatch");
        return {in[0], spec_.filters, in[2] * spec_.stride, in[3] * spec_.stride,
                in[4] * spec_.stride};
    }

    Tensor<T> forward(const Tensor<T>& input, bool cache = true) {
        Extents oe = out_extents(input.extents());
        Tensor<T> out = Tensor<T>::zeros(oe);
        const int64_t B = input.extent(0), C = input.extent(1);
        const int64_t D = input.extent(2), H = input.extent(3), W = input.extent(4);
        const int64_t Do = oe[2], Ho = oe[3], Wo = oe[4];
        const int k = spec_.kernel, s = spec_.stride, p = spec_.pad();
        const int k3 = k * k * k;
        for (int64_t b = 0; b < B; ++b)
            for (int f = 0; f < spec_.filters; ++f) {
                T* oplane = out.data() + ((b * spec_.filters + f) * Do) * Ho * Wo;
                const T bv = bias_.value[f];
                for (int64_t i = 0; i < Do * Ho * Wo; ++i) oplane[i] = bv;
                for (int64_t c = 0; c < C; ++c) {
                    const T* ip = input.data() + ((b * C + c) * D) * H * W;
                    const T* w = weight_.value.data() + (int64_t(f) * C + c) * k3;
                    for (int64_t zo = 0; zo < Do; ++zo)
                        for (int64_t yo = 0; yo < Ho; ++yo)
                            for (int64_t xo = 0; xo < Wo; ++xo) {
                                T acc = 0;
                                for (int kz = 0; kz < k; ++kz) {
                                    int64_t zn = zo + p - kz;
                                    if (zn % s != 0) continue;
                                    int64_t zi = zn / s;
                                    if (zi < 0 || zi >= D) continue;
                                    for (int ky = 0; ky < k; ++ky) {
                                        int64_t yn = yo + p - ky;
                                        if (yn % s != 0) continue;
                                        int64_t yi = yn / s;
                                        if (yi < 0 || yi >= H) continue;
                                        for (int kx = 0; kx < k; ++kx) {
                                            int64_t xn = xo + p - kx;
                                            if (xn % s != 0) continue;
                                            int64_t xi = xn / s;
                                            if (xi < 0 || xi >= W) continue;
                                            acc += w[(int64_t(kz) * k + ky) * k + kx] *
                                                   ip[(zi * H + yi) * W + xi];
                                        }
                                    }
                                }
                                oplane[(zo * Ho + yo) * Wo + xo] += acc;
                            }
                }
            }
        if (cache) cached_input_ = input;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (!cached_input_) throw StateError("deconv backward before forward");
        const Tensor<T>& in = *cached_input_;
        if (grad_out.extents() != out_extents(in.extents()))
            throw ShapeError("deconv backward: grad extents mismatch");
        Tensor<T> gin = Tensor<T>::zeros(in.extents());
        const int64_t B = in.extent(0), C = in.extent(1);
        const int64_t D = in.extent(2), H = in.extent(3), W = in.extent(4);
        const int64_t Do = grad_out.extent(2), Ho = grad_out.extent(3), Wo = grad_out.extent(4);
        const int k = spec_.kernel, s = spec_.stride, p = spec_.pad();
        const int k3 = k * k * k;
        for (int64_t b = 0; b < B; ++b)
            for (int f = 0; f < spec_.filters; ++f) {
                const int64_t goff = ((b * spec_.filters + f) * Do) * Ho * Wo;
                const T* gp = grad_out.data() + goff;
                bias_.grad[f] += simd::sum(gp, static_cast<size_t>(Do * Ho * Wo));
                for (int64_t c = 0; c < C; ++c) {
                    const T* ip = in.data() + ((b * C + c) * D) * H * W;
                    T* gip = gin.data() + ((b * C + c) * D) * H * W;
                    const T* w = weight_.value.data() + (int64_t(f) * C + c) * k3;
                    T* gw = weight_.grad.data() + (int64_t(f) * C + c) * k3;
                    for (int64_t zi = 0; zi < D; ++zi)
                        for (int64_t yi = 0; yi < H; ++yi)
                            for (int64_t xi = 0; xi < W; ++xi) {
                                const T iv = ip[(zi * H + yi) * W + xi];
                                T acc = 0;
                                for (int kz = 0; kz < k; ++kz) {
                                    int64_t zo = zi * s - p + kz;
                                    if (zo < 0 || zo >= Do) continue;
                                    for (int ky = 0; ky < k; ++ky) {
                                        int64_t yo = yi * s - p + ky;
                                        if (yo < 0 || yo >= Ho) continue;
                                        for (int kx = 0; kx < k; ++kx) {
                                            int64_t xo = xi * s - p + kx;
                                            if (xo < 0 || xo >= Wo) continue;
                                            const T gv = gp[(zo * Ho + yo) * Wo + xo];
                                            acc += w[(int64_t(kz) * k + ky) * k + kx] * gv;
                                            gw[(int64_t(kz) * k + ky) * k + kx] += iv * gv;
                                        }
                                    }
                                }
                                gip[(zi * H + yi) * W + xi] += acc;
                            }
                }
            }
        return gin;
    }

private:
    DeconvSpec spec_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    std::optional<Tensor<T>> cached_input_;
};

template <class T>
class Relu {
public:
    Tensor<T> forward(const Tensor<T>& in, bool cache = true) {
        Tensor<T> out = Tensor<T>::zeros(in.extents());
        simd::relu(in.data(), out.data(), static_cast<size_t>(in.size()));
        if (cache) cached_input_ = in;
        return out;
    }
    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (!cached_input_) throw StateError("relu backward before forward");
        if (grad_out.extents() != cached_input_->extents())
            throw ShapeError("relu backward: grad extents mismatch");
        Tensor<T> gin = Tensor<T>::zeros(grad_out.extents());
        simd::relu_backward(cached_input_->data(), grad_out.data(), gin.data(),
                            static_cast<size_t>(gin.size()));
        return gin;
    }

private:
    std::optional<Tensor<T>> cached_input_;
};

template <class T>
class TanhAct {
public:
    Tensor<T> forward(const Tensor<T>& in, bool cache = true) {
        Tensor<T> out = in.map([](T v) { return static_cast<T>(std::tanh(double(v))); });
        if (cache) cached_output_ = out;
        return out;
    }
    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (!cached_output_) throw StateError("tanh backward before forward");
        return Tensor<T>::zip(*cached_output_, grad_out,
                              [](T t, T g) { return g * (T(1) - t * t); });
    }

private:
    std::optional<Tensor<T>> cached_output_;
};

}  // namespace ccp
