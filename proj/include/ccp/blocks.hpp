#pragma once
// Residual units. BRB is the identity-shortcut block; GRB fuses a guidance
// feature from a shallower layer and amplifies the fused map through a
// tangent connection before the residual transform.

#include <optional>
#include <string>

#include "ccp/layers.hpp"
#include "ccp/tensor.hpp"

namespace ccp {

// The residual transform h: conv3 -> ReLU -> conv3, equal in/out channels.
template <class T>
class ResidualTransform {
public:
    ResidualTransform() = default;
    ResidualTransform(int channels, int subvolumes, const std::string& name, uint64_t seed)
        : conv1_(ConvSpec{.in_channels = channels, .filters = channels, .kernel = 3,
                          .subvolumes = subvolumes},
                 name + ".conv1", seed),
          conv2_(ConvSpec{.in_channels = channels, .filters = channels, .kernel = 3,
                          .subvolumes = subvolumes},
                 name + ".conv2", seed) {}

    Tensor<T> forward(const Tensor<T>& x, bool cache = true) {
        return conv2_.forward(relu_.forward(conv1_.forward(x, cache), cache), cache);
    }
    Tensor<T> backward(const Tensor<T>& gout) {
        return conv1_.backward(relu_.backward(conv2_.backward(gout)));
    }

    Conv3d<T>& conv1() { return conv1_; }
    Conv3d<T>& conv2() { return conv2_; }

private:
    Conv3d<T> conv1_, conv2_;
    Relu<T> relu_;
};

template <class T>
class BasicResidualBlock {
public:
    BasicResidualBlock() = default;
    BasicResidualBlock(int channels, int subvolumes, const std::string& name, uint64_t seed)
        : channels_(channels), h_(channels, subvolumes, name + ".h", seed) {}

    int channels() const { return channels_; }

    // ReLU(X + h(X))
    Tensor<T> forward(const Tensor<T>& x, bool cache = true) {
        if (x.extent(1) != channels_) throw ShapeError("brb: channel mismatch");
        auto pre = Tensor<T>::add(x, h_.forward(x, cache));
        return out_relu_.forward(pre, cache);
    }

    Tensor<T> backward(const Tensor<T>& gout) {
        auto gpre = out_relu_.backward(gout);
        return Tensor<T>::add(gpre, h_.backward(gpre));
    }

    ResidualTransform<T>& h() { return h_; }

private:
    int channels_ = 0;
    ResidualTransform<T> h_;
    Relu<T> out_relu_;
};

enum class GrbMode { full, no_amplify, no_guidance };

template <class T>
class GuidedResidualBlock {
public:
    GuidedResidualBlock() = default;
    // guidance_channels == channels means the guidance feeds in directly;
    // otherwise a learned 1x1x1 projection maps it first.
    GuidedResidualBlock(int channels, int guidance_channels, int subvolumes,
                        const std::string& name, uint64_t seed, GrbMode mode = GrbMode::full)
        : channels_(channels), mode_(mode), h_(channels, subvolumes, name + ".h", seed) {
        if (guidance_channels != channels)
            proj_.emplace(ConvSpec{.in_channels = guidance_channels, .filters = channels,
                                   .kernel = 1},
                          name + ".proj", seed);
    }

    GrbMode mode() const { return mode_; }
    void set_mode(GrbMode m) { mode_ = m; }
    int channels() const { return channels_; }
    std::optional<Conv3d<T>>& projection() { return proj_; }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& g, bool cache = true) {
        if (x.extent(1) != channels_) throw ShapeError("grb: channel mismatch on X");
        Tensor<T> fused;
        if (mode_ == GrbMode::no_guidance) {
            fused = x;
        } else {
            Tensor<T> gp = proj_ ? proj_->forward(g, cache) : g;
            fused = Tensor<T>::add(x, gp);  // X^ = X + G
        }
        Tensor<T> amplified;
        if (mode_ == GrbMode::no_amplify) {
            amplified = fused;
        } else {
            // X^_G = X^ (1 + tanh(X^))
            Tensor<T> th = tanh_.forward(fused, cache);
            amplified = Tensor<T>::zip(fused, th, [](T v, T t) { return v * (T(1) + t); });
        }
        auto pre = Tensor<T>::add(amplified, h_.forward(fused, cache));
        if (cache) cached_fused_ = fused;
        return out_relu_.forward(pre, cache);
    }

    // Returns (grad_x, grad_g). grad_g is zero-shaped like x when guidance is
    // disabled (callers that zeroed G get a gradient they can ignore).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& gout) {
        if (!cached_fused_) throw StateError("grb backward before forward");
        auto gpre = out_relu_.backward(gout);
        // residual branch
        auto gfused = h_.backward(gpre);
        if (mode_ == GrbMode::no_amplify) {
            gfused = Tensor<T>::add(gfused, gpre);
        } else {
            // d(X^ (1+tanh X^))/dX^ = 1 + tanh + X^ (1 - tanh^2)
            const Tensor<T>& fused = *cached_fused_;
            auto gamp = Tensor<T>::zip(fused, gpre, [](T v, T g) {
                const T t = static_cast<T>(std::tanh(double(v)));
                return g * (T(1) + t + v * (T(1) - t * t));
            });
            gfused = Tensor<T>::add(gfused, gamp);
        }
        if (mode_ == GrbMode::no_guidance)
            return {gfused, Tensor<T>::zeros(gfused.extents())};
        Tensor<T> gg = proj_ ? proj_->backward(gfused) : gfused;
        return {gfused, gg};
    }

    ResidualTransform<T>& h() { return h_; }

private:
    int channels_ = 0;
    GrbMode mode_ = GrbMode::full;
    ResidualTransform<T> h_;
    std::optional<Conv3d<T>> proj_;
    TanhAct<T> tanh_;
    Relu<T> out_relu_;
    std::optional<Tensor<T>> cached_fused_;
};

}  // namespace ccp
