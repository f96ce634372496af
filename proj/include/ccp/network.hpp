#pragma once
// End-to-end network: dilated-conv encoder -> context pyramid -> guided
// residual refinement, producing per-voxel class scores at full, half, or
// quarter resolution.

#include <array>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ccp/blocks.hpp"
#include "ccp/layers.hpp"
#include "ccp/pyramid.hpp"

namespace ccp {

enum class OutputResolution { full, half, quarter };

inline int resolution_factor(OutputResolution r) {
    switch (r) {
        case OutputResolution::full: return 1;
        case OutputResolution::half: return 2;
        default: return 4;
    }
}

struct EncoderStageCfg {
    ConvSpec conv;
    bool pool_after = false;
    std::string tap;  // non-empty: record this stage's activation as guidance
};

struct GrrStageCfg {
    int channels = 16;          // feature width after this stage's deconv
    std::string guidance_tap;   // encoder tap fused by the stage's GRB
    int grb_subvolumes = 1;
    GrbMode grb_mode = GrbMode::full;
};

struct NetworkConfig {
    std::array<int64_t, 3> input_dims{60, 36, 60};  // (D, H, W)
    int num_classes = 12;
    std::vector<EncoderStageCfg> encoder;  // encoder[0] is the stem
    PyramidConfig pyramid;
    std::vector<GrrStageCfg> grr;
    OutputResolution output_resolution = OutputResolution::full;

    int pool_count() const {
        int n = 0;
        for (const auto& s : encoder) n += s.pool_after ? 1 : 0;
        return n;
    }

    void validate() const {
        if (encoder.empty()) throw ConfigError("network: empty encoder");
        if (num_classes < 2) throw ConfigError("network: need at least 2 classes");
        const int pools = pool_count();
        if (static_cast<int>(grr.size()) != pools)
            throw ConfigError("network: refinement stages (" + std::to_string(grr.size()) +
                              ") must match pooling stages (" + std::to_string(pools) + ")");
        const int64_t down = int64_t(1) << pools;
        for (int64_t d : input_dims)
            if (d % down != 0)
                throw ConfigError("network: input dim " + std::to_string(d) +
                                  " not divisible by downsample factor " + std::to_string(down));
        // subvolume counts must not grow with depth
        int prev = 1 << 30;
        for (size_t i = 1; i < encoder.size(); ++i) {
            const int s = encoder[i].conv.subvolumes;
            if (s > prev) throw ConfigError("network: subvolume schedule must be non-increasing");
            prev = s;
        }
        pyramid.validate();
        // channel chain
        int ch = encoder[0].conv.in_channels;
        for (const auto& st : encoder) {
            if (st.conv.in_channels != ch) throw ConfigError("network: encoder channel chain broken");
            ch = st.conv.filters;
        }
    }

    int encoder_out_channels() const { return encoder.back().conv.filters; }

    int tap_channels(const std::string& name) const {
        for (const auto& s : encoder)
            if (s.tap == name) return s.conv.filters;
        throw ConfigError("network: unknown guidance tap '" + name + "'");
    }
};

// Default desk-scale configuration: 60x36x60 input (1/4 of the full grid,
// same aspect), channels 8 -> 16 -> 32, two pooling stages, subvolume
// schedule [4, 2, 1], five pyramid scales, two refinement stages.
inline NetworkConfig desk_config() {
    NetworkConfig cfg;
    cfg.input_dims = {60, 36, 60};
    cfg.num_classes = 12;
    cfg.encoder = {
        {{.in_channels = 1, .filters = 8, .kernel = 3}, false, "stem"},
        {{.in_channels = 8, .filters = 16, .kernel = 3, .dilation = 2, .subvolumes = 4}, true,
         "enc1"},
        {{.in_channels = 16, .filters = 32, .kernel = 3, .dilation = 2, .subvolumes = 2}, true,
         ""},
        {{.in_channels = 32, .filters = 32, .kernel = 3, .dilation = 2, .subvolumes = 1}, false,
         ""},
    };
    cfg.pyramid = PyramidConfig{.dilation_rates = {8, 6, 4, 2, 1}, .branch_channels = 16,
                                .branch_subvolumes = 2};
    cfg.grr = {
        {.channels = 16, .guidance_tap = "enc1"},
        {.channels = 8, .guidance_tap = "stem"},
    };
    return cfg;
}

// Tiny configuration for end-to-end gradient checks: 16^3 input, 2 scales.
inline NetworkConfig tiny_config() {
    NetworkConfig cfg;
    cfg.input_dims = {16, 16, 16};
    cfg.num_classes = 4;
    cfg.encoder = {
        {{.in_channels = 1, .filters = 4, .kernel = 3}, false, "stem"},
        {{.in_channels = 4, .filters = 8, .kernel = 3, .dilation = 2, .subvolumes = 2}, true,
         "enc1"},
        {{.in_channels = 8, .filters = 8, .kernel = 3, .dilation = 2, .subvolumes = 1}, true, ""},
    };
    cfg.pyramid = PyramidConfig{.dilation_rates = {2, 1}, .branch_channels = 4};
    cfg.grr = {
        {.channels = 8, .guidance_tap = "enc1"},
        {.channels = 4, .guidance_tap = "stem"},
    };
    return cfg;
}

// Full-scale configuration: 240x144x240 grid, pyramid rates
// {30, 24, 18, 12, 6, 1}. Three pooling stages keep the pyramid and the
// cascade affordable; widths shrink through the refinement stages so the
// full-resolution layers stay light.
inline NetworkConfig full_config() {
    NetworkConfig cfg;
    cfg.input_dims = {240, 144, 240};
    cfg.num_classes = 12;
    cfg.encoder = {
        {{.in_channels = 1, .filters = 4, .kernel = 3}, true, "stem"},
        {{.in_channels = 4, .filters = 16, .kernel = 3, .dilation = 2, .subvolumes = 4}, true,
         "enc1"},
        {{.in_channels = 16, .filters = 32, .kernel = 3, .dilation = 2, .subvolumes = 2}, true,
         "enc2"},
        {{.in_channels = 32, .filters = 64, .kernel = 3, .dilation = 2, .subvolumes = 2}, false,
         ""},
    };
    cfg.pyramid = PyramidConfig{.dilation_rates = {30, 24, 18, 12, 6, 1}, .branch_channels = 16,
                                .branch_subvolumes = 4, .cascade_subvolumes = 4};
    cfg.grr = {
        {.channels = 8, .guidance_tap = "enc2"},
        {.channels = 4, .guidance_tap = "enc1"},
        {.channels = 4, .guidance_tap = "stem", .grb_subvolumes = 2},
    };
    return cfg;
}

template <class T>
class Network {
public:
    Network() = default;

    Network(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
        cfg_.validate();
        for (size_t i = 0; i < cfg_.encoder.size(); ++i) {
            const auto& st = cfg_.encoder[i];
            enc_convs_.emplace_back(st.conv, "enc" + std::to_string(i), seed);
            enc_relus_.emplace_back();
            enc_pools_.emplace_back(2);
        }
        pyramid_ = ContextPyramid<T>(cfg_.pyramid, cfg_.encoder_out_channels(), "ccp", seed);

        int ch = cfg_.pyramid.branch_channels;
        for (size_t i = 0; i < cfg_.grr.size(); ++i) {
            const auto& st = cfg_.grr[i];
            const std::string name = "grr" + std::to_string(i);
            grr_deconvs_.emplace_back(
                DeconvSpec{.in_channels = ch, .filters = st.channels, .kernel = 2, .stride = 2},
                name + ".deconv", seed);
            grr_relus_.emplace_back();
            grr_grbs_.emplace_back(st.channels, cfg_.tap_channels(st.guidance_tap),
                                   st.grb_subvolumes, name + ".grb", seed, st.grb_mode);
            ch = st.channels;
        }

        // head width depends on where the requested resolution truncates
        head_ = Conv3d<T>(ConvSpec{.in_channels = feature_channels_at_output(),
                                   .filters = cfg_.num_classes, .kernel = 1},
                          head_name(), seed);
    }

    const NetworkConfig& config() const { return cfg_; }

    // Stages actually executed for the configured output resolution.
    int active_grr_stages() const {
        int factor = 1 << cfg_.pool_count();
        const int target = resolution_factor(cfg_.output_resolution);
        int stages = 0;
        while (factor > target) {
            factor /= 2;
            ++stages;
        }
        if (stages > static_cast<int>(cfg_.grr.size()))
            throw ConfigError("network: not enough refinement stages for requested resolution");
        return stages;
    }

    Extents output_extents(int64_t batch = 1) const {
        const int f = resolution_factor(cfg_.output_resolution);
        return {batch, cfg_.num_classes, cfg_.input_dims[0] / f, cfg_.input_dims[1] / f,
                cfg_.input_dims[2] / f};
    }

    // Raw pre-softmax class scores. When `trace` is non-null, named
    // intermediate activations are recorded into it.
    Tensor<T> forward(const Tensor<T>& input, bool cache = true,
                      std::map<std::string, Tensor<T>>* trace = nullptr) {
        if (input.rank() != 5 || input.extent(1) != cfg_.encoder[0].conv.in_channels ||
            input.extent(2) != cfg_.input_dims[0] || input.extent(3) != cfg_.input_dims[1] ||
            input.extent(4) != cfg_.input_dims[2])
            throw ShapeError("network: input extents mismatch");

        taps_.clear();
        Tensor<T> x = input;
        for (size_t i = 0; i < enc_convs_.size(); ++i) {
            x = enc_relus_[i].forward(enc_convs_[i].forward(x, cache), cache);
            const auto& st = cfg_.encoder[i];
            if (st.pool_after) x = enc_pools_[i].forward(x, cache);
            // taps are recorded post-pool so guidance matches the resolution
            // of the refinement stage that consumes it
            if (!st.tap.empty()) taps_[st.tap] = x;
        }
        if (trace) (*trace)["encoder.out"] = x;

        auto ctx = pyramid_.extract(x, cache);
        Tensor<T> f = pyramid_.aggregate(ctx, cache);
        if (trace) (*trace)["ccp.out"] = f;

        const int stages = active_grr_stages();
        for (int i = 0; i < stages; ++i) {
            f = grr_relus_[static_cast<size_t>(i)].forward(
                grr_deconvs_[static_cast<size_t>(i)].forward(f, cache), cache);
            f = grr_grbs_[static_cast<size_t>(i)].forward(
                f, taps_.at(cfg_.grr[static_cast<size_t>(i)].guidance_tap), cache);
            if (trace) (*trace)["grr" + std::to_string(i) + ".out"] = f;
        }
        return head_.forward(f, cache);
    }

    // Backpropagates the score gradient; accumulates parameter gradients and
    // returns the gradient with respect to the network input.
    Tensor<T> backward(const Tensor<T>& grad_scores) {
        Tensor<T> g = head_.backward(grad_scores);
        std::map<std::string, Tensor<T>> tap_grads;

        const int stages = active_grr_stages();
        for (int i = stages - 1; i >= 0; --i) {
            auto [gx, gguid] = grr_grbs_[static_cast<size_t>(i)].backward(g);
            const std::string& tap = cfg_.grr[static_cast<size_t>(i)].guidance_tap;
            auto it = tap_grads.find(tap);
            if (it == tap_grads.end())
                tap_grads[tap] = gguid;
            else
                it->second = Tensor<T>::add(it->second, gguid);
            g = grr_deconvs_[static_cast<size_t>(i)].backward(
                grr_relus_[static_cast<size_t>(i)].backward(gx));
        }

        auto gctx = pyramid_.aggregate_backward(g);
        g = pyramid_.extract_backward(gctx);

        for (size_t i = enc_convs_.size(); i-- > 0;) {
            const auto& st = cfg_.encoder[i];
            auto it = tap_grads.find(st.tap);
            if (!st.tap.empty() && it != tap_grads.end()) g = Tensor<T>::add(g, it->second);
            if (st.pool_after) g = enc_pools_[i].backward(g);
            g = enc_convs_[i].backward(enc_relus_[i].backward(g));
        }
        return g;
    }

    // Per-voxel argmax over the class axis (ties -> lowest class index).
    Tensor<T> predict_labels(const Tensor<T>& scores) const { return scores.reduce_argmax(1); }

    void for_each_parameter(const std::function<void(Parameter<T>&)>& fn) {
        for (auto& c : enc_convs_) {
            fn(c.weight());
            fn(c.bias());
        }
        for (auto& c : pyramid_.branch_convs()) {
            fn(c.weight());
            fn(c.bias());
        }
        for (auto& c : pyramid_.reduce_convs()) {
            fn(c.weight());
            fn(c.bias());
        }
        if (cfg_.pyramid.mode == PyramidMode::cascaded) {
            for (auto& b : pyramid_.cascade_blocks()) visit_transform(b.h(), fn);
        } else {
            fn(pyramid_.concat_conv().weight());
            fn(pyramid_.concat_conv().bias());
        }
        for (size_t i = 0; i < grr_deconvs_.size(); ++i) {
            fn(grr_deconvs_[i].weight());
            fn(grr_deconvs_[i].bias());
            visit_transform(grr_grbs_[i].h(), fn);
            if (grr_grbs_[i].projection()) {
                fn(grr_grbs_[i].projection()->weight());
                fn(grr_grbs_[i].projection()->bias());
            }
        }
        fn(head_.weight());
        fn(head_.bias());
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for_each_parameter([&](Parameter<T>& p) { n += p.value.size(); });
        return n;
    }

    void zero_grad() {
        for_each_parameter([](Parameter<T>& p) { p.zero_grad(); });
    }

    ContextPyramid<T>& pyramid() { return pyramid_; }
    std::vector<Conv3d<T>>& encoder_convs() { return enc_convs_; }
    std::vector<GuidedResidualBlock<T>>& grr_blocks() { return grr_grbs_; }
    Conv3d<T>& head() { return head_; }

private:
    static void visit_transform(ResidualTransform<T>& h,
                                const std::function<void(Parameter<T>&)>& fn) {
        fn(h.conv1().weight());
        fn(h.conv1().bias());
        fn(h.conv2().weight());
        fn(h.conv2().bias());
    }

    int feature_channels_at_output() const {
        int factor = 1 << cfg_.pool_count();
        const int target = resolution_factor(cfg_.output_resolution);
        int ch = cfg_.pyramid.branch_channels;
        for (size_t i = 0; i < cfg_.grr.size() && factor > target; ++i) {
            ch = cfg_.grr[i].channels;
            factor /= 2;
        }
        if (factor != target)
            throw ConfigError("network: resolution not reachable with configured stages");
        return ch;
    }

    std::string head_name() const {
        switch (cfg_.output_resolution) {
            case OutputResolution::full: return "head.full";
            case OutputResolution::half: return "head.half";
            default: return "head.quarter";
        }
    }

    NetworkConfig cfg_;
    std::vector<Conv3d<T>> enc_convs_;
    std::vector<Relu<T>> enc_relus_;
    std::vector<MaxPool3d<T>> enc_pools_;
    ContextPyramid<T> pyramid_;
    std::vector<Deconv3d<T>> grr_deconvs_;
    std::vector<Relu<T>> grr_relus_;
    std::vector<GuidedResidualBlock<T>> grr_grbs_;
    Conv3d<T> head_;
    std::map<std::string, Tensor<T>> taps_;
};

}  // namespace ccp
