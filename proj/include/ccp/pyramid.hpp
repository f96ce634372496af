#pragma once
// Multi-scale 3D context extraction and aggregation. Branches run a dilated
// conv plus a 1x1x1 feature-reduction conv on the encoder's final map;
// aggregation is either self-cascaded (largest dilation first, residual
// fusion) or the parallel concat-then-1x1x1 baseline.

#include <string>
#include <vector>

#include "ccp/blocks.hpp"
#include "ccp/layers.hpp"

namespace ccp {

enum class PyramidMode { cascaded, parallel };

struct PyramidConfig {
    std::vector<int> dilation_rates;  // strictly decreasing
    int branch_channels = 16;
    int branch_subvolumes = 1;   // subvolumes of the dilated branch convs
    int cascade_subvolumes = 1;  // subvolumes inside the fusion residual blocks
    PyramidMode mode = PyramidMode::cascaded;
    bool reverse_order = false;  // aggregate smallest rate first (experiment)

    int scales() const { return static_cast<int>(dilation_rates.size()); }

    void validate() const {
        if (scales() < 2) throw ConfigError("pyramid: need at least 2 scales");
        for (size_t i = 1; i < dilation_rates.size(); ++i)
            if (dilation_rates[i] >= dilation_rates[i - 1])
                throw ConfigError("pyramid: dilation rates must be strictly decreasing");
        if (dilation_rates.back() < 1) throw ConfigError("pyramid: rates must be >= 1");
    }
};

template <class T>
struct ContextSet {
    std::vector<Tensor<T>> contexts;  // X_1 .. X_n, identical extents
};

template <class T>
class ContextPyramid {
public:
    ContextPyramid() = default;
    ContextPyramid(const PyramidConfig& cfg, int in_channels, const std::string& name,
                   uint64_t seed)
        : cfg_(cfg) {
        cfg_.validate();
        for (int i = 0; i < cfg_.scales(); ++i) {
            std::string bn = name + ".branch" + std::to_string(i);
            branch_convs_.emplace_back(
                ConvSpec{.in_channels = in_channels, .filters = cfg_.branch_channels, .kernel = 3,
                         .dilation = cfg_.dilation_rates[static_cast<size_t>(i)],
                         .subvolumes = cfg_.branch_subvolumes},
                bn + ".dilated", seed);
            reduce_convs_.emplace_back(
                ConvSpec{.in_channels = cfg_.branch_channels, .filters = cfg_.branch_channels,
                         .kernel = 1},
                bn + ".reduce", seed);
        }
        if (cfg_.mode == PyramidMode::cascaded) {
            for (int i = 0; i + 1 < cfg_.scales(); ++i)
                cascade_blocks_.emplace_back(cfg_.branch_channels, cfg_.cascade_subvolumes,
                                             name + ".cascade" + std::to_string(i), seed);
        } else {
            concat_conv_ = Conv3d<T>(
                ConvSpec{.in_channels = cfg_.branch_channels * cfg_.scales(),
                         .filters = cfg_.branch_channels, .kernel = 1},
                name + ".concat", seed);
        }
    }

    const PyramidConfig& config() const { return cfg_; }
    std::vector<Conv3d<T>>& branch_convs() { return branch_convs_; }
    std::vector<Conv3d<T>>& reduce_convs() { return reduce_convs_; }
    std::vector<BasicResidualBlock<T>>& cascade_blocks() { return cascade_blocks_; }
    Conv3d<T>& concat_conv() { return concat_conv_; }

    // X_i = reduce_i(dilated_conv_i(features)), ordered largest rate first.
    ContextSet<T> extract(const Tensor<T>& features, bool cache = true) {
        ContextSet<T> ctx;
        for (int i = 0; i < cfg_.scales(); ++i) {
            auto raw = branch_convs_[static_cast<size_t>(i)].forward(features, cache);
            ctx.contexts.push_back(reduce_convs_[static_cast<size_t>(i)].forward(raw, cache));
        }
        return ctx;
    }

    // Backward through all branches; returns grad wrt the shared features.
    Tensor<T> extract_backward(const std::vector<Tensor<T>>& grad_contexts) {
        if (grad_contexts.size() != branch_convs_.size())
            throw ShapeError("pyramid: gradient count mismatch");
        Tensor<T> gfeat;
        for (size_t i = 0; i < branch_convs_.size(); ++i) {
            auto g = branch_convs_[i].backward(reduce_convs_[i].backward(grad_contexts[i]));
            gfeat = i == 0 ? std::move(g) : Tensor<T>::add(gfeat, g);
        }
        return gfeat;
    }

    // Eq-style cascade: A_2 = f_1(X_1 + X_2); A_k = f_{k-1}(A_{k-1} + X_k).
    Tensor<T> aggregate_cascaded(const ContextSet<T>& ctx, bool cache = true) {
        check_contexts(ctx);
        if (cfg_.mode != PyramidMode::cascaded) throw ConfigError("pyramid: not in cascaded mode");
        const auto order = aggregation_order();
        Tensor<T> acc = ctx.contexts[order[0]];
        for (size_t k = 1; k < order.size(); ++k)
            acc = cascade_blocks_[k - 1].forward(Tensor<T>::add(acc, ctx.contexts[order[k]]),
                                                 cache);
        return acc;
    }

    std::vector<Tensor<T>> aggregate_cascaded_backward(const Tensor<T>& gout) {
        const auto order = aggregation_order();
        std::vector<Tensor<T>> grads(order.size());
        Tensor<T> g = gout;
        for (size_t k = order.size(); k-- > 1;) {
            g = cascade_blocks_[k - 1].backward(g);
            grads[order[k]] = g;  // the sum node passes g to both operands
        }
        grads[order[0]] = g;
        return grads;
    }

    // Parallel baseline: channel-concat all contexts, then the 1x1x1 conv g.
    Tensor<T> aggregate_parallel(const ContextSet<T>& ctx, bool cache = true) {
        check_contexts(ctx);
        if (cfg_.mode != PyramidMode::parallel) throw ConfigError("pyramid: not in parallel mode");
        auto cat = concat_channels(ctx.contexts);
        return concat_conv_.forward(cat, cache);
    }

    std::vector<Tensor<T>> aggregate_parallel_backward(const Tensor<T>& gout) {
        auto gcat = concat_conv_.backward(gout);
        return split_channels(gcat, cfg_.scales());
    }

    Tensor<T> aggregate(const ContextSet<T>& ctx, bool cache = true) {
        return cfg_.mode == PyramidMode::cascaded ? aggregate_cascaded(ctx, cache)
                                                  : aggregate_parallel(ctx, cache);
    }
    std::vector<Tensor<T>> aggregate_backward(const Tensor<T>& gout) {
        return cfg_.mode == PyramidMode::cascaded ? aggregate_cascaded_backward(gout)
                                                  : aggregate_parallel_backward(gout);
    }

    static Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
        const Extents& e0 = parts.front().extents();
        int64_t ctotal = 0;
        for (const auto& p : parts) {
            if (p.extents().size() != 5) throw ShapeError("concat: rank 5 required");
            ctotal += p.extent(1);
        }
        Extents oe{e0[0], ctotal, e0[2], e0[3], e0[4]};
        Tensor<T> out = Tensor<T>::zeros(oe);
        const int64_t plane = e0[2] * e0[3] * e0[4];
        for (int64_t b = 0; b < e0[0]; ++b) {
            int64_t co = 0;
            for (const auto& p : parts) {
                const int64_t pc = p.extent(1);
                std::copy(p.data() + b * pc * plane, p.data() + (b + 1) * pc * plane,
                          out.data() + (b * ctotal + co) * plane);
                co += pc;
            }
        }
        return out;
    }

private:
    void check_contexts(const ContextSet<T>& ctx) const {
        if (static_cast<int>(ctx.contexts.size()) != cfg_.scales())
            throw ConfigError("pyramid: expected " + std::to_string(cfg_.scales()) +
                              " contexts, got " + std::to_string(ctx.contexts.size()));
        for (const auto& c : ctx.contexts)
            if (c.extents() != ctx.contexts.front().extents())
                throw ShapeError("pyramid: context extents differ");
    }

    std::vector<size_t> aggregation_order() const {
        std::vector<size_t> order(static_cast<size_t>(cfg_.scales()));
        for (size_t i = 0; i < order.size(); ++i)
            order[i] = cfg_.reverse_order ? order.size() - 1 - i : i;
        return order;
    }

    std::vector<Tensor<T>> split_channels(const Tensor<T>& cat, int n) const {
        const int64_t bc = cfg_.branch_channels;
        const Extents& e = cat.extents();
        const int64_t plane = e[2] * e[3] * e[4];
        std::vector<Tensor<T>> parts;
        for (int i = 0; i < n; ++i) {
            Tensor<T> p = Tensor<T>::zeros({e[0], bc, e[2], e[3], e[4]});
            for (int64_t b = 0; b < e[0]; ++b)
                std::copy(cat.data() + (b * e[1] + i * bc) * plane,
                          cat.data() + (b * e[1] + (i + 1) * bc) * plane,
                          p.data() + b * bc * plane);
            parts.push_back(std::move(p));
        }
        return parts;
    }

    PyramidConfig cfg_;
    std::vector<Conv3d<T>> branch_convs_;
    std::vector<Conv3d<T>> reduce_convs_;
    std::vector<BasicResidualBlock<T>> cascade_blocks_;
    Conv3d<T> concat_conv_;
};

}  // namespace ccp
