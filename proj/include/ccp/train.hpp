#pragma once
// Balanced voxel sampling, the weighted softmax loss, SGD with momentum and
// weight decay, and SC / SSC evaluation metrics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "ccp/network.hpp"
#include "ccp/voxel.hpp"

namespace ccp {

struct SampleWeights {
    VoxelGridSpec spec;
    std::vector<uint8_t> w;   // {0,1} per voxel, ((z*H+y)*W+x)
    bool degenerate = false;  // no occupied voxels to balance against

    int64_t active() const { return std::accumulate(w.begin(), w.end(), int64_t(0)); }
};

// Occupied in-frustum voxels all get weight 1; a seeded uniform subset of the
// in-frustum empty voxels of size min(ratio * occupied, available) balances
// them. With occluded_only, empty candidates are restricted to occluded space.
inline SampleWeights sample_balanced(const LabelVolume& gt, const VisibilityVolume& vis,
                                     int ratio, uint64_t seed, bool occluded_only = false) {
    if (gt.labels.size() != vis.state.size())
        throw ShapeError("sample_balanced: label / visibility size mismatch");
    SampleWeights sw{gt.spec, std::vector<uint8_t>(gt.labels.size(), 0)};
    std::vector<int64_t> empties;
    int64_t occupied = 0;
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        const auto s = static_cast<VoxelState>(vis.state[i]);
        if (s == VoxelState::outside_frustum) continue;
        if (gt.labels[i] != 0) {
            sw.w[i] = 1;
            ++occupied;
        } else if (!occluded_only || s == VoxelState::occluded) {
            empties.push_back(static_cast<int64_t>(i));
        }
    }
    if (occupied == 0) {
        std::fill(sw.w.begin(), sw.w.end(), uint8_t(0));
        sw.degenerate = true;
        return sw;
    }
    const int64_t take = std::min<int64_t>(int64_t(ratio) * occupied,
                                           static_cast<int64_t>(empties.size()));
    std::mt19937_64 rng(seed);
    std::shuffle(empties.begin(), empties.end(), rng);
    for (int64_t i = 0; i < take; ++i) sw.w[static_cast<size_t>(empties[static_cast<size_t>(i)])] = 1;
    return sw;
}

template <class T>
struct LossResult {
    T raw = 0;         // sum of per-voxel cross-entropies over weighted voxels
    T normalized = 0;  // raw / sum of weights
    Tensor<T> grad;    // w * (softmax - onehot), same extents as scores
    bool degenerate = false;
};

template <class T>
LossResult<T> softmax_loss(const Tensor<T>& scores, const LabelVolume& gt,
                           const SampleWeights& weights) {
    if (scores.rank() != 5 || scores.extent(0) != 1)
        throw ShapeError("softmax_loss: scores must be [1,C,D,H,W]");
    const int64_t C = scores.extent(1);
    const int64_t voxels = scores.extent(2) * scores.extent(3) * scores.extent(4);
    if (static_cast<size_t>(voxels) != gt.labels.size() || gt.labels.size() != weights.w.size())
        throw ShapeError("softmax_loss: voxel count mismatch");

    LossResult<T> res;
    res.grad = Tensor<T>::zeros(scores.extents());
    int64_t active = 0;
    std::vector<double> p(static_cast<size_t>(C));
    for (int64_t v = 0; v < voxels; ++v) {
        if (!weights.w[static_cast<size_t>(v)]) continue;
        ++active;
        double mx = -1e300;
        for (int64_t c = 0; c < C; ++c) mx = std::max(mx, double(scores[c * voxels + v]));
        double z = 0;
        for (int64_t c = 0; c < C; ++c) {
            p[static_cast<size_t>(c)] = std::exp(double(scores[c * voxels + v]) - mx);
            z += p[static_cast<size_t>(c)];
        }
        const int64_t y = gt.labels[static_cast<size_t>(v)];
        if (y >= C) throw ShapeError("softmax_loss: label out of range");
        res.raw += static_cast<T>(std::log(z) - (double(scores[y * voxels + v]) - mx));
        for (int64_t c = 0; c < C; ++c)
            res.grad[c * voxels + v] =
                static_cast<T>(p[static_cast<size_t>(c)] / z - (c == y ? 1.0 : 0.0));
    }
    if (active == 0) {
        res.degenerate = true;
        return res;
    }
    res.normalized = res.raw / static_cast<T>(active);
    return res;
}

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    int batch_size = 1;
    // step schedule: multiply the base rate by lr_drop_factor from step
    // lr_drop_step onward; 0 keeps the rate constant
    int lr_drop_step = 0;
    double lr_drop_factor = 0.1;

    double rate_at(int step) const {
        return lr_drop_step > 0 && step >= lr_drop_step ? learning_rate * lr_drop_factor
                                                        : learning_rate;
    }

    void validate() const {
        if (learning_rate <= 0) throw ConfigError("sgd: learning rate must be positive");
        if (momentum < 0 || weight_decay < 0 || batch_size < 1)
            throw ConfigError("sgd: negative hyperparameter");
        if (lr_drop_step < 0 || lr_drop_factor <= 0)
            throw ConfigError("sgd: bad learning-rate schedule");
    }
};

// v <- momentum*v + grad + weight_decay*value; value <- value - lr*v.
// Velocity buffers are keyed by parameter name.
template <class T>
class SgdOptimizer {
public:
    explicit SgdOptimizer(const SgdConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

    void step(Network<T>& net) {
        step([&](const std::function<void(Parameter<T>&)>& fn) { net.for_each_parameter(fn); });
    }

    // Generic form: `visit` applies a callback to every parameter.
    void step(const std::function<void(const std::function<void(Parameter<T>&)>&)>& visit) {
        const T lr = static_cast<T>(cfg_.rate_at(steps_taken_));
        visit([&](Parameter<T>& p) {
            auto [it, fresh] = velocity_.try_emplace(p.name);
            Tensor<T>& v = it->second;
            if (fresh) v = Tensor<T>::zeros(p.value.extents());
            for (int64_t i = 0; i < v.size(); ++i) {
                v[i] = static_cast<T>(cfg_.momentum) * v[i] + p.grad[i] +
                       static_cast<T>(cfg_.weight_decay) * p.value[i];
                p.value[i] -= lr * v[i];
            }
            p.zero_grad();
        });
        ++steps_taken_;
    }

    const SgdConfig& config() const { return cfg_; }

private:
    SgdConfig cfg_;
    int steps_taken_ = 0;
    std::map<std::string, Tensor<T>> velocity_;
};

struct MetricsReport {
    double sc_precision = 0, sc_recall = 0, sc_iou = 0;
    std::vector<double> ssc_iou;      // classes 1..num_classes-1
    std::vector<bool> ssc_present;    // class appears in gt or pred
    double ssc_mean_iou = 0;
    bool degenerate = false;          // empty evaluation domain
};

// Evaluation domain: occluded or surface voxels inside the frustum.
inline bool in_eval_domain(uint8_t state) {
    return state == uint8_t(VoxelState::occluded) || state == uint8_t(VoxelState::surface);
}

inline MetricsReport evaluate(const LabelVolume& pred, const LabelVolume& gt,
                              const VisibilityVolume& vis, int num_classes) {
    if (pred.labels.size() != gt.labels.size() || gt.labels.size() != vis.state.size())
        throw ShapeError("evaluate: volume size mismatch");
    MetricsReport rep;
    int64_t tp = 0, fp = 0, fn = 0;
    std::vector<int64_t> ctp(static_cast<size_t>(num_classes), 0),
        cfp(static_cast<size_t>(num_classes), 0), cfn(static_cast<size_t>(num_classes), 0);
    int64_t domain = 0;
    for (size_t i = 0; i < gt.labels.size(); ++i) {
        if (!in_eval_domain(vis.state[i])) continue;
        ++domain;
        const bool po = pred.labels[i] != 0, go = gt.labels[i] != 0;
        if (po && go) ++tp;
        if (po && !go) ++fp;
        if (!po && go) ++fn;
        for (int c = 1; c < num_classes; ++c) {
            const bool pc = pred.labels[i] == c, gc = gt.labels[i] == c;
            if (pc && gc) ++ctp[static_cast<size_t>(c)];
            if (pc && !gc) ++cfp[static_cast<size_t>(c)];
            if (!pc && gc) ++cfn[static_cast<size_t>(c)];
        }
    }
    if (domain == 0) {
        rep.degenerate = true;
        rep.ssc_iou.assign(static_cast<size_t>(num_classes - 1), 0.0);
        rep.ssc_present.assign(static_cast<size_t>(num_classes - 1), false);
        return rep;
    }
    auto ratio = [](int64_t num, int64_t den) { return den == 0 ? 0.0 : double(num) / double(den); };
    rep.sc_precision = ratio(tp, tp + fp);
    rep.sc_recall = ratio(tp, tp + fn);
    rep.sc_iou = ratio(tp, tp + fp + fn);
    double sum = 0;
    int present = 0;
    for (int c = 1; c < num_classes; ++c) {
        const int64_t t = ctp[static_cast<size_t>(c)], f = cfp[static_cast<size_t>(c)],
                      n = cfn[static_cast<size_t>(c)];
        const bool has = t + f + n > 0;  // class in gt or pred within the domain
        rep.ssc_present.push_back(has);
        rep.ssc_iou.push_back(ratio(t, t + f + n));
        if (has) {
            sum += rep.ssc_iou.back();
            ++present;
        }
    }
    rep.ssc_mean_iou = present == 0 ? 0.0 : sum / present;
    return rep;
}

inline std::string format_metrics(const MetricsReport& rep) {
    char buf[64];
    std::string out;
    auto line = [&](const std::string& name, double v) {
        std::snprintf(buf, sizeof buf, "%s\t%.4f\n", name.c_str(), v);
        out += buf;
    };
    line("sc_precision", rep.sc_precision);
    line("sc_recall", rep.sc_recall);
    line("sc_iou", rep.sc_iou);
    for (size_t c = 0; c < rep.ssc_iou.size(); ++c)
        line("ssc_iou." + std::to_string(c + 1), rep.ssc_iou[c]);
    line("ssc_mean_iou", rep.ssc_mean_iou);
    return out;
}

template <class T>
struct ToyTrainResult {
    std::vector<T> loss;  // normalized loss per step
    MetricsReport metrics;
};

// Single-scene overfit loop: weights sampled once, gradients normalized by
// the weighted-voxel count so the configured learning rate is scale-free.
template <class T>
ToyTrainResult<T> train_toy(Network<T>& net, const Tensor<T>& input, const LabelVolume& gt,
                            const VisibilityVolume& vis, const SgdConfig& cfg, int steps,
                            int sample_ratio, uint64_t seed,
                            const std::function<void(int, T)>& on_step = nullptr) {
    const auto weights = sample_balanced(gt, vis, sample_ratio, seed);
    SgdOptimizer<T> opt(cfg);
    ToyTrainResult<T> res;
    for (int s = 0; s < steps; ++s) {
        auto scores = net.forward(input, true);
        auto loss = softmax_loss(scores, gt, weights);
        if (loss.degenerate) throw StateError("train_toy: no weighted voxels");
        const T scale = T(1) / static_cast<T>(weights.active());
        for (int64_t i = 0; i < loss.grad.size(); ++i) loss.grad[i] *= scale;
        net.backward(loss.grad);
        opt.step(net);
        res.loss.push_back(loss.normalized);
        if (on_step) on_step(s, loss.normalized);
    }
    auto scores = net.forward(input, false);
    auto lab = net.predict_labels(scores);
    LabelVolume pred{gt.spec, std::vector<uint8_t>(gt.labels.size())};
    for (size_t i = 0; i < pred.labels.size(); ++i)
        pred.labels[i] = static_cast<uint8_t>(lab[static_cast<int64_t>(i)]);
    res.metrics = evaluate(pred, gt, vis, net.config().num_classes);
    return res;
}

}  // namespace ccp
