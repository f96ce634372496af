// Acceptance suite: ten structural and quantitative criteria, one pass/fail
// line each. Exit code is the number of failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <vector>

#include "ccp/checkpoint.hpp"
#include "ccp/gradcheck.hpp"
#include "ccp/network.hpp"
#include "ccp/profile.hpp"
#include "ccp/synthetic.hpp"
#include "ccp/train.hpp"
#include "ccp/voxel.hpp"

using namespace ccp;

namespace {

int g_failures = 0;

void criterion(int n, const char* name, bool pass, const std::string& detail) {
    std::printf("criterion %2d [%s]: %s — %s\n", n, name, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

Tensor<double> random_tensor(const Extents& e, std::mt19937_64& rng, double lo = -1,
                             double hi = 1) {
    std::uniform_real_distribution<double> d(lo, hi);
    auto t = Tensor<double>::zeros(e);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = d(rng);
    return t;
}

double max_diff(const Tensor<double>& a, const Tensor<double>& b) {
    double m = 0;
    for (int64_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double acc = 0;
    for (int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Nested-loop convolution oracle; counts one multiply per kernel tap
// (padding taps included) when `mac_counter` is supplied.
Tensor<double> conv3d_oracle(const Tensor<double>& in, const Tensor<double>& w,
                             const Tensor<double>& bias, const ConvSpec& s,
                             int64_t* mac_counter = nullptr) {
    const int64_t B = in.extent(0), D = in.extent(2), H = in.extent(3), W = in.extent(4);
    const int p = s.effective_pad();
    const int64_t Do = s.out_extent(D), Ho = s.out_extent(H), Wo = s.out_extent(W);
    const int cg = s.in_channels / s.subvolumes, fg = s.filters / s.subvolumes;
    auto out = Tensor<double>::zeros({B, s.filters, Do, Ho, Wo});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t f = 0; f < s.filters; ++f)
            for (int64_t zo = 0; zo < Do; ++zo)
                for (int64_t yo = 0; yo < Ho; ++yo)
                    for (int64_t xo = 0; xo < Wo; ++xo) {
                        double acc = bias[f];
                        const int64_t grp = f / fg;
                        for (int64_t ci = 0; ci < cg; ++ci)
                            for (int kz = 0; kz < s.kernel; ++kz)
                                for (int ky = 0; ky < s.kernel; ++ky)
                                    for (int kx = 0; kx < s.kernel; ++kx) {
                                        int64_t z = zo * s.stride - p + int64_t(kz) * s.dilation;
                                        int64_t y = yo * s.stride - p + int64_t(ky) * s.dilation;
                                        int64_t x = xo * s.stride - p + int64_t(kx) * s.dilation;
                                        double iv = 0;
                                        if (z >= 0 && z < D && y >= 0 && y < H && x >= 0 && x < W)
                                            iv = in.at({b, grp * cg + ci, z, y, x});
                                        acc += w.at({f, ci, kz, ky, kx}) * iv;
                                        if (mac_counter) ++*mac_counter;
                                    }
                        out.at({b, f, zo, yo, xo}) = acc;
                    }
    return out;
}

// ---------------------------------------------------------------- criterion 1

void check_conv_fd(GradCheckReport& rep, const ConvSpec& spec, std::mt19937_64& rng,
                   const char* label) {
    Conv3d<double> conv(spec, label, 11);
    auto in = random_tensor({1, spec.in_channels, 5, 5, 5}, rng);
    auto out = conv.forward(in, true);
    auto gout = random_tensor(out.extents(), rng);
    auto gin = conv.backward(gout);
    auto loss = [&]() {
        Conv3d<double> c2 = conv;
        return dot(c2.forward(in, false), gout);
    };
    rep.merge(fd_check(loss, conv.weight().value, conv.weight().grad, std::string(label) + ".w"));
    rep.merge(fd_check(loss, conv.bias().value, conv.bias().grad, std::string(label) + ".b"));
    rep.merge(fd_check(loss, in, gin, std::string(label) + ".in"));
}

void criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(21);
    GradCheckReport rep;

    check_conv_fd(rep, {.in_channels = 2, .filters = 3, .kernel = 3}, rng, "conv");
    check_conv_fd(rep, {.in_channels = 2, .filters = 2, .kernel = 3, .dilation = 2}, rng,
                  "conv_dil");
    check_conv_fd(rep,
                  {.in_channels = 4, .filters = 4, .kernel = 3, .dilation = 2, .subvolumes = 2},
                  rng, "conv_sep");
    check_conv_fd(rep, {.in_channels = 2, .filters = 2, .kernel = 3, .stride = 2, .pad = 1}, rng,
                  "conv_stride");

    {  // max pooling
        MaxPool3d<double> pool(2);
        auto in = random_tensor({1, 2, 6, 6, 6}, rng);
        auto out = pool.forward(in, true);
        auto gout = random_tensor(out.extents(), rng);
        auto gin = pool.backward(gout);
        auto loss = [&]() {
            MaxPool3d<double> p2 = pool;
            return dot(p2.forward(in, false), gout);
        };
        rep.merge(fd_check(loss, in, gin, "pool.in"));
    }

    {  // deconv
        Deconv3d<double> de({.in_channels = 3, .filters = 2, .kernel = 2, .stride = 2}, "de", 3);
        auto in = random_tensor({1, 3, 3, 3, 3}, rng);
        auto out = de.forward(in, true);
        auto gout = random_tensor(out.extents(), rng);
        auto gin = de.backward(gout);
        auto loss = [&]() {
            Deconv3d<double> d2 = de;
            return dot(d2.forward(in, false), gout);
        };
        rep.merge(fd_check(loss, de.weight().value, de.weight().grad, "deconv.w"));
        rep.merge(fd_check(loss, de.bias().value, de.bias().grad, "deconv.b"));
        rep.merge(fd_check(loss, in, gin, "deconv.in"));
    }

    {  // BRB
        BasicResidualBlock<double> brb(3, 1, "brb", 5);
        auto in = random_tensor({1, 3, 4, 4, 4}, rng);
        auto out = brb.forward(in, true);
        auto gout = random_tensor(out.extents(), rng);
        auto gin = brb.backward(gout);
        auto loss = [&]() {
            BasicResidualBlock<double> b2 = brb;
            return dot(b2.forward(in, false), gout);
        };
        rep.merge(fd_check(loss, brb.h().conv1().weight().value, brb.h().conv1().weight().grad,
                           "brb.w1"));
        rep.merge(fd_check(loss, in, gin, "brb.in"));
    }

    for (auto mode : {GrbMode::full, GrbMode::no_amplify, GrbMode::no_guidance}) {
        GuidedResidualBlock<double> grb(3, 2, 1, "grb", 5, mode);
        auto x = random_tensor({1, 3, 4, 4, 4}, rng);
        auto g = random_tensor({1, 2, 4, 4, 4}, rng);
        auto out = grb.forward(x, g, true);
        auto gout = random_tensor(out.extents(), rng);
        auto [gx, gg] = grb.backward(gout);
        auto loss = [&]() {
            GuidedResidualBlock<double> b2 = grb;
            return dot(b2.forward(x, g, false), gout);
        };
        rep.merge(fd_check(loss, grb.h().conv1().weight().value, grb.h().conv1().weight().grad,
                           "grb.w1"));
        rep.merge(fd_check(loss, x, gx, "grb.x"));
        if (mode != GrbMode::no_guidance) rep.merge(fd_check(loss, g, gg, "grb.g"));
    }

    for (auto mode : {PyramidMode::cascaded, PyramidMode::parallel}) {
        PyramidConfig pc{.dilation_rates = {2, 1}, .branch_channels = 3, .mode = mode};
        ContextPyramid<double> pyr(pc, 3, "pyr", 7);
        auto in = random_tensor({1, 3, 4, 4, 4}, rng);
        auto ctx = pyr.extract(in, true);
        auto out = pyr.aggregate(ctx, true);
        auto gout = random_tensor(out.extents(), rng);
        auto gin = pyr.extract_backward(pyr.aggregate_backward(gout));
        auto loss = [&]() {
            ContextPyramid<double> p2 = pyr;
            auto c = p2.extract(in, false);
            return dot(p2.aggregate(c, false), gout);
        };
        rep.merge(fd_check(loss, in, gin, "pyr.in"));
        rep.merge(fd_check(loss, pyr.branch_convs()[0].weight().value,
                           pyr.branch_convs()[0].weight().grad, "pyr.branch.w"));
        auto& agg = mode == PyramidMode::cascaded ? pyr.cascade_blocks()[0].h().conv2().weight()
                                                  : pyr.concat_conv().weight();
        rep.merge(fd_check(loss, agg.value, agg.grad, "pyr.agg.w"));
    }

    GradCheckReport loss_rep;
    {  // softmax loss, tighter tolerance
        const int C = 3;
        VoxelGridSpec spec;
        spec.dims = {2, 2, 2};
        LabelVolume gt{spec, {0, 1, 2, 0, 2, 1, 0, 1}};
        SampleWeights sw{spec, {1, 1, 1, 0, 1, 1, 1, 1}};
        auto scores = random_tensor({1, C, 2, 2, 2}, rng);
        auto res = softmax_loss(scores, gt, sw);
        auto loss = [&]() { return double(softmax_loss(scores, gt, sw).raw); };
        loss_rep.merge(fd_check(loss, scores, res.grad, "loss.scores"));
    }

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "layers max rel err %.3e (%s), loss %.3e, %.1f s", rep.max_rel_err,
                  rep.worst.c_str(), loss_rep.max_rel_err, secs);
    criterion(1, "gradient fidelity", rep.max_rel_err < 1e-4 && loss_rep.max_rel_err < 1e-6 &&
              secs < 60, detail);
}

// ---------------------------------------------------------------- criterion 2

void criterion2() {
    std::mt19937_64 rng(22);
    double worst = 0;

    // separated conv with S=1 == dilated conv
    {
        ConvSpec s{.in_channels = 3, .filters = 3, .kernel = 3, .dilation = 2, .subvolumes = 1};
        Conv3d<double> conv(s, "c", 2);
        auto in = random_tensor({1, 3, 6, 6, 6}, rng);
        worst = std::max(worst, max_diff(conv.forward(in, false),
                                         conv3d_oracle(in, conv.weight().value,
                                                       conv.bias().value, s)));
    }
    // dilated conv with dilation=1 == vanilla conv
    {
        ConvSpec s{.in_channels = 2, .filters = 4, .kernel = 3, .dilation = 1};
        Conv3d<double> conv(s, "c", 3);
        auto in = random_tensor({1, 2, 5, 6, 5}, rng);
        worst = std::max(worst, max_diff(conv.forward(in, false),
                                         conv3d_oracle(in, conv.weight().value,
                                                       conv.bias().value, s)));
    }
    // separated S>1 against the grouped oracle closes the ladder
    {
        ConvSpec s{.in_channels = 4, .filters = 4, .kernel = 3, .dilation = 3, .subvolumes = 2};
        Conv3d<double> conv(s, "c", 4);
        auto in = random_tensor({1, 4, 6, 5, 6}, rng);
        worst = std::max(worst, max_diff(conv.forward(in, false),
                                         conv3d_oracle(in, conv.weight().value,
                                                       conv.bias().value, s)));
    }
    char detail[96];
    std::snprintf(detail, sizeof detail, "max deviation vs nested-loop oracle %.3e", worst);
    criterion(2, "equivalence ladder", worst < 1e-12, detail);
}

// ---------------------------------------------------------------- criterion 3

void criterion3() {
    auto cfg1 = tiny_config();  // dilated encoder convs at enc1/enc2
    auto cfg4 = tiny_config();
    for (auto& st : cfg1.encoder)
        if (st.conv.dilation > 1) st.conv.subvolumes = 1;
    for (auto& st : cfg4.encoder)
        if (st.conv.dilation > 1) st.conv.subvolumes = 4;

    // profiler closed form: dilated-row weight params shrink exactly 4x
    const auto r1 = profile(cfg1), r4 = profile(cfg4);
    int64_t w1 = 0, w4 = 0;
    for (size_t i = 0; i < cfg1.encoder.size(); ++i) {
        if (cfg1.encoder[i].conv.dilation <= 1) continue;
        w1 += cfg1.encoder[i].conv.weight_params();
        w4 += cfg4.encoder[i].conv.weight_params();
    }
    const bool profiler_ok = w1 == 4 * w4 && w1 > 0 &&
                             r1.total_params - r4.total_params == w1 - w4;

    // serialized checkpoints shrink by exactly the removed weights (4 bytes each)
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "ccp-acceptance";
    fs::create_directories(dir);
    Network<float> n1(cfg1, 5), n4(cfg4, 5);
    save_checkpoint(n1, (dir / "s1.ccpw").string());
    save_checkpoint(n4, (dir / "s4.ccpw").string());
    const auto sz1 = fs::file_size(dir / "s1.ccpw"), sz4 = fs::file_size(dir / "s4.ccpw");
    const bool ckpt_ok = sz1 - sz4 == 4 * uint64_t(w1 - w4);

    // instrumented multiply counter == profiler MACs on an 8^3 input
    std::mt19937_64 rng(23);
    double dev = 0;
    bool macs_ok = true;
    for (const auto& spec :
         {ConvSpec{.in_channels = 4, .filters = 4, .kernel = 3, .dilation = 2, .subvolumes = 4},
          ConvSpec{.in_channels = 4, .filters = 8, .kernel = 3, .dilation = 2, .subvolumes = 2},
          ConvSpec{.in_channels = 2, .filters = 3, .kernel = 3}}) {
        Conv3d<double> conv(spec, "c", 6);
        auto in = random_tensor({1, spec.in_channels, 8, 8, 8}, rng);
        int64_t counted = 0;
        auto want = conv3d_oracle(in, conv.weight().value, conv.bias().value, spec, &counted);
        dev = std::max(dev, max_diff(conv.forward(in, false), want));
        if (counted != detail::conv_macs(spec, {8, 8, 8})) macs_ok = false;
    }

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "weights %lld -> %lld (4.000x), ckpt %llu -> %llu bytes, macs %s",
                  static_cast<long long>(w1), static_cast<long long>(w4),
                  static_cast<unsigned long long>(sz1), static_cast<unsigned long long>(sz4),
                  macs_ok ? "exact" : "MISMATCH");
    criterion(3, "parameter reduction", profiler_ok && ckpt_ok && macs_ok && dev < 1e-12, buf);
}

// ---------------------------------------------------------------- criterion 4

void criterion4() {
    std::mt19937_64 rng(24);
    double worst = 0;
    for (int n = 2; n <= 6; ++n) {
        PyramidConfig pc;
        pc.branch_channels = 3;
        for (int r = n; r >= 1; --r) pc.dilation_rates.push_back(r);
        ContextPyramid<double> pyr(pc, 3, "pyr", 9);
        for (auto& blk : pyr.cascade_blocks()) {  // identity-configure h == 0
            for (auto* c : {&blk.h().conv1(), &blk.h().conv2()}) {
                c->weight().value = Tensor<double>::zeros(c->weight().value.extents());
                c->bias().value = Tensor<double>::zeros(c->bias().value.extents());
            }
        }
        ContextSet<double> ctx;
        auto sum = Tensor<double>::zeros({1, 3, 4, 4, 4});
        for (int i = 0; i < n; ++i) {
            ctx.contexts.push_back(random_tensor({1, 3, 4, 4, 4}, rng, 0.0, 1.0));
            sum = Tensor<double>::add(sum, ctx.contexts.back());
        }
        worst = std::max(worst, max_diff(pyr.aggregate_cascaded(ctx, false), sum));
    }
    char detail[96];
    std::snprintf(detail, sizeof detail, "max |cascade - sum| %.3e over n in 2..6", worst);
    criterion(4, "Eq.1 identity", worst < 1e-12, detail);
}

// ---------------------------------------------------------------- criterion 5

void criterion5() {
    std::mt19937_64 rng(25);
    bool ok = true;
    double spot_err = 1e9;

    {  // zero-weight h: out = ReLU(X^ (1 + tanh X^)); X^ = 1 spot value
        GuidedResidualBlock<double> grb(2, 2, 1, "g", 3);
        for (auto* c : {&grb.h().conv1(), &grb.h().conv2()}) {
            c->weight().value = Tensor<double>::zeros(c->weight().value.extents());
            c->bias().value = Tensor<double>::zeros(c->bias().value.extents());
        }
        auto x = random_tensor({1, 2, 3, 3, 3}, rng);
        auto g = random_tensor({1, 2, 3, 3, 3}, rng);
        x[0] = 0.25;
        g[0] = 0.75;  // fused value exactly 1 at element 0
        auto out = grb.forward(x, g, false);
        for (int64_t i = 0; i < out.size(); ++i) {
            const double f = x[i] + g[i];
            const double want = std::max(0.0, f * (1.0 + std::tanh(f)));
            if (std::fabs(out[i] - want) > 1e-12) ok = false;
        }
        spot_err = std::fabs(out[0] - 1.761594);
    }

    {  // no_amplify with zero guidance reduces to BRB with identical weights
        GuidedResidualBlock<double> grb(3, 3, 1, "g", 4, GrbMode::no_amplify);
        BasicResidualBlock<double> brb(3, 1, "b", 4);
        brb.h().conv1().weight().value = grb.h().conv1().weight().value;
        brb.h().conv1().bias().value = grb.h().conv1().bias().value;
        brb.h().conv2().weight().value = grb.h().conv2().weight().value;
        brb.h().conv2().bias().value = grb.h().conv2().bias().value;
        auto x = random_tensor({1, 3, 4, 4, 4}, rng);
        auto zero = Tensor<double>::zeros(x.extents());
        if (!(grb.forward(x, zero, false) == brb.forward(x, false))) ok = false;
    }

    {  // no_guidance output is independent of g, bit for bit
        GuidedResidualBlock<double> grb(3, 3, 1, "g", 5, GrbMode::no_guidance);
        auto x = random_tensor({1, 3, 4, 4, 4}, rng);
        auto g1 = random_tensor(x.extents(), rng);
        auto g2 = random_tensor(x.extents(), rng);
        if (!(grb.forward(x, g1, false) == grb.forward(x, g2, false))) ok = false;
    }

    char detail[96];
    std::snprintf(detail, sizeof detail, "spot |out(1) - 1.761594| = %.2e, ablations exact",
                  spot_err);
    criterion(5, "GRB algebra", ok && spot_err < 1e-6, detail);
}

// ---------------------------------------------------------------- criterion 6

VoxelState vis_oracle(const DepthImage& img, const VoxelGridSpec& spec, int64_t z, int64_t y,
                      int64_t x) {
    const auto c = spec.center(z, y, x);
    double t[3] = {c[0] - img.translation[0], c[1] - img.translation[1],
                   c[2] - img.translation[2]};
    double cam[3] = {0, 0, 0};
    for (int i = 0; i < 3; ++i)
        cam[i] = img.rotation[0][i] * t[0] + img.rotation[1][i] * t[1] + img.rotation[2][i] * t[2];
    if (cam[2] <= 0) return VoxelState::outside_frustum;
    const int ui = static_cast<int>(std::lround(img.fx * cam[0] / cam[2] + img.cx));
    const int vi = static_cast<int>(std::lround(img.fy * cam[1] / cam[2] + img.cy));
    if (ui < 0 || ui >= img.width || vi < 0 || vi >= img.height)
        return VoxelState::outside_frustum;
    const double d = img.at(ui, vi);
    if (d <= 0) return VoxelState::outside_frustum;
    if (cam[2] < d - spec.tau / 2) return VoxelState::visible_empty;
    if (cam[2] <= d + spec.tau / 2) return VoxelState::surface;
    return VoxelState::occluded;
}

void criterion6() {
    std::mt19937_64 rng(26);
    std::uniform_real_distribution<double> dd(0.4, 1.6);
    std::uniform_int_distribution<int> hole(0, 4);
    std::uniform_int_distribution<int64_t> dim(6, 16);
    double worst = 0;
    bool range_ok = true;
    int scenes = 0;
    for (; scenes < 100; ++scenes) {
        DepthImage img;
        img.width = 8;
        img.height = 8;
        img.fx = img.fy = 8;
        img.cx = img.cy = 3.5;
        img.depth.assign(64, 0.0);
        for (auto& d : img.depth) d = hole(rng) == 0 ? 0.0 : dd(rng);
        VoxelGridSpec spec;
        spec.dims = {dim(rng), dim(rng), dim(rng)};
        spec.voxel_size = 0.12;
        spec.origin = {-0.06 * double(spec.dims[2]), -0.06 * double(spec.dims[1]), 0.1};

        auto got = compute_ftsdf(img, spec);
        const auto pts = backproject(img);
        int64_t i = 0;
        for (int64_t z = 0; z < spec.dims[0]; ++z)
            for (int64_t y = 0; y < spec.dims[1]; ++y)
                for (int64_t x = 0; x < spec.dims[2]; ++x, ++i) {
                    double want = 0;
                    const auto s = vis_oracle(img, spec, z, y, x);
                    if (s != VoxelState::outside_frustum && !pts.empty()) {
                        const auto c = spec.center(z, y, x);
                        double best = spec.tau;
                        for (const auto& p : pts)
                            best = std::min(best, std::sqrt((p[0] - c[0]) * (p[0] - c[0]) +
                                                            (p[1] - c[1]) * (p[1] - c[1]) +
                                                            (p[2] - c[2]) * (p[2] - c[2])));
                        want = (s == VoxelState::occluded ? -1.0 : 1.0) * (1.0 - best / spec.tau);
                    }
                    worst = std::max(worst, std::fabs(got.values[i] - want));
                    if (got.values[i] < -1.0 || got.values[i] > 1.0) range_ok = false;
                }
    }

    // a depth sample placed exactly on a voxel center must read |v| = 1
    VoxelGridSpec spec;
    spec.dims = {40, 3, 3};
    spec.voxel_size = 0.1;
    spec.origin = {-0.15, -0.15, 0.0};
    DepthImage img;
    img.width = img.height = 3;
    img.fx = img.fy = 3;
    img.cx = img.cy = 1.0;
    img.depth.assign(9, 0.0);
    img.depth[1 * 3 + 1] = 1.25;  // optical axis, on the center of voxel (12,1,1)
    auto hit = compute_ftsdf(img, spec);
    const bool surface_ok = std::fabs(std::fabs(hit.values[(12 * 3 + 1) * 3 + 1]) - 1.0) < 1e-12;
    // voxels beyond truncation on the same axis are exactly zero
    const bool trunc_ok = hit.values[(5 * 3 + 1) * 3 + 1] == 0.0;

    char detail[128];
    std::snprintf(detail, sizeof detail,
                  "%d scenes, max |prod - oracle| %.3e, surface/truncation exact: %s", scenes,
                  worst, surface_ok && trunc_ok ? "yes" : "no");
    criterion(6, "fTSDF oracle", worst < 1e-9 && range_ok && surface_ok && trunc_ok, detail);
}

// ---------------------------------------------------------------- criterion 7

void criterion7() {
    std::mt19937_64 rng(27);
    bool ok = true;

    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<int64_t> dim(2, 8);
        VoxelGridSpec spec;
        spec.dims = {dim(rng), dim(rng), dim(rng)};
        const size_t n = static_cast<size_t>(spec.voxel_count());
        const int C = 4;
        std::uniform_int_distribution<int> lab(0, C - 1), st(0, 3);
        LabelVolume pred{spec, std::vector<uint8_t>(n)}, gt{spec, std::vector<uint8_t>(n)};
        VisibilityVolume vis{spec, std::vector<uint8_t>(n)};
        for (size_t i = 0; i < n; ++i) {
            pred.labels[i] = static_cast<uint8_t>(lab(rng));
            gt.labels[i] = static_cast<uint8_t>(lab(rng));
            vis.state[i] = static_cast<uint8_t>(st(rng));
        }
        const auto rep = evaluate(pred, gt, vis, C);

        // exhaustive confusion loop, one pass per quantity
        auto in_domain = [&](size_t i) {
            return vis.state[i] == uint8_t(VoxelState::occluded) ||
                   vis.state[i] == uint8_t(VoxelState::surface);
        };
        int64_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < n; ++i)
            if (in_domain(i)) {
                if (pred.labels[i] && gt.labels[i]) ++tp;
                if (pred.labels[i] && !gt.labels[i]) ++fp;
                if (!pred.labels[i] && gt.labels[i]) ++fn;
            }
        auto ratio = [](int64_t a, int64_t b) { return b == 0 ? 0.0 : double(a) / double(b); };
        if (rep.sc_precision != ratio(tp, tp + fp) || rep.sc_recall != ratio(tp, tp + fn) ||
            rep.sc_iou != ratio(tp, tp + fp + fn))
            ok = false;
        double sum = 0;
        int present = 0;
        for (int c = 1; c < C; ++c) {
            int64_t t = 0, f = 0, m = 0;
            for (size_t i = 0; i < n; ++i)
                if (in_domain(i)) {
                    if (pred.labels[i] == c && gt.labels[i] == c) ++t;
                    if (pred.labels[i] == c && gt.labels[i] != c) ++f;
                    if (pred.labels[i] != c && gt.labels[i] == c) ++m;
                }
            if (rep.ssc_iou[static_cast<size_t>(c - 1)] != ratio(t, t + f + m)) ok = false;
            if (t + f + m > 0) {
                sum += ratio(t, t + f + m);
                ++present;
            }
        }
        if (rep.ssc_mean_iou != (present ? sum / present : 0.0)) ok = false;
    }

    // hand cases on a 4-voxel strip, all in-domain
    VoxelGridSpec spec;
    spec.dims = {1, 1, 4};
    VisibilityVolume vis{spec, std::vector<uint8_t>(4, uint8_t(VoxelState::occluded))};
    LabelVolume gt{spec, {1, 1, 1, 1}};
    const auto perfect = evaluate(gt, gt, vis, 3);
    if (perfect.sc_iou != 1.0 || perfect.sc_precision != 1.0 || perfect.sc_recall != 1.0)
        ok = false;

    // 2 of 4 occupied found, plus 2 false positives elsewhere
    VoxelGridSpec spec8;
    spec8.dims = {1, 2, 4};
    VisibilityVolume vis8{spec8, std::vector<uint8_t>(8, uint8_t(VoxelState::occluded))};
    LabelVolume gt8{spec8, {1, 1, 1, 1, 0, 0, 0, 0}};
    LabelVolume pr8{spec8, {1, 1, 0, 0, 1, 1, 0, 0}};
    const auto h = evaluate(pr8, gt8, vis8, 3);
    const bool hand_ok = h.sc_precision == 0.5 && h.sc_recall == 0.5 &&
                         std::fabs(h.sc_iou - 1.0 / 3.0) < 1e-15;

    criterion(7, "metrics oracle", ok && hand_ok,
              ok ? "40 random volumes exact; hand cases 1.0 and 0.5/0.5/0.3333"
                 : "oracle mismatch");
}

// ---------------------------------------------------------------- criterion 8

void criterion8() {
    const auto t0 = std::chrono::steady_clock::now();
    VoxelGridSpec spec;
    spec.dims = {60, 36, 60};
    spec.voxel_size = 0.08;
    spec.origin = {-2.4, -1.44, 0.0};
    auto scene = make_wall_scene(spec, /*with_box=*/false);

    auto cfg = desk_config();
    Network<float> net(cfg, 7);
    auto input = Tensor<float>::zeros({1, 1, 60, 36, 60});
    for (int64_t i = 0; i < input.size(); ++i)
        input[i] = static_cast<float>(scene.ftsdf.values[i]);

    // lr 0.01, momentum 0.9, wd 0.0005; 1:1 balanced sampling keeps the
    // empty class from dominating the single-scene gradient
    SgdConfig sgd;
    auto res = train_toy(net, input, scene.labels, scene.vis, sgd, 200, 1, 7);

    // window-10 moving average must decrease across every window-sized lag
    std::vector<double> smooth;
    for (size_t k = 0; k + 10 <= res.loss.size(); ++k) {
        double s = 0;
        for (size_t j = k; j < k + 10; ++j) s += res.loss[j];
        smooth.push_back(s / 10);
    }
    bool monotone = true;
    for (size_t k = 0; k + 10 < smooth.size(); ++k)
        if (smooth[k + 10] >= smooth[k]) monotone = false;

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "sc_iou %.4f, smoothed loss %.4f -> %.4f (%s), %.0f s",
                  res.metrics.sc_iou, smooth.front(), smooth.back(),
                  monotone ? "monotone" : "NOT monotone", secs);
    criterion(8, "end-to-end overfit", res.metrics.sc_iou > 0.9 && monotone && secs < 600,
              detail);
}

// ---------------------------------------------------------------- criterion 9

void criterion9() {
    std::mt19937_64 rng(29);
    bool dims_ok = true;
    for (int trial = 0; trial < 6; ++trial) {
        auto cfg = tiny_config();
        std::uniform_int_distribution<int64_t> dim(1, 5);
        cfg.input_dims = {4 * dim(rng), 4 * dim(rng), 4 * dim(rng)};
        Network<double> net(cfg, 3);
        auto in = Tensor<double>::zeros(
            {1, 1, cfg.input_dims[0], cfg.input_dims[1], cfg.input_dims[2]});
        auto out = net.forward(in, false);
        if (out.extent(2) != cfg.input_dims[0] || out.extent(3) != cfg.input_dims[1] ||
            out.extent(4) != cfg.input_dims[2])
            dims_ok = false;
    }

    auto cfg = desk_config();
    cfg.input_dims = {20, 12, 20};
    auto in = random_tensor({1, 1, 20, 12, 20}, rng);
    std::map<std::string, Tensor<double>> tr_full, tr_half, tr_quarter;
    Network<double> full(cfg, 99);
    full.forward(in, false, &tr_full);
    cfg.output_resolution = OutputResolution::half;
    Network<double> half(cfg, 99);
    half.forward(in, false, &tr_half);
    cfg.output_resolution = OutputResolution::quarter;
    Network<double> quarter(cfg, 99);
    quarter.forward(in, false, &tr_quarter);
    const bool prefix_ok = tr_quarter.at("ccp.out") == tr_full.at("ccp.out") &&
                           tr_half.at("grr0.out") == tr_full.at("grr0.out");

    criterion(9, "full-resolution contract", dims_ok && prefix_ok,
              "output dims == input dims on random configs; quarter/half traces prefix full");
}

// --------------------------------------------------------------- criterion 10

void criterion10() {
    const auto ccpnet = profile(full_config());
    const auto ref = profile(sscnet_reference_config());
    const double flops = double(ccpnet.total_flops());
    const double ratio = double(ref.total_params) / double(ccpnet.total_params);
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "full-scale %lld params, %.2f GFLOPs; reference %lld params (%.2fx)",
                  static_cast<long long>(ccpnet.total_params), flops / 1e9,
                  static_cast<long long>(ref.total_params), ratio);
    criterion(10, "efficiency envelope",
              ccpnet.total_params >= 50000 && ccpnet.total_params <= 200000 &&
                  flops >= 5e9 && flops <= 25e9 && ratio >= 8.0,
              detail);
}

}  // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    std::printf("%d/10 criteria passed\n", 10 - g_failures);
    return g_failures;
}
