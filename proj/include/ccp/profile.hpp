#pragma once
// Static cost accounting for a NetworkConfig: per-layer parameter and MAC
// counts without executing anything. Layer rows mirror the parameter names
// the built network registers, so totals can be cross-checked against a live
// instance. FLOPs = 2 * MACs; biases, pooling, and activations are excluded.

#include <cstdio>
#include <string>
#include <vector>

#include "ccp/network.hpp"

namespace ccp {

struct CostRow {
    std::string name;
    int64_t params = 0;
    int64_t macs = 0;
};

struct CostReport {
    std::vector<CostRow> rows;
    int64_t total_params = 0;
    int64_t total_macs = 0;

    int64_t total_flops() const { return 2 * total_macs; }
};

namespace detail {

inline int64_t conv_params(const ConvSpec& s) { return s.weight_params() + s.filters; }

// weight MACs per output voxel times output voxels (stride-1, same-size)
inline int64_t conv_macs(const ConvSpec& s, const std::array<int64_t, 3>& dims) {
    return s.weight_params() * dims[0] * dims[1] * dims[2];
}

inline int64_t deconv_params(const DeconvSpec& s) {
    return int64_t(s.filters) * s.in_channels * s.kernel * s.kernel * s.kernel + s.filters;
}

// every input voxel multiplies the full kernel against all filters
inline int64_t deconv_macs(const DeconvSpec& s, const std::array<int64_t, 3>& in_dims) {
    return int64_t(s.filters) * s.in_channels * s.kernel * s.kernel * s.kernel * in_dims[0] *
           in_dims[1] * in_dims[2];
}

}  // namespace detail

inline CostReport profile(const NetworkConfig& cfg) {
    cfg.validate();
    CostReport rep;
    auto row = [&](const std::string& name, int64_t params, int64_t macs) {
        rep.rows.push_back({name, params, macs});
        rep.total_params += params;
        rep.total_macs += macs;
    };

    std::array<int64_t, 3> dims = cfg.input_dims;
    for (size_t i = 0; i < cfg.encoder.size(); ++i) {
        const auto& st = cfg.encoder[i];
        row("enc" + std::to_string(i), detail::conv_params(st.conv),
            detail::conv_macs(st.conv, dims));
        if (st.pool_after) {
            for (auto& d : dims) d /= 2;
            row("pool" + std::to_string(i), 0, 0);
        }
    }

    const int bc = cfg.pyramid.branch_channels;
    for (int i = 0; i < cfg.pyramid.scales(); ++i) {
        const ConvSpec dil{.in_channels = cfg.encoder_out_channels(), .filters = bc, .kernel = 3,
                           .dilation = cfg.pyramid.dilation_rates[static_cast<size_t>(i)],
                           .subvolumes = cfg.pyramid.branch_subvolumes};
        const ConvSpec red{.in_channels = bc, .filters = bc, .kernel = 1};
        const std::string bn = "ccp.branch" + std::to_string(i);
        row(bn + ".dilated", detail::conv_params(dil), detail::conv_macs(dil, dims));
        row(bn + ".reduce", detail::conv_params(red), detail::conv_macs(red, dims));
    }
    if (cfg.pyramid.mode == PyramidMode::cascaded) {
        const ConvSpec c3{.in_channels = bc, .filters = bc, .kernel = 3,
                          .subvolumes = cfg.pyramid.cascade_subvolumes};
        for (int i = 0; i + 1 < cfg.pyramid.scales(); ++i) {
            const std::string cn = "ccp.cascade" + std::to_string(i) + ".h";
            row(cn + ".conv1", detail::conv_params(c3), detail::conv_macs(c3, dims));
            row(cn + ".conv2", detail::conv_params(c3), detail::conv_macs(c3, dims));
        }
    } else {
        const ConvSpec cat{.in_channels = bc * cfg.pyramid.scales(), .filters = bc, .kernel = 1};
        row("ccp.concat", detail::conv_params(cat), detail::conv_macs(cat, dims));
    }

    // refinement stages beyond the configured resolution hold parameters but
    // never execute; their MACs are reported as zero
    int active = 1 << cfg.pool_count();
    const int target = resolution_factor(cfg.output_resolution);
    int ch = bc;
    int head_ch = bc;
    for (size_t i = 0; i < cfg.grr.size(); ++i) {
        const auto& st = cfg.grr[i];
        const bool runs = active > target;
        const DeconvSpec de{.in_channels = ch, .filters = st.channels, .kernel = 2, .stride = 2};
        const std::string name = "grr" + std::to_string(i);
        row(name + ".deconv", detail::deconv_params(de), runs ? detail::deconv_macs(de, dims) : 0);
        if (runs) {
            for (auto& d : dims) d *= 2;
            active /= 2;
            head_ch = st.channels;
        }
        const ConvSpec h3{.in_channels = st.channels, .filters = st.channels, .kernel = 3,
                          .subvolumes = st.grb_subvolumes};
        row(name + ".grb.h.conv1", detail::conv_params(h3), runs ? detail::conv_macs(h3, dims) : 0);
        row(name + ".grb.h.conv2", detail::conv_params(h3), runs ? detail::conv_macs(h3, dims) : 0);
        const int guid = cfg.tap_channels(st.guidance_tap);
        if (guid != st.channels) {
            const ConvSpec pr{.in_channels = guid, .filters = st.channels, .kernel = 1};
            row(name + ".grb.proj", detail::conv_params(pr), runs ? detail::conv_macs(pr, dims) : 0);
        }
        ch = st.channels;
    }

    const ConvSpec head{.in_channels = head_ch, .filters = cfg.num_classes, .kernel = 1};
    const char* hn = cfg.output_resolution == OutputResolution::full      ? "head.full"
                     : cfg.output_resolution == OutputResolution::half    ? "head.half"
                                                                          : "head.quarter";
    row(hn, detail::conv_params(head), detail::conv_macs(head, dims));
    return rep;
}

struct CompareReport {
    int64_t params_a = 0, params_b = 0;
    int64_t macs_a = 0, macs_b = 0;
    double params_ratio = 0, macs_ratio = 0, flops_ratio = 0;
};

inline CompareReport compare(const NetworkConfig& a, const NetworkConfig& b) {
    const auto ra = profile(a), rb = profile(b);
    CompareReport c;
    c.params_a = ra.total_params;
    c.params_b = rb.total_params;
    c.macs_a = ra.total_macs;
    c.macs_b = rb.total_macs;
    c.params_ratio = double(ra.total_params) / double(rb.total_params);
    c.macs_ratio = double(ra.total_macs) / double(rb.total_macs);
    c.flops_ratio = c.macs_ratio;  // FLOPs = 2*MACs on both sides
    return c;
}

inline std::string format_report(const CostReport& rep, bool tsv = false) {
    char buf[160];
    std::string out;
    if (tsv) {
        out += "layer\tparams\tmacs\n";
        for (const auto& r : rep.rows) {
            std::snprintf(buf, sizeof buf, "%s\t%lld\t%lld\n", r.name.c_str(),
                          static_cast<long long>(r.params), static_cast<long long>(r.macs));
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "total\t%lld\t%lld\n",
                      static_cast<long long>(rep.total_params),
                      static_cast<long long>(rep.total_macs));
        out += buf;
    } else {
        std::snprintf(buf, sizeof buf, "%-24s %12s %16s\n", "layer", "params", "MACs");
        out += buf;
        for (const auto& r : rep.rows) {
            std::snprintf(buf, sizeof buf, "%-24s %12lld %16lld\n", r.name.c_str(),
                          static_cast<long long>(r.params), static_cast<long long>(r.macs));
            out += buf;
        }
        std::snprintf(buf, sizeof buf, "%-24s %12lld %16lld\n", "total",
                      static_cast<long long>(rep.total_params),
                      static_cast<long long>(rep.total_macs));
        out += buf;
        std::snprintf(buf, sizeof buf, "params: %.1fk  FLOPs: %.2fG\n",
                      rep.total_params / 1e3, rep.total_flops() / 1e9);
        out += buf;
    }
    return out;
}

inline std::string format_compare(const CompareReport& c) {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof buf, "%-10s %14s %14s %8s\n", "total", "a", "b", "a/b");
    out += buf;
    std::snprintf(buf, sizeof buf, "%-10s %14lld %14lld %8.3f\n", "params",
                  static_cast<long long>(c.params_a), static_cast<long long>(c.params_b),
                  c.params_ratio);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-10s %14lld %14lld %8.3f\n", "macs",
                  static_cast<long long>(c.macs_a), static_cast<long long>(c.macs_b),
                  c.macs_ratio);
    out += buf;
    std::snprintf(buf, sizeof buf, "%-10s %14lld %14lld %8.3f\n", "flops",
                  static_cast<long long>(2 * c.macs_a), static_cast<long long>(2 * c.macs_b),
                  c.flops_ratio);
    out += buf;
    return out;
}

// A reference configuration shaped like the classic dense completion network:
// wide single-group dilated convolutions and a parallel multi-scale concat,
// emitting quarter-resolution scores. Used for efficiency comparisons.
inline NetworkConfig sscnet_reference_config() {
    NetworkConfig cfg;
    cfg.input_dims = {240, 144, 240};
    cfg.num_classes = 12;
    cfg.encoder = {
        {{.in_channels = 1, .filters = 16, .kernel = 3}, true, "stem"},
        {{.in_channels = 16, .filters = 32, .kernel = 3}, true, "enc1"},
        {{.in_channels = 32, .filters = 64, .kernel = 3}, false, ""},
        {{.in_channels = 64, .filters = 64, .kernel = 3}, false, ""},
        {{.in_channels = 64, .filters = 64, .kernel = 3, .dilation = 2}, false, ""},
        {{.in_channels = 64, .filters = 64, .kernel = 3, .dilation = 2}, false, ""},
        {{.in_channels = 64, .filters = 64, .kernel = 3, .dilation = 2}, false, ""},
        {{.in_channels = 64, .filters = 64, .kernel = 3, .dilation = 2}, false, ""},
    };
    cfg.pyramid = PyramidConfig{.dilation_rates = {2, 1}, .branch_channels = 64,
                                .mode = PyramidMode::parallel};
    cfg.grr = {
        {.channels = 16, .guidance_tap = "enc1"},
        {.channels = 16, .guidance_tap = "stem"},
    };
    cfg.output_resolution = OutputResolution::quarter;
    return cfg;
}

}  // namespace ccp
