// ccp: single-binary CLI wiring voxelization, training, evaluation,
// gradient checking, cost profiling, and pyramid ablations.
//
// Exit codes: 0 success, 1 check/test failure, 2 usage or parse/IO error.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ccp/checkpoint.hpp"
#include "ccp/config.hpp"
#include "ccp/gradcheck.hpp"
#include "ccp/network.hpp"
#include "ccp/profile.hpp"
#include "ccp/rng.hpp"
#include "ccp/synthetic.hpp"
#include "ccp/train.hpp"
#include "ccp/voxel.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

int threads_from_env() {
    if (const char* env = std::getenv("CCP_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return 1;
}

struct ManifestWriter {
    std::string command;
    std::string config_path;
    uint64_t seed = 0;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write(const std::string& path) const {
        std::string id_src = command + "|" + config_path + "|" + std::to_string(seed);
        for (const auto& i : inputs) id_src += "|" + i;
        char id[32];
        std::snprintf(id, sizeof id, "%016llx",
                      static_cast<unsigned long long>(ccp::fnv1a(id_src)));
        json j{{"command", command},
               {"config", config_path},
               {"seed", seed},
               {"inputs", inputs},
               {"outputs", outputs},
               {"run_id", id},
               {"threads", threads_from_env()},
               {"elapsed_seconds",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
        std::ofstream os(path);
        if (!os) throw ccp::IoError("cannot write manifest: " + path);
        os << j.dump(2) << "\n";
    }
};

ccp::VoxelGridSpec parse_grid_spec(const std::string& name) {
    ccp::VoxelGridSpec spec;
    if (name == "desk") {
        spec.dims = {60, 36, 60};
        spec.voxel_size = 0.08;
        spec.origin = {-2.4, -1.44, 0.0};
    } else if (name == "full") {
        spec.dims = {240, 144, 240};
        spec.voxel_size = 0.02;
        spec.origin = {-2.4, -1.44, 0.0};
    } else if (name == "tiny") {
        spec.dims = {16, 16, 16};
        spec.voxel_size = 0.1;
        spec.origin = {-0.8, -0.8, 0.0};
    } else {
        int64_t d = 0, h = 0, w = 0;
        if (std::sscanf(name.c_str(), "%lldx%lldx%lld", reinterpret_cast<long long*>(&d),
                        reinterpret_cast<long long*>(&h),
                        reinterpret_cast<long long*>(&w)) != 3 ||
            d < 1 || h < 1 || w < 1)
            throw ccp::ConfigError("bad --grid-spec '" + name + "' (desk|full|tiny|DxHxW)");
        spec.dims = {d, h, w};
        spec.voxel_size = 0.08;
        spec.origin = {-double(w) * spec.voxel_size / 2, -double(h) * spec.voxel_size / 2, 0.0};
    }
    return spec;
}

struct Scene {
    ccp::FtsdfVolume ftsdf;
    ccp::LabelVolume labels;
    ccp::VisibilityVolume vis;
};

Scene load_scene(const std::string& prefix, int num_classes) {
    Scene s;
    s.ftsdf = ccp::load_ftsdf(prefix + ".ftsdf.vox");
    s.labels = ccp::load_labels(prefix + ".labels.vox", num_classes);
    s.vis = ccp::load_visibility(prefix + ".vis.vox");
    if (s.ftsdf.spec.dims != s.labels.spec.dims || s.labels.spec.dims != s.vis.spec.dims)
        throw ccp::ShapeError("scene volumes disagree on dimensions");
    return s;
}

ccp::RunConfig config_or_default(const std::string& path) {
    if (path.empty()) return ccp::RunConfig{};
    return ccp::load_run_config(path);
}

template <class T>
ccp::Tensor<T> scene_input(const Scene& s) {
    const auto& d = s.ftsdf.spec.dims;
    auto t = ccp::Tensor<T>::zeros({1, 1, d[0], d[1], d[2]});
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(s.ftsdf.values[i]);
    return t;
}

void check_scene_matches(const ccp::NetworkConfig& net, const Scene& s) {
    if (s.ftsdf.spec.dims != net.input_dims)
        throw ccp::ShapeError("scene dims do not match the configured network input");
}

int cmd_voxelize(const std::string& depth_path, const std::string& camera_path,
                 const std::string& grid, const std::string& out) {
    ManifestWriter mf{"voxelize", "", 0, {depth_path, camera_path}};
    auto spec = parse_grid_spec(grid);
    auto depth = ccp::load_depth_pgm(depth_path);
    ccp::load_camera(camera_path, depth);

    auto ftsdf = ccp::compute_ftsdf(depth, spec);
    if (ftsdf.empty_surface)
        std::cerr << "warning: no valid depth samples; fTSDF volume is all zero\n";
    auto vis = ccp::compute_visibility(depth, spec);
    ccp::save_ftsdf(ftsdf, out + ".ftsdf.vox");
    ccp::save_visibility(vis, out + ".vis.vox");
    mf.outputs = {out + ".ftsdf.vox", out + ".vis.vox"};
    mf.write(out + ".manifest.json");
    std::cout << "wrote " << out << ".ftsdf.vox (" << spec.dims[0] << "x" << spec.dims[1] << "x"
              << spec.dims[2] << ")\n";
    return 0;
}

int cmd_make_fixture(const std::string& grid, const std::string& out, bool no_box) {
    ManifestWriter mf{"make-fixture", "", 0, {}};
    auto spec = parse_grid_spec(grid);
    auto scene = ccp::make_wall_scene(spec, !no_box);
    ccp::save_depth_pgm(scene.depth, out + ".depth.pgm");
    ccp::save_camera(scene.depth, out + ".camera.txt");
    ccp::save_ftsdf(scene.ftsdf, out + ".ftsdf.vox");
    ccp::save_visibility(scene.vis, out + ".vis.vox");
    ccp::save_labels(scene.labels, out + ".labels.vox");
    mf.outputs = {out + ".depth.pgm", out + ".camera.txt", out + ".ftsdf.vox", out + ".vis.vox",
                  out + ".labels.vox"};
    mf.write(out + ".manifest.json");
    std::cout << "wrote synthetic scene " << out << ".*\n";
    return 0;
}

int cmd_train_toy(const std::string& config_path, const std::string& scene_prefix, int steps,
                  uint64_t seed, const std::string& out_ckpt) {
    ManifestWriter mf{"train-toy", config_path, seed, {scene_prefix}};
    auto cfg = config_or_default(config_path);
    auto scene = load_scene(scene_prefix, cfg.network.num_classes);
    check_scene_matches(cfg.network, scene);
    if (steps >= 0) cfg.steps = steps;

    ccp::Network<float> net(cfg.network, seed);
    auto input = scene_input<float>(scene);
    auto res = ccp::train_toy(
        net, input, scene.labels, scene.vis, cfg.sgd, cfg.steps, cfg.sample_ratio, seed,
        std::function<void(int, float)>(
            [](int s, float l) { std::printf("step %d loss %.6f\n", s, double(l)); }));
    ccp::save_checkpoint(net, out_ckpt);

    const std::string report = ccp::format_metrics(res.metrics);
    std::cout << report;
    std::ofstream ms(out_ckpt + ".metrics.txt");
    ms << report;
    mf.outputs = {out_ckpt, out_ckpt + ".metrics.txt"};
    mf.write(out_ckpt + ".manifest.json");
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt,
             const std::string& scene_prefix, const std::string& out_report) {
    ManifestWriter mf{"eval", config_path, 0, {ckpt, scene_prefix}};
    auto cfg = config_or_default(config_path);
    auto scene = load_scene(scene_prefix, cfg.network.num_classes);
    check_scene_matches(cfg.network, scene);

    ccp::Network<float> net(cfg.network, 1);
    ccp::load_checkpoint(net, ckpt);
    auto scores = net.forward(scene_input<float>(scene), false);
    auto lab = net.predict_labels(scores);
    ccp::LabelVolume pred{scene.labels.spec,
                          std::vector<uint8_t>(scene.labels.labels.size(), 0)};
    for (size_t i = 0; i < pred.labels.size(); ++i)
        pred.labels[i] = static_cast<uint8_t>(lab[static_cast<int64_t>(i)]);
    auto rep = ccp::evaluate(pred, scene.labels, scene.vis, cfg.network.num_classes);
    if (rep.degenerate) std::cerr << "warning: empty evaluation domain\n";

    const std::string report = ccp::format_metrics(rep);
    std::cout << report;
    if (!out_report.empty()) {
        std::ofstream os(out_report);
        if (!os) throw ccp::IoError("cannot write report: " + out_report);
        os << report;
        mf.outputs = {out_report};
        mf.write(out_report + ".manifest.json");
    }
    return 0;
}

// Per-layer finite-difference suite over every layer shape the config builds,
// each exercised in isolation on a small random input.
int cmd_gradcheck(const std::string& config_path, uint64_t seed, int samples) {
    auto cfg = config_or_default(config_path);
    std::mt19937_64 rng(seed ^ 0x5eedull);
    std::uniform_real_distribution<double> dist(-1, 1);
    using Td = ccp::Tensor<double>;

    auto fill = [&](Td& t) {
        for (int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    };
    auto dot = [](const Td& a, const Td& b) {
        double acc = 0;
        for (int64_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
        return acc;
    };
    // sampled central differences against an analytic gradient
    auto fd = [&](const std::function<double()>& loss, Td& x, const Td& grad) {
        const double eps = 1e-5;
        double worst = 0;
        std::uniform_int_distribution<int64_t> pick(0, x.size() - 1);
        for (int s = 0; s < samples; ++s) {
            const int64_t i = pick(rng);
            const double orig = x[i];
            x[i] = orig + eps;
            const double lp = loss();
            x[i] = orig - eps;
            const double lm = loss();
            x[i] = orig;
            worst = std::max(worst, ccp::rel_err(grad[i], (lp - lm) / (2 * eps)));
        }
        return worst;
    };

    struct Row {
        std::string name;
        double err;
        double tol;
    };
    std::vector<Row> rows;

    auto check_conv = [&](const ccp::ConvSpec& spec, const std::string& name) {
        ccp::Conv3d<double> layer(spec, name, seed);
        auto in = Td::zeros({1, spec.in_channels, 5, 5, 5});
        fill(in);
        auto out = layer.forward(in, true);
        auto gout = Td::zeros(out.extents());
        fill(gout);
        auto gin = layer.backward(gout);
        auto loss = [&]() {
            ccp::Conv3d<double> l2 = layer;
            return dot(l2.forward(in, false), gout);
        };
        double e = fd(loss, layer.weight().value, layer.weight().grad);
        e = std::max(e, fd(loss, layer.bias().value, layer.bias().grad));
        e = std::max(e, fd(loss, in, gin));
        rows.push_back({name, e, 1e-4});
    };

    for (size_t i = 0; i < cfg.network.encoder.size(); ++i)
        check_conv(cfg.network.encoder[i].conv, "enc" + std::to_string(i));

    {  // pooling
        ccp::MaxPool3d<double> pool(2);
        auto in = Td::zeros({1, 3, 4, 4, 4});
        fill(in);
        auto out = pool.forward(in, true);
        auto gout = Td::zeros(out.extents());
        fill(gout);
        auto gin = pool.backward(gout);
        auto loss = [&]() {
            ccp::MaxPool3d<double> p2 = pool;
            return dot(p2.forward(in, false), gout);
        };
        rows.push_back({"pool", fd(loss, in, gin), 1e-4});
    }

    {  // context pyramid, both halves, in the configured mode
        ccp::ContextPyramid<double> pyr(cfg.network.pyramid, cfg.network.encoder_out_channels(),
                                        "ccp", seed);
        auto in = Td::zeros({1, cfg.network.encoder_out_channels(), 4, 4, 4});
        fill(in);
        auto ctx = pyr.extract(in, true);
        auto out = pyr.aggregate(ctx, true);
        auto gout = Td::zeros(out.extents());
        fill(gout);
        auto gctx = pyr.aggregate_backward(gout);
        auto gin = pyr.extract_backward(gctx);
        auto loss = [&]() {
            ccp::ContextPyramid<double> p2 = pyr;
            auto c = p2.extract(in, false);
            return dot(p2.aggregate(c, false), gout);
        };
        double e = fd(loss, in, gin);
        e = std::max(e, fd(loss, pyr.branch_convs()[0].weight().value,
                           pyr.branch_convs()[0].weight().grad));
        if (cfg.network.pyramid.mode == ccp::PyramidMode::cascaded) {
            auto& w = pyr.cascade_blocks().back().h().conv2().weight();
            e = std::max(e, fd(loss, w.value, w.grad));
        } else {
            auto& w = pyr.concat_conv().weight();
            e = std::max(e, fd(loss, w.value, w.grad));
        }
        rows.push_back({"pyramid", e, 1e-4});
    }

    int ch = cfg.network.pyramid.branch_channels;
    for (size_t i = 0; i < cfg.network.grr.size(); ++i) {
        const auto& st = cfg.network.grr[i];
        {
            ccp::Deconv3d<double> de(
                ccp::DeconvSpec{.in_channels = ch, .filters = st.channels, .kernel = 2, .stride = 2},
                "grr" + std::to_string(i) + ".deconv", seed);
            auto in = Td::zeros({1, ch, 3, 3, 3});
            fill(in);
            auto out = de.forward(in, true);
            auto gout = Td::zeros(out.extents());
            fill(gout);
            auto gin = de.backward(gout);
            auto loss = [&]() {
                ccp::Deconv3d<double> d2 = de;
                return dot(d2.forward(in, false), gout);
            };
            double e = fd(loss, de.weight().value, de.weight().grad);
            e = std::max(e, fd(loss, in, gin));
            rows.push_back({"grr" + std::to_string(i) + ".deconv", e, 1e-4});
        }
        {
            const int guid = cfg.network.tap_channels(st.guidance_tap);
            ccp::GuidedResidualBlock<double> grb(st.channels, guid, st.grb_subvolumes,
                                                 "grr" + std::to_string(i) + ".grb", seed,
                                                 st.grb_mode);
            auto x = Td::zeros({1, st.channels, 4, 4, 4});
            auto g = Td::zeros({1, guid, 4, 4, 4});
            fill(x);
            fill(g);
            auto out = grb.forward(x, g, true);
            auto gout = Td::zeros(out.extents());
            fill(gout);
            auto [gx, gg] = grb.backward(gout);
            auto loss = [&]() {
                ccp::GuidedResidualBlock<double> b2 = grb;
                return dot(b2.forward(x, g, false), gout);
            };
            double e = fd(loss, x, gx);
            if (st.grb_mode != ccp::GrbMode::no_guidance) e = std::max(e, fd(loss, g, gg));
            auto& w = grb.h().conv1().weight();
            e = std::max(e, fd(loss, w.value, w.grad));
            rows.push_back({"grr" + std::to_string(i) + ".grb", e, 1e-4});
        }
        ch = st.channels;
    }

    {  // softmax loss at 1e-6
        const int C = cfg.network.num_classes;
        ccp::VoxelGridSpec spec;
        spec.dims = {1, 2, 2};
        ccp::LabelVolume gt{spec, {0, 1, static_cast<uint8_t>(C - 1), 0}};
        ccp::SampleWeights sw{spec, {1, 1, 1, 0}};
        auto scores = Td::zeros({1, C, 1, 2, 2});
        fill(scores);
        auto res = ccp::softmax_loss(scores, gt, sw);
        auto loss = [&]() { return double(ccp::softmax_loss(scores, gt, sw).raw); };
        rows.push_back({"softmax_loss", fd(loss, scores, res.grad), 1e-6});
    }

    double worst = 0;
    std::string worst_name;
    bool ok = true;
    for (const auto& r : rows) {
        std::printf("%-16s max rel. error %.3e (tol %.0e)\n", r.name.c_str(), r.err, r.tol);
        if (r.err >= r.tol) ok = false;
        if (r.err > worst) {
            worst = r.err;
            worst_name = r.name;
        }
    }
    std::printf("gradcheck: worst %.3e (%s): %s\n", worst, worst_name.c_str(),
                ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_profile(const std::string& config_path, const std::string& compare_path, bool tsv) {
    auto cfg = config_or_default(config_path);
    if (!compare_path.empty()) {
        auto other = ccp::load_run_config(compare_path);
        std::cout << ccp::format_compare(ccp::compare(cfg.network, other.network));
        return 0;
    }
    std::cout << ccp::format_report(ccp::profile(cfg.network), tsv);
    return 0;
}

int cmd_pyramid_ablate(const std::string& config_path, const std::string& scene_prefix, int steps,
                       uint64_t seed) {
    auto base = config_or_default(config_path);
    auto scene = load_scene(scene_prefix, base.network.num_classes);
    check_scene_matches(base.network, scene);
    if (steps >= 0) base.steps = steps;
    auto input = scene_input<float>(scene);

    struct Variant {
        std::string name;
        ccp::NetworkConfig cfg;
    };
    std::vector<Variant> variants;
    {
        auto c = base.network;
        c.pyramid.mode = ccp::PyramidMode::cascaded;
        variants.push_back({"cascaded", c});
        c.pyramid.mode = ccp::PyramidMode::parallel;
        variants.push_back({"parallel", c});
        c = base.network;
        for (auto& st : c.grr) st.grb_mode = ccp::GrbMode::no_amplify;
        variants.push_back({"grb-no-amplify", c});
        c = base.network;
        for (auto& st : c.grr) st.grb_mode = ccp::GrbMode::no_guidance;
        variants.push_back({"grb-no-guidance", c});
    }

    std::printf("%-16s %12s %10s %14s\n", "variant", "final_loss", "sc_iou", "ssc_mean_iou");
    for (const auto& v : variants) {
        ccp::Network<float> net(v.cfg, seed);
        auto res = ccp::train_toy(net, input, scene.labels, scene.vis, base.sgd, base.steps,
                                  base.sample_ratio, seed);
        std::printf("%-16s %12.4f %10.4f %14.4f\n", v.name.c_str(),
                    res.loss.empty() ? 0.0 : double(res.loss.back()),
                    res.metrics.sc_iou, res.metrics.ssc_mean_iou);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CCPNet-style volumetric kernels: voxelize, train, evaluate, profile"};
    app.require_subcommand(1);

    std::string depth, camera, grid = "desk", out, config, scene, ckpt, report, compare_path;
    int steps = -1, samples = 2;
    uint64_t seed = 1;
    bool tsv = false, no_box = false;

    auto* vox = app.add_subcommand("voxelize", "depth image -> fTSDF + visibility volumes");
    vox->add_option("--depth", depth, "16-bit PGM depth (millimeters)")->required();
    vox->add_option("--camera", camera, "camera intrinsics + pose file")->required();
    vox->add_option("--grid-spec", grid, "desk|full|tiny|DxHxW");
    vox->add_option("--out", out, "output path prefix")->required();

    auto* fix = app.add_subcommand("make-fixture", "write a synthetic wall/box scene");
    fix->add_option("--grid-spec", grid, "desk|full|tiny|DxHxW");
    fix->add_option("--out", out, "output path prefix")->required();
    fix->add_flag("--no-box", no_box, "wall only, no occluder");

    auto* tr = app.add_subcommand("train-toy", "overfit one scene with SGD");
    tr->add_option("--config", config, "run configuration file");
    tr->add_option("--scene", scene, "scene path prefix (.ftsdf/.labels/.vis)")->required();
    tr->add_option("--steps", steps, "SGD steps (overrides config)");
    tr->add_option("--seed", seed, "seed for init and sampling");
    tr->add_option("--out-checkpoint", ckpt, "checkpoint output path")->required();

    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a scene");
    ev->add_option("--config", config, "run configuration file");
    ev->add_option("--checkpoint", ckpt, "checkpoint path")->required();
    ev->add_option("--scene", scene, "scene path prefix")->required();
    ev->add_option("--out-report", report, "metrics report output path");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference check of the built network");
    gc->add_option("--config", config, "run configuration file");
    gc->add_option("--seed", seed, "seed");
    gc->add_option("--samples", samples, "probes per sampled parameter");

    auto* pr = app.add_subcommand("profile", "static parameter / FLOP accounting");
    pr->add_option("--config", config, "run configuration file");
    pr->add_option("--compare", compare_path, "second config: print a/b ratios");
    pr->add_flag("--tsv", tsv, "tab-separated rows");

    auto* ab = app.add_subcommand("pyramid-ablate", "train aggregation/GRB variants");
    ab->add_option("--config", config, "run configuration file");
    ab->add_option("--scene", scene, "scene path prefix")->required();
    ab->add_option("--steps", steps, "SGD steps per variant");
    ab->add_option("--seed", seed, "seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (vox->parsed()) return cmd_voxelize(depth, camera, grid, out);
        if (fix->parsed()) return cmd_make_fixture(grid, out, no_box);
        if (tr->parsed()) return cmd_train_toy(config, scene, steps, seed, ckpt);
        if (ev->parsed()) return cmd_eval(config, ckpt, scene, report);
        if (gc->parsed()) return cmd_gradcheck(config, seed, samples);
        if (pr->parsed()) return cmd_profile(config, compare_path, tsv);
        if (ab->parsed()) return cmd_pyramid_ablate(config, scene, steps, seed);
    } catch (const ccp::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ccp::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ccp::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ccp::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
