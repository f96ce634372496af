#pragma once
// Procedural single-view scene: a frontal wall with an optional box floating
// in front of it. The box casts an occlusion shadow, so the grid contains all
// four visibility states and a non-trivial completion target.

#include "ccp/voxel.hpp"

namespace ccp {

struct SyntheticScene {
    DepthImage depth;
    FtsdfVolume ftsdf;
    VisibilityVolume vis;
    LabelVolume labels;
};

inline SyntheticScene make_wall_scene(const VoxelGridSpec& spec, bool with_box = true,
                                      uint8_t wall_class = 1, uint8_t box_class = 2) {
    spec.validate();
    const double X = spec.dims[2] * spec.voxel_size;
    const double Y = spec.dims[1] * spec.voxel_size;
    const double Z = spec.dims[0] * spec.voxel_size;

    // camera at the center of the grid's front face, looking +z
    DepthImage img;
    img.width = 64;
    img.height = 48;
    img.translation = {spec.origin[0] + X / 2, spec.origin[1] + Y / 2, spec.origin[2]};
    img.cx = (img.width - 1) / 2.0;
    img.cy = (img.height - 1) / 2.0;

    const double zb = 0.35 * Z;  // box front face (camera depth)
    const double zw = 0.65 * Z;  // wall
    // frustum covers the full grid cross-section at the box plane
    img.fx = (img.width / 2.0) * zb / (X / 2);
    img.fy = (img.height / 2.0) * zb / (Y / 2);

    // box occupies the central third laterally, from 0.35 Z to 0.5 Z in depth
    const double bx = X / 6, by = Y / 6, zb_back = 0.5 * Z;

    img.depth.resize(static_cast<size_t>(img.width) * img.height);
    for (int v = 0; v < img.height; ++v)
        for (int u = 0; u < img.width; ++u) {
            double d = zw;
            if (with_box) {
                const double x = zb * (u - img.cx) / img.fx;
                const double y = zb * (v - img.cy) / img.fy;
                if (std::fabs(x) <= bx && std::fabs(y) <= by) d = zb;
            }
            img.depth[static_cast<size_t>(v) * img.width + u] = d;
        }

    SyntheticScene scene;
    scene.depth = img;
    scene.vis = compute_visibility(img, spec);
    scene.ftsdf = compute_ftsdf(img, spec);

    // ground truth: wall slab three voxels deep, box interior solid
    scene.labels = LabelVolume{spec, std::vector<uint8_t>(static_cast<size_t>(spec.voxel_count()), 0)};
    size_t i = 0;
    for (int64_t z = 0; z < spec.dims[0]; ++z)
        for (int64_t y = 0; y < spec.dims[1]; ++y)
            for (int64_t x = 0; x < spec.dims[2]; ++x, ++i) {
                const auto c = spec.center(z, y, x);
                const double cz = c[2] - spec.origin[2];
                if (cz >= zw && cz < zw + 3 * spec.voxel_size) {
                    scene.labels.labels[i] = wall_class;
                } else if (with_box && cz >= zb && cz <= zb_back &&
                           std::fabs(c[0] - img.translation[0]) <= bx &&
                           std::fabs(c[1] - img.translation[1]) <= by) {
                    scene.labels.labels[i] = box_class;
                }
            }
    return scene;
}

}  // namespace ccp
