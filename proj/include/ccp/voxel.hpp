#pragma once
// Depth-image ingestion and voxelization: back-projection, frustum/visibility
// classification, and the flipped-TSDF input encoding, plus the PGM / camera /
// VOX1 file formats.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ccp/error.hpp"
#include "ccp/tensor.hpp"

namespace ccp {

struct DepthImage {
    int width = 0, height = 0;
    std::vector<double> depth;  // meters, row-major v*width+u, 0 = missing
    double fx = 0, fy = 0, cx = 0, cy = 0;
    std::array<std::array<double, 3>, 3> rotation{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
    std::array<double, 3> translation{0, 0, 0};  // camera-to-world

    double at(int u, int v) const { return depth[static_cast<size_t>(v) * width + u]; }
    void validate() const;
};

struct VoxelGridSpec {
    std::array<double, 3> origin{0, 0, 0};  // world meters, min corner
    double voxel_size = 0.02;
    std::array<int64_t, 3> dims{240, 144, 240};  // (D, H, W)
    double tau = 0.24;

    int64_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
    int64_t index(int64_t z, int64_t y, int64_t x) const {
        return (z * dims[1] + y) * dims[2] + x;
    }
    // world position of the center of voxel (z, y, x); W->x, H->y, D->z
    std::array<double, 3> center(int64_t z, int64_t y, int64_t x) const {
        return {origin[0] + voxel_size * (double(x) + 0.5),
                origin[1] + voxel_size * (double(y) + 0.5),
                origin[2] + voxel_size * (double(z) + 0.5)};
    }
    void validate() const {
        if (voxel_size <= 0) throw ConfigError("grid: voxel_size must be positive");
        if (tau <= 0) throw ConfigError("grid: truncation must be positive");
        for (int64_t d : dims)
            if (d < 1) throw ConfigError("grid: dims must be >= 1");
    }
};

enum class VoxelState : uint8_t { outside_frustum = 0, visible_empty = 1, surface = 2, occluded = 3 };

struct VisibilityVolume {
    VoxelGridSpec spec;
    std::vector<uint8_t> state;  // VoxelState per voxel, ((z*H+y)*W+x)

    VoxelState at(int64_t z, int64_t y, int64_t x) const {
        return static_cast<VoxelState>(state[static_cast<size_t>(spec.index(z, y, x))]);
    }
    std::array<int64_t, 4> counts() const {
        std::array<int64_t, 4> c{0, 0, 0, 0};
        for (uint8_t s : state) ++c[s];
        return c;
    }
};

struct FtsdfVolume {
    VoxelGridSpec spec;
    Tensor<double> values;        // [1, 1, D, H, W]
    bool empty_surface = false;   // warning: no valid depth samples
};

struct LabelVolume {
    VoxelGridSpec spec;
    std::vector<uint8_t> labels;  // class per voxel, 0 = empty

    uint8_t at(int64_t z, int64_t y, int64_t x) const {
        return labels[static_cast<size_t>(spec.index(z, y, x))];
    }
};

// World points of every valid depth sample.
std::vector<std::array<double, 3>> backproject(const DepthImage& depth);

// Projects a world point into the camera; returns false when behind it.
bool project(const DepthImage& depth, const std::array<double, 3>& world, double& u, double& v,
             double& ray_depth);

VisibilityVolume compute_visibility(const DepthImage& depth, const VoxelGridSpec& spec);

FtsdfVolume compute_ftsdf(const DepthImage& depth, const VoxelGridSpec& spec);

// --- file formats ---

// PGM P5, maxval 65535, big-endian 16-bit samples, millimeters, 0 = missing.
DepthImage load_depth_pgm(const std::string& path);
void save_depth_pgm(const DepthImage& depth, const std::string& path);

// Text: fx= fy= cx= cy= plus 12 whitespace-separated numbers (row-major 3x4
// camera-to-world pose). Applies to an already-loaded image.
void load_camera(const std::string& path, DepthImage& depth);
void save_camera(const DepthImage& depth, const std::string& path);

// VOX1: magic, u32 LE dims D H W, u8 dtype (0 = f32, 1 = u8), raw payload.
void save_vox_f32(const std::string& path, const std::array<int64_t, 3>& dims,
                  const float* data);
void save_vox_u8(const std::string& path, const std::array<int64_t, 3>& dims,
                 const uint8_t* data);

void save_ftsdf(const FtsdfVolume& vol, const std::string& path);
FtsdfVolume load_ftsdf(const std::string& path, const VoxelGridSpec& spec_hint = {});

void save_labels(const LabelVolume& vol, const std::string& path);
LabelVolume load_labels(const std::string& path, int num_classes,
                        const VoxelGridSpec& spec_hint = {});

void save_visibility(const VisibilityVolume& vol, const std::string& path);
VisibilityVolume load_visibility(const std::string& path, const VoxelGridSpec& spec_hint = {});

}  // namespace ccp
