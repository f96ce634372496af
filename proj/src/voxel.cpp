#include "ccp/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ccp/tensor_io.hpp"

namespace ccp {

namespace {

// rotation rows are camera axes in world coordinates (camera-to-world)
std::array<double, 3> to_world(const DepthImage& d, const std::array<double, 3>& cam) {
    std::array<double, 3> w{};
    for (int i = 0; i < 3; ++i)
        w[i] = d.rotation[i][0] * cam[0] + d.rotation[i][1] * cam[1] + d.rotation[i][2] * cam[2] +
               d.translation[i];
    return w;
}

std::array<double, 3> to_camera(const DepthImage& d, const std::array<double, 3>& world) {
    const std::array<double, 3> t{world[0] - d.translation[0], world[1] - d.translation[1],
                                  world[2] - d.translation[2]};
    std::array<double, 3> c{};
    for (int i = 0; i < 3; ++i)
        c[i] = d.rotation[0][i] * t[0] + d.rotation[1][i] * t[1] + d.rotation[2][i] * t[2];
    return c;
}

// uniform spatial hash over surface points with cell size tau: any point
// within tau of a query lies in the 3x3x3 cell neighborhood
class SurfaceHash {
public:
    SurfaceHash(const std::vector<std::array<double, 3>>& pts, double cell) : pts_(pts), cell_(cell) {
        for (size_t i = 0; i < pts.size(); ++i) cells_[key(pts[i])].push_back(i);
    }

    double nearest_distance(const std::array<double, 3>& q, double cap) const {
        const int64_t qx = coord(q[0]), qy = coord(q[1]), qz = coord(q[2]);
        double best = cap;
        for (int64_t dz = -1; dz <= 1; ++dz)
            for (int64_t dy = -1; dy <= 1; ++dy)
                for (int64_t dx = -1; dx <= 1; ++dx) {
                    auto it = cells_.find(pack(qx + dx, qy + dy, qz + dz));
                    if (it == cells_.end()) continue;
                    for (size_t i : it->second) {
                        const auto& p = pts_[i];
                        const double d2 = (p[0] - q[0]) * (p[0] - q[0]) +
                                          (p[1] - q[1]) * (p[1] - q[1]) +
                                          (p[2] - q[2]) * (p[2] - q[2]);
                        best = std::min(best, std::sqrt(d2));
                    }
                }
        return best;
    }

private:
    int64_t coord(double v) const { return static_cast<int64_t>(std::floor(v / cell_)); }
    static uint64_t pack(int64_t x, int64_t y, int64_t z) {
        const uint64_t b = 1u << 20;
        return (static_cast<uint64_t>(x + b) << 42) | (static_cast<uint64_t>(y + b) << 21) |
               static_cast<uint64_t>(z + b);
    }
    uint64_t key(const std::array<double, 3>& p) const {
        return pack(coord(p[0]), coord(p[1]), coord(p[2]));
    }

    const std::vector<std::array<double, 3>>& pts_;
    double cell_;
    std::unordered_map<uint64_t, std::vector<size_t>> cells_;
};

}  // namespace

void DepthImage::validate() const {
    if (width <= 0 || height <= 0 || depth.size() != static_cast<size_t>(width) * height)
        throw ConfigError("depth image: bad dimensions");
    if (fx <= 0 || fy <= 0) throw ConfigError("depth image: focal lengths must be positive");
    for (double d : depth)
        if (d < 0 || !std::isfinite(d)) throw ConfigError("depth image: negative or non-finite depth");
    // orthonormality within 1e-6
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0;
            for (int k = 0; k < 3; ++k) dot += rotation[i][k] * rotation[j][k];
            if (std::fabs(dot - (i == j ? 1.0 : 0.0)) > 1e-6)
                throw ConfigError("depth image: rotation not orthonormal");
        }
}

std::vector<std::array<double, 3>> backproject(const DepthImage& depth) {
    depth.validate();
    std::vector<std::array<double, 3>> pts;
    for (int v = 0; v < depth.height; ++v)
        for (int u = 0; u < depth.width; ++u) {
            const double z = depth.at(u, v);
            if (z <= 0) continue;
            pts.push_back(to_world(depth, {z * (u - depth.cx) / depth.fx,
                                           z * (v - depth.cy) / depth.fy, z}));
        }
    return pts;
}

bool project(const DepthImage& depth, const std::array<double, 3>& world, double& u, double& v,
             double& ray_depth) {
    const auto cam = to_camera(depth, world);
    ray_depth = cam[2];
    if (cam[2] <= 0) return false;
    u = depth.fx * cam[0] / cam[2] + depth.cx;
    v = depth.fy * cam[1] / cam[2] + depth.cy;
    return true;
}

VisibilityVolume compute_visibility(const DepthImage& depth, const VoxelGridSpec& spec) {
    depth.validate();
    spec.validate();
    VisibilityVolume vol{spec, std::vector<uint8_t>(static_cast<size_t>(spec.voxel_count()),
                                                    uint8_t(VoxelState::outside_frustum))};
    const double half_band = spec.tau / 2;
    size_t i = 0;
    for (int64_t z = 0; z < spec.dims[0]; ++z)
        for (int64_t y = 0; y < spec.dims[1]; ++y)
            for (int64_t x = 0; x < spec.dims[2]; ++x, ++i) {
                double u, v, rd;
                if (!project(depth, spec.center(z, y, x), u, v, rd)) continue;
                const int ui = static_cast<int>(std::lround(u));
                const int vi = static_cast<int>(std::lround(v));
                if (ui < 0 || ui >= depth.width || vi < 0 || vi >= depth.height) continue;
                const double dpix = depth.at(ui, vi);
                if (dpix <= 0) continue;  // missing depth carries no information
                VoxelState s;
                if (rd < dpix - half_band)
                    s = VoxelState::visible_empty;
                else if (rd <= dpix + half_band)
                    s = VoxelState::surface;
                else
                    s = VoxelState::occluded;
                vol.state[i] = static_cast<uint8_t>(s);
            }
    return vol;
}

FtsdfVolume compute_ftsdf(const DepthImage& depth, const VoxelGridSpec& spec) {
    const auto vis = compute_visibility(depth, spec);
    const auto pts = backproject(depth);
    FtsdfVolume vol{spec,
                    Tensor<double>::zeros({1, 1, spec.dims[0], spec.dims[1], spec.dims[2]}),
                    pts.empty()};
    if (pts.empty()) return vol;

    const SurfaceHash hash(pts, spec.tau);
    size_t i = 0;
    for (int64_t z = 0; z < spec.dims[0]; ++z)
        for (int64_t y = 0; y < spec.dims[1]; ++y)
            for (int64_t x = 0; x < spec.dims[2]; ++x, ++i) {
                const auto s = static_cast<VoxelState>(vis.state[i]);
                if (s == VoxelState::outside_frustum) continue;
                const double sign = s == VoxelState::occluded ? -1.0 : 1.0;
                const double d = hash.nearest_distance(spec.center(z, y, x), spec.tau);
                vol.values[static_cast<int64_t>(i)] = sign * (1.0 - d / spec.tau);
            }
    return vol;
}

// --- PGM P5, 16-bit big-endian, millimeters ---

namespace {

// next header token, skipping whitespace and '#' comments
std::string pgm_token(std::istream& is, const std::string& path) {
    int c = is.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = is.get();
        } else if (std::isspace(c)) {
            c = is.get();
        } else {
            break;
        }
    }
    if (c == EOF) throw ParseError(path, static_cast<size_t>(std::max<std::streamoff>(0, is.tellg())), "truncated header");
    std::string tok;
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = is.get();
    }
    return tok;
}

int64_t pgm_int(std::istream& is, const std::string& path, const char* what) {
    const std::string tok = pgm_token(is, path);
    try {
        return std::stoll(tok);
    } catch (const std::exception&) {
        throw ParseError(path, static_cast<size_t>(std::max<std::streamoff>(0, is.tellg())),
                         std::string("bad ") + what + ": '" + tok + "'");
    }
}

}  // namespace

DepthImage load_depth_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    if (pgm_token(is, path) != "P5") throw ParseError(path, 0, "bad magic, expected P5");
    DepthImage img;
    img.width = static_cast<int>(pgm_int(is, path, "width"));
    img.height = static_cast<int>(pgm_int(is, path, "height"));
    const int64_t maxval = pgm_int(is, path, "maxval");
    if (img.width <= 0 || img.height <= 0)
        throw ParseError(path, static_cast<size_t>(is.tellg()), "non-positive dimensions");
    if (maxval != 65535)
        throw ParseError(path, static_cast<size_t>(is.tellg()), "maxval must be 65535");
    // exactly one whitespace byte separates header and payload (already consumed
    // by the token reader)
    const size_t n = static_cast<size_t>(img.width) * img.height;
    std::vector<uint8_t> raw(n * 2);
    detail::read_bytes(is, raw.data(), raw.size(), path);
    img.depth.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const uint16_t mm = static_cast<uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
        img.depth[i] = mm / 1000.0;  // millimeters -> meters
    }
    return img;
}

void save_depth_pgm(const DepthImage& depth, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "P5\n" << depth.width << " " << depth.height << "\n65535\n";
    for (double d : depth.depth) {
        const long mm = std::lround(d * 1000.0);
        const uint16_t v = static_cast<uint16_t>(std::clamp(mm, 0L, 65535L));
        os.put(static_cast<char>(v >> 8));
        os.put(static_cast<char>(v & 0xff));
    }
    if (!os) throw IoError("write failed: " + path);
}

// --- camera text file ---

void load_camera(const std::string& path, DepthImage& depth) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    std::vector<std::string> tokens;
    for (std::string t; is >> t;) tokens.push_back(t);

    bool have[4] = {false, false, false, false};
    const char* keys[4] = {"fx=", "fy=", "cx=", "cy="};
    double* dst[4] = {&depth.fx, &depth.fy, &depth.cx, &depth.cy};
    std::vector<double> pose;
    for (size_t i = 0; i < tokens.size(); ++i) {
        const std::string& t = tokens[i];
        bool matched = false;
        for (int k = 0; k < 4; ++k) {
            if (t.rfind(keys[k], 0) != 0) continue;
            std::string val = t.substr(3);
            if (val.empty()) {  // value in the next token
                if (++i >= tokens.size()) throw ParseError(path, 0, std::string("missing value for ") + keys[k]);
                val = tokens[i];
            }
            try {
                *dst[k] = std::stod(val);
            } catch (const std::exception&) {
                throw ParseError(path, 0, std::string("bad value for ") + keys[k] + ": '" + val + "'");
            }
            have[k] = true;
            matched = true;
            break;
        }
        if (matched) continue;
        try {
            pose.push_back(std::stod(t));
        } catch (const std::exception&) {
            throw ParseError(path, 0, "unexpected token '" + t + "'");
        }
    }
    for (int k = 0; k < 4; ++k)
        if (!have[k]) throw ParseError(path, 0, std::string("missing ") + keys[k]);
    if (pose.size() != 12)
        throw ParseError(path, 0, "expected 12 pose numbers, got " + std::to_string(pose.size()));
    for (int r = 0; r < 3; ++r) {  // row-major 3x4: rotation | translation
        for (int c = 0; c < 3; ++c) depth.rotation[r][c] = pose[static_cast<size_t>(r) * 4 + c];
        depth.translation[r] = pose[static_cast<size_t>(r) * 4 + 3];
    }
}

void save_camera(const DepthImage& depth, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os.precision(17);
    os << "fx=" << depth.fx << " fy=" << depth.fy << " cx=" << depth.cx << " cy=" << depth.cy
       << "\n";
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) os << depth.rotation[r][c] << " ";
        os << depth.translation[r] << "\n";
    }
    if (!os) throw IoError("write failed: " + path);
}

// --- VOX1 ---

namespace {

void write_vox(const std::string& path, const std::array<int64_t, 3>& dims, uint8_t dtype,
               const void* data, size_t elem_size) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write("VOX1", 4);
    for (int64_t d : dims) {
        const uint32_t v = static_cast<uint32_t>(d);
        detail::write_bytes(os, &v, 4);
    }
    detail::write_bytes(os, &dtype, 1);
    const size_t n = static_cast<size_t>(dims[0] * dims[1] * dims[2]);
    os.write(static_cast<const char*>(data), static_cast<std::streamsize>(n * elem_size));
    if (!os) throw IoError("write failed: " + path);
}

struct VoxPayload {
    std::array<int64_t, 3> dims;
    uint8_t dtype;
    std::vector<float> f32;
    std::vector<uint8_t> u8;
};

VoxPayload read_vox(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    char magic[4];
    detail::read_bytes(is, magic, 4, path);
    if (std::memcmp(magic, "VOX1", 4) != 0) throw ParseError(path, 0, "bad magic, expected VOX1");
    VoxPayload p;
    for (auto& d : p.dims) {
        uint32_t v;
        detail::read_bytes(is, &v, 4, path);
        if (v == 0) throw ParseError(path, static_cast<size_t>(is.tellg()), "zero dimension");
        d = v;
    }
    detail::read_bytes(is, &p.dtype, 1, path);
    const size_t n = static_cast<size_t>(p.dims[0] * p.dims[1] * p.dims[2]);
    if (p.dtype == 0) {
        p.f32.resize(n);
        detail::read_bytes(is, p.f32.data(), n * 4, path);
    } else if (p.dtype == 1) {
        p.u8.resize(n);
        detail::read_bytes(is, p.u8.data(), n, path);
    } else {
        throw ParseError(path, 16, "unknown dtype " + std::to_string(p.dtype));
    }
    return p;
}

VoxelGridSpec spec_for(const VoxelGridSpec& hint, const std::array<int64_t, 3>& dims) {
    VoxelGridSpec s = hint;
    s.dims = dims;
    return s;
}

}  // namespace

void save_vox_f32(const std::string& path, const std::array<int64_t, 3>& dims, const float* data) {
    write_vox(path, dims, 0, data, 4);
}

void save_vox_u8(const std::string& path, const std::array<int64_t, 3>& dims,
                 const uint8_t* data) {
    write_vox(path, dims, 1, data, 1);
}

void save_ftsdf(const FtsdfVolume& vol, const std::string& path) {
    std::vector<float> f(static_cast<size_t>(vol.values.size()));
    for (int64_t i = 0; i < vol.values.size(); ++i) f[static_cast<size_t>(i)] = static_cast<float>(vol.values[i]);
    save_vox_f32(path, vol.spec.dims, f.data());
}

FtsdfVolume load_ftsdf(const std::string& path, const VoxelGridSpec& spec_hint) {
    auto p = read_vox(path);
    if (p.dtype != 0) throw ParseError(path, 16, "ftsdf volume must be f32");
    FtsdfVolume vol{spec_for(spec_hint, p.dims),
                    Tensor<double>::zeros({1, 1, p.dims[0], p.dims[1], p.dims[2]})};
    for (size_t i = 0; i < p.f32.size(); ++i) vol.values[static_cast<int64_t>(i)] = p.f32[i];
    return vol;
}

void save_labels(const LabelVolume& vol, const std::string& path) {
    save_vox_u8(path, vol.spec.dims, vol.labels.data());
}

LabelVolume load_labels(const std::string& path, int num_classes, const VoxelGridSpec& spec_hint) {
    auto p = read_vox(path);
    if (p.dtype != 1) throw ParseError(path, 16, "label volume must be u8");
    for (size_t i = 0; i < p.u8.size(); ++i)
        if (p.u8[i] >= num_classes)
            throw ParseError(path, 17 + i, "label " + std::to_string(p.u8[i]) +
                                               " out of range for " + std::to_string(num_classes) +
                                               " classes");
    return LabelVolume{spec_for(spec_hint, p.dims), std::move(p.u8)};
}

void save_visibility(const VisibilityVolume& vol, const std::string& path) {
    save_vox_u8(path, vol.spec.dims, vol.state.data());
}

VisibilityVolume load_visibility(const std::string& path, const VoxelGridSpec& spec_hint) {
    auto p = read_vox(path);
    if (p.dtype != 1) throw ParseError(path, 16, "visibility volume must be u8");
    for (size_t i = 0; i < p.u8.size(); ++i)
        if (p.u8[i] > 3) throw ParseError(path, 17 + i, "bad visibility state " + std::to_string(p.u8[i]));
    return VisibilityVolume{spec_for(spec_hint, p.dims), std::move(p.u8)};
}

}  // namespace ccp
