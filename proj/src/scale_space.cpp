#include "vfp/scale_space.hpp"

#include <algorithm>
#include <cmath>

#include "vfp/errors.hpp"
#include "vfp/parallel.hpp"

namespace vfp {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
        k[i + radius] = w;
        sum += w;
    }
    for (auto& w : k) w /= sum;
    return k;
}

// One separable pass along `axis` with edge-clamped sampling.
Grid3 blur_axis(const Grid3& in, const std::vector<double>& k, int axis) {
    Grid3 out;
    out.dims = in.dims;
    out.values.resize(in.values.size());
    int radius = static_cast<int>(k.size() / 2);
    int nx = in.dims[0], ny = in.dims[1], nz = in.dims[2];
    int len = in.dims[axis];

    parallel_for(static_cast<std::size_t>(nz), [&](std::size_t z0, std::size_t z1) {
        for (int z = static_cast<int>(z0); z < static_cast<int>(z1); ++z)
            for (int y = 0; y < ny; ++y)
                for (int x = 0; x < nx; ++x) {
                    int pos = axis == 0 ? x : axis == 1 ? y : z;
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        int p = std::clamp(pos + i, 0, len - 1);
                        int xs = axis == 0 ? p : x;
                        int ys = axis == 1 ? p : y;
                        int zs = axis == 2 ? p : z;
                        acc += k[i + radius] * in.at(xs, ys, zs);
                    }
                    out.values[out.index(x, y, z)] = static_cast<float>(acc);
                }
    });
    return out;
}

Grid3 downsample2(const Grid3& in) {
    Grid3 out;
    for (int i = 0; i < 3; ++i) out.dims[i] = (in.dims[i] + 1) / 2;
    out.values.resize(static_cast<std::size_t>(out.dims[0]) * out.dims[1] * out.dims[2]);
    parallel_for(static_cast<std::size_t>(out.dims[2]), [&](std::size_t z0, std::size_t z1) {
        for (int z = static_cast<int>(z0); z < static_cast<int>(z1); ++z)
            for (int y = 0; y < out.dims[1]; ++y)
                for (int x = 0; x < out.dims[0]; ++x)
                    out.values[out.index(x, y, z)] = in.at(2 * x, 2 * y, 2 * z);
    });
    return out;
}

Grid3 subtract(const Grid3& hi, const Grid3& lo) {
    Grid3 out;
    out.dims = hi.dims;
    out.values.resize(hi.values.size());
    parallel_for(hi.values.size(), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) out.values[i] = hi.values[i] - lo.values[i];
    });
    return out;
}

}  // namespace

Grid3 gaussian_blur_3d(const Grid3& g, double sigma) {
    if (sigma <= 0.0) return g;
    auto k = gaussian_kernel(sigma);
    Grid3 out = blur_axis(g, k, 0);
    out = blur_axis(out, k, 1);
    out = blur_axis(out, k, 2);
    return out;
}

DogStack build_dog_stack(const Volume& v, const ScaleSpaceConfig& cfg) {
    if (cfg.octaves < 1 || cfg.scales_per_octave < 1 || cfg.base_sigma <= 0.0)
        raise(ErrorCode::InvalidConfig, "scale-space config must have positive octaves, scales, sigma");
    for (int d : v.dims())
        if (d < 8) raise(ErrorCode::VolumeTooSmall, "volume dimension below 8 voxels");

    const int S = cfg.scales_per_octave;
    DogStack stack;
    Grid3 base = gaussian_blur_3d(v.grid, cfg.base_sigma);

    for (int o = 0; o < cfg.octaves; ++o) {
        // Gaussian ladder for this octave: level s sits at base_sigma*2^(s/S)
        // in octave-grid voxels, built incrementally from level s-1.
        std::vector<Grid3> gauss;
        gauss.reserve(S + 3);
        gauss.push_back(std::move(base));
        for (int s = 1; s <= S + 2; ++s) {
            double prev = cfg.base_sigma * std::pow(2.0, (s - 1) / static_cast<double>(S));
            double next = cfg.base_sigma * std::pow(2.0, s / static_cast<double>(S));
            double delta = std::sqrt(next * next - prev * prev);
            gauss.push_back(gaussian_blur_3d(gauss.back(), delta));
        }

        DogOctave oct;
        oct.downsample = 1 << o;
        for (int d = 0; d <= S + 1; ++d) {
            oct.dog.push_back(subtract(gauss[d + 1], gauss[d]));
            oct.sigma.push_back(cfg.base_sigma * std::pow(2.0, o + d / static_cast<double>(S)));
        }
        stack.octaves.push_back(std::move(oct));

        if (o + 1 == cfg.octaves) break;
        Grid3 next_base = downsample2(gauss[S]);  // scale 2*base_sigma halves with the grid
        if (*std::min_element(next_base.dims.begin(), next_base.dims.end()) < 8) break;
        base = std::move(next_base);
    }
    return stack;
}

namespace {

// Strict comparison against all 80 neighbors in (x, y, z, level).
bool is_strict_extremum(const DogOctave& oct, int d, int x, int y, int z, bool maximum) {
    float c = oct.dog[d].at(x, y, z);
    for (int dd = -1; dd <= 1; ++dd) {
        const Grid3& g = oct.dog[d + dd];
        for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    if (dd == 0 && dz == 0 && dy == 0 && dx == 0) continue;
                    float n = g.at(x + dx, y + dy, z + dz);
                    if (maximum ? (n >= c) : (n <= c)) return false;
                }
    }
    return true;
}

}  // namespace

std::vector<Keypoint> detect_extrema(const DogStack& stack, const ScaleSpaceConfig& cfg) {
    std::vector<Keypoint> out;
    for (std::size_t o = 0; o < stack.octaves.size(); ++o) {
        const DogOctave& oct = stack.octaves[o];
        int nx = oct.dog[0].dims[0], ny = oct.dog[0].dims[1], nz = oct.dog[0].dims[2];
        int last = static_cast<int>(oct.dog.size()) - 1;

        for (int d = 1; d < last; ++d) {
            // Per-slab buckets keep the emit order independent of threading.
            std::size_t span = static_cast<std::size_t>(std::max(nz - 2, 0));
            std::vector<std::vector<Keypoint>> buckets(span);
            parallel_for(span, [&](std::size_t i0, std::size_t i1) {
                for (std::size_t i = i0; i < i1; ++i) {
                    int z = static_cast<int>(i) + 1;
                    auto& bucket = buckets[i];
                    for (int y = 1; y < ny - 1; ++y)
                        for (int x = 1; x < nx - 1; ++x) {
                            float c = oct.dog[d].at(x, y, z);
                            bool mx = is_strict_extremum(oct, d, x, y, z, true);
                            bool mn = !mx && is_strict_extremum(oct, d, x, y, z, false);
                            if (!mx && !mn) continue;
                            Keypoint kp;
                            double f = oct.downsample;
                            kp.position = {x * f, y * f, z * f};
                            kp.sigma = oct.sigma[d];
                            kp.dog_value = c;
                            kp.octave = static_cast<int>(o);
                            kp.level = d;
                            kp.polarity = mx ? Polarity::Maximum : Polarity::Minimum;
                            bucket.push_back(kp);
                        }
                }
            });
            for (auto& b : buckets) out.insert(out.end(), b.begin(), b.end());
        }
    }
    (void)cfg;
    std::sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.octave != b.octave) return a.octave < b.octave;
        if (a.position[2] != b.position[2]) return a.position[2] < b.position[2];
        if (a.position[1] != b.position[1]) return a.position[1] < b.position[1];
        if (a.position[0] != b.position[0]) return a.position[0] < b.position[0];
        return a.level < b.level;
    });
    return out;
}

std::array<double, 3> symmetric_eigenvalues(const std::array<double, 6>& m) {
    double xx = m[0], yy = m[1], zz = m[2], xy = m[3], xz = m[4], yz = m[5];
    double p1 = xy * xy + xz * xz + yz * yz;
    std::array<double, 3> eig;
    if (p1 == 0.0) {
        eig = {xx, yy, zz};
        std::sort(eig.begin(), eig.end(), std::greater<double>());
        return eig;
    }
    double q = (xx + yy + zz) / 3.0;
    double p2 = (xx - q) * (xx - q) + (yy - q) * (yy - q) + (zz - q) * (zz - q) + 2.0 * p1;
    double p = std::sqrt(p2 / 6.0);
    double bxx = (xx - q) / p, byy = (yy - q) / p, bzz = (zz - q) / p;
    double bxy = xy / p, bxz = xz / p, byz = yz / p;
    double detb = bxx * (byy * bzz - byz * byz) - bxy * (bxy * bzz - byz * bxz) +
                  bxz * (bxy * byz - byy * bxz);
    double r = std::clamp(detb / 2.0, -1.0, 1.0);
    double phi = std::acos(r) / 3.0;
    double e1 = q + 2.0 * p * std::cos(phi);
    double e3 = q + 2.0 * p * std::cos(phi + 2.0 * M_PI / 3.0);
    double e2 = 3.0 * q - e1 - e3;
    eig = {e1, e2, e3};
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

std::vector<Keypoint> reject_keypoints(const std::vector<Keypoint>& kps, const DogStack& stack,
                                       const ScaleSpaceConfig& cfg, RejectStats* stats) {
    RejectStats local;
    local.input = kps.size();
    std::vector<Keypoint> out;
    out.reserve(kps.size());

    for (const Keypoint& kp : kps) {
        if (std::abs(kp.dog_value) < cfg.contrast_threshold) {
            ++local.low_contrast;
            continue;
        }
        const DogOctave& oct = stack.octaves[kp.octave];
        const Grid3& g = oct.dog[kp.level];
        double f = oct.downsample;
        int x = static_cast<int>(kp.position[0] / f);
        int y = static_cast<int>(kp.position[1] / f);
        int z = static_cast<int>(kp.position[2] / f);

        auto v = [&](int dx, int dy, int dz) {
            return static_cast<double>(g.at(x + dx, y + dy, z + dz));
        };
        double c = v(0, 0, 0);
        double hxx = v(1, 0, 0) + v(-1, 0, 0) - 2.0 * c;
        double hyy = v(0, 1, 0) + v(0, -1, 0) - 2.0 * c;
        double hzz = v(0, 0, 1) + v(0, 0, -1) - 2.0 * c;
        double hxy = (v(1, 1, 0) - v(1, -1, 0) - v(-1, 1, 0) + v(-1, -1, 0)) / 4.0;
        double hxz = (v(1, 0, 1) - v(1, 0, -1) - v(-1, 0, 1) + v(-1, 0, -1)) / 4.0;
        double hyz = (v(0, 1, 1) - v(0, 1, -1) - v(0, -1, 1) + v(0, -1, -1)) / 4.0;

        auto eig = symmetric_eigenvalues({hxx, hyy, hzz, hxy, hxz, hyz});
        std::sort(eig.begin(), eig.end(),
                  [](double a, double b) { return std::abs(a) > std::abs(b); });
        double l1 = eig[0], l3 = eig[2];
        bool edge = l3 == 0.0 || (l1 > 0.0) != (l3 > 0.0) ||
                    std::abs(l1) / std::abs(l3) > cfg.edge_ratio_threshold;
        if (edge) {
            ++local.edge_like;
            continue;
        }
        out.push_back(kp);
    }
    local.kept = out.size();
    if (stats) *stats = local;
    return out;
}

}  // namespace vfp
