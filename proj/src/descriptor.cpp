#include "vfp/descriptor.hpp"

#include <algorithm>
#include <cmath>

#include "vfp/errors.hpp"

namespace vfp {

const std::array<std::array<double, 3>, 12>& icosahedral_directions() {
    static const auto dirs = [] {
        const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
        const double n = std::sqrt(1.0 + phi * phi);
        std::array<std::array<double, 3>, 12> d{{
            {1 / n, phi / n, 0},   {1 / n, -phi / n, 0},  {-1 / n, phi / n, 0},
            {-1 / n, -phi / n, 0}, {0, 1 / n, phi / n},   {0, 1 / n, -phi / n},
            {0, -1 / n, phi / n},  {0, -1 / n, -phi / n}, {phi / n, 0, 1 / n},
            {phi / n, 0, -1 / n},  {-phi / n, 0, 1 / n},  {-phi / n, 0, -1 / n},
        }};
        return d;
    }();
    return dirs;
}

std::optional<Descriptor> compute_descriptor(const Volume& v, const Keypoint& kp,
                                             const DescriptorConfig& cfg) {
    if (cfg.subregions < 1 || cfg.orientation_bins < 1 || cfg.window_radius_sigmas <= 0.0 ||
        cfg.clamp <= 0.0 || cfg.clamp > 1.0)
        raise(ErrorCode::InvalidConfig, "descriptor config out of range");
    if (cfg.orientation_bins != 12)
        raise(ErrorCode::InvalidConfig, "only the 12-direction orientation set is implemented");

    const double w = cfg.window_radius_sigmas * kp.sigma;  // cube half-width, voxels
    for (int i = 0; i < 3; ++i) {
        if (kp.position[i] < w || kp.position[i] > v.dims()[i] - 1 - w) return std::nullopt;
    }

    const auto& dirs = icosahedral_directions();
    const int nsub = cfg.subregions;
    const int bins = cfg.orientation_bins;
    const double step = kp.sigma / 2.0;      // lattice pitch and gradient step
    const int m = static_cast<int>(std::ceil(w / step));
    const double cell = 2.0 * w / nsub;      // subregion edge length
    const double sw = 0.5 * w;               // spatial Gaussian width
    const double h = step;

    std::vector<double> hist(static_cast<std::size_t>(nsub) * nsub * nsub * bins, 0.0);

    auto sub_index = [&](double u) {
        int s = static_cast<int>(std::floor((u + w) / cell));
        return std::clamp(s, 0, nsub - 1);
    };

    for (int mz = -m; mz < m; ++mz)
        for (int my = -m; my < m; ++my)
            for (int mx = -m; mx < m; ++mx) {
                double ox = (mx + 0.5) * step;
                double oy = (my + 0.5) * step;
                double oz = (mz + 0.5) * step;
                if (std::abs(ox) > w || std::abs(oy) > w || std::abs(oz) > w) continue;
                double px = kp.position[0] + ox;
                double py = kp.position[1] + oy;
                double pz = kp.position[2] + oz;

                double gx = (sample_trilinear(v.grid, px + h, py, pz) -
                             sample_trilinear(v.grid, px - h, py, pz)) / (2.0 * h);
                double gy = (sample_trilinear(v.grid, px, py + h, pz) -
                             sample_trilinear(v.grid, px, py - h, pz)) / (2.0 * h);
                double gz = (sample_trilinear(v.grid, px, py, pz + h) -
                             sample_trilinear(v.grid, px, py, pz - h)) / (2.0 * h);
                double mag = std::sqrt(gx * gx + gy * gy + gz * gz);
                if (mag == 0.0) continue;

                // Two nearest directions by dot product; ties pick lower index.
                int best = -1, second = -1;
                double bdot = -2.0, sdot = -2.0;
                for (int i = 0; i < bins; ++i) {
                    double dot = (gx * dirs[i][0] + gy * dirs[i][1] + gz * dirs[i][2]) / mag;
                    if (dot > bdot) {
                        second = best; sdot = bdot;
                        best = i; bdot = dot;
                    } else if (dot > sdot) {
                        second = i; sdot = dot;
                    }
                }
                double wb = std::max(bdot, 0.0), ws = std::max(sdot, 0.0);
                double wsum = wb + ws;
                if (wsum == 0.0) continue;

                double r2 = ox * ox + oy * oy + oz * oz;
                double weight = mag * std::exp(-0.5 * r2 / (sw * sw));
                std::size_t cell_idx = static_cast<std::size_t>(
                    sub_index(ox) + nsub * (sub_index(oy) + nsub * sub_index(oz)));
                hist[cell_idx * bins + best] += weight * (wb / wsum);
                hist[cell_idx * bins + second] += weight * (ws / wsum);
            }

    double norm2 = 0.0;
    for (double e : hist) norm2 += e * e;
    Descriptor d;
    d.keypoint = kp;
    d.subject_id = v.subject_id;
    d.modality_id = v.modality_id;
    d.vector.resize(hist.size(), 0.0f);
    if (norm2 == 0.0) return d;

    double ceiling = cfg.clamp * std::sqrt(norm2);
    double cnorm2 = 0.0;
    for (auto& e : hist) {
        e = std::min(e, ceiling);
        cnorm2 += e * e;
    }
    double inv = 1.0 / std::sqrt(cnorm2);
    for (std::size_t i = 0; i < hist.size(); ++i)
        d.vector[i] = static_cast<float>(hist[i] * inv);
    return d;
}

}  // namespace vfp
