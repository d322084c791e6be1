#include "vfp/volume.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "vfp/errors.hpp"
#include "vfp/parallel.hpp"

namespace vfp {

float sample_trilinear(const Grid3& g, double x, double y, double z) {
    const auto& d = g.dims;
    auto clampc = [](double c, int n) {
        if (c < 0.0) return 0.0;
        double hi = static_cast<double>(n - 1);
        return c > hi ? hi : c;
    };
    x = clampc(x, d[0]);
    y = clampc(y, d[1]);
    z = clampc(z, d[2]);

    int x0 = static_cast<int>(x), y0 = static_cast<int>(y), z0 = static_cast<int>(z);
    int x1 = std::min(x0 + 1, d[0] - 1);
    int y1 = std::min(y0 + 1, d[1] - 1);
    int z1 = std::min(z0 + 1, d[2] - 1);
    double fx = x - x0, fy = y - y0, fz = z - z0;

    double c00 = g.at(x0, y0, z0) * (1.0 - fx) + g.at(x1, y0, z0) * fx;
    double c10 = g.at(x0, y1, z0) * (1.0 - fx) + g.at(x1, y1, z0) * fx;
    double c01 = g.at(x0, y0, z1) * (1.0 - fx) + g.at(x1, y0, z1) * fx;
    double c11 = g.at(x0, y1, z1) * (1.0 - fx) + g.at(x1, y1, z1) * fx;
    double c0 = c00 * (1.0 - fy) + c10 * fy;
    double c1 = c01 * (1.0 - fy) + c11 * fy;
    return static_cast<float>(c0 * (1.0 - fz) + c1 * fz);
}

std::string normalize_modality(const std::string& name) {
    std::size_t b = 0, e = name.size();
    while (b < e && std::isspace(static_cast<unsigned char>(name[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(name[e - 1]))) --e;
    if (b == e) raise(ErrorCode::InvalidArgument, "empty modality name");
    std::string out;
    out.reserve(e - b);
    for (std::size_t i = b; i < e; ++i)
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(name[i]))));
    return out;
}

namespace {

// Nearest-rank percentile: the value at sorted index ceil(q/100 * n) - 1.
// Order statistics survive monotone rescaling, which is what makes the
// normalization idempotent.
float nearest_rank(const std::vector<float>& sorted, double q) {
    std::size_t n = sorted.size();
    double r = std::ceil(q / 100.0 * static_cast<double>(n));
    std::size_t idx = r < 1.0 ? 0 : static_cast<std::size_t>(r) - 1;
    if (idx >= n) idx = n - 1;
    return sorted[idx];
}

}  // namespace

Volume normalize_intensity(const Volume& v) {
    Volume out = v;
    if (v.grid.values.empty()) return out;

    std::vector<float> sorted = v.grid.values;
    std::sort(sorted.begin(), sorted.end());
    const float lo = nearest_rank(sorted, 1.0);
    const float hi = nearest_rank(sorted, 99.0);

    if (!(hi > lo)) {
        std::fill(out.grid.values.begin(), out.grid.values.end(), 0.0f);
        return out;
    }

    const float range = hi - lo;
    parallel_for(out.grid.values.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            float t = (out.grid.values[i] - lo) / range;
            out.grid.values[i] = std::clamp(t, 0.0f, 1.0f);
        }
    });
    return out;
}

Volume resample_isotropic(const Volume& v, double target_spacing, int max_dim) {
    if (!(target_spacing > 0.0))
        raise(ErrorCode::InvalidArgument, "target spacing must be positive");

    std::array<int, 3> out_dims;
    for (int a = 0; a < 3; ++a) {
        double extent = v.dims()[a] * v.spacing[a];
        long n = std::llround(extent / target_spacing);
        if (n < 1) n = 1;
        if (n > max_dim)
            raise(ErrorCode::SpacingOverflow,
                  "resampled dimension " + std::to_string(n) + " exceeds cap " +
                      std::to_string(max_dim));
        out_dims[a] = static_cast<int>(n);
    }

    Volume out;
    out.grid = Grid3(out_dims[0], out_dims[1], out_dims[2]);
    out.spacing = {target_spacing, target_spacing, target_spacing};
    out.origin = v.origin;
    out.subject_id = v.subject_id;
    out.modality_id = v.modality_id;

    const std::size_t plane = static_cast<std::size_t>(out_dims[0]) * out_dims[1];
    parallel_for(static_cast<std::size_t>(out_dims[2]), [&](std::size_t zb, std::size_t ze) {
        for (std::size_t z = zb; z < ze; ++z) {
            double cz = ((z + 0.5) * target_spacing) / v.spacing[2] - 0.5;
            for (int y = 0; y < out_dims[1]; ++y) {
                double cy = ((y + 0.5) * target_spacing) / v.spacing[1] - 0.5;
                std::size_t row = z * plane + static_cast<std::size_t>(y) * out_dims[0];
                for (int x = 0; x < out_dims[0]; ++x) {
                    double cx = ((x + 0.5) * target_spacing) / v.spacing[0] - 0.5;
                    out.grid.values[row + x] = sample_trilinear(v.grid, cx, cy, cz);
                }
            }
        }
    });
    return out;
}

}  // namespace vfp
