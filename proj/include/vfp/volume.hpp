#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace vfp {

/// Dense 3D float grid, x fastest: index = x + dims[0]*(y + dims[1]*z).
struct Grid3 {
    std::array<int, 3> dims{0, 0, 0};
    std::vector<float> values;

    Grid3() = default;
    Grid3(int nx, int ny, int nz, float fill = 0.0f)
        : dims{nx, ny, nz},
          values(static_cast<std::size_t>(nx) * ny * nz, fill) {}

    std::size_t size() const { return values.size(); }

    std::size_t index(int x, int y, int z) const {
        return static_cast<std::size_t>(x) +
               static_cast<std::size_t>(dims[0]) *
                   (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * z);
    }

    float at(int x, int y, int z) const { return values[index(x, y, z)]; }
    float& at(int x, int y, int z) { return values[index(x, y, z)]; }

    bool contains(int x, int y, int z) const {
        return x >= 0 && x < dims[0] && y >= 0 && y < dims[1] && z >= 0 && z < dims[2];
    }
};

/// Trilinear sample at a continuous voxel coordinate; out-of-range
/// coordinates are clamped to the grid edge.
float sample_trilinear(const Grid3& g, double x, double y, double z);

/// Scalar volume with physical metadata. Immutable by convention after
/// load; all pipeline steps return new volumes.
struct Volume {
    Grid3 grid;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel
    std::array<double, 3> origin{0.0, 0.0, 0.0};   // mm
    std::string subject_id;
    std::string modality_id;

    const std::array<int, 3>& dims() const { return grid.dims; }
    std::size_t voxel_count() const { return grid.size(); }
};

/// Upper-cases and trims a modality name; raises InvalidArgument when empty.
std::string normalize_modality(const std::string& name);

/// Rescales intensities so the 1st percentile maps to 0 and the 99th to 1,
/// clamped to [0,1]. Percentiles are nearest-rank order statistics over all
/// voxels, so applying the function twice equals applying it once.
/// Constant volumes map to all zeros.
Volume normalize_intensity(const Volume& v);

/// Trilinear resample onto an isotropic grid of the given spacing.
/// Output dims are round(extent / target) per axis (at least 1), which keeps
/// the physical extent within one voxel. Voxels are treated as cells with
/// centers at (i + 0.5) * spacing, so resampling at the existing isotropic
/// spacing reproduces the input exactly.
/// Raises SpacingOverflow when an output dimension would exceed max_dim.
Volume resample_isotropic(const Volume& v, double target_spacing, int max_dim = 1024);

}  // namespace vfp
