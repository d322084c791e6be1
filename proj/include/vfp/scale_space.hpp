#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "vfp/volume.hpp"

namespace vfp {

struct ScaleSpaceConfig {
    int octaves = 4;
    int scales_per_octave = 3;
    double base_sigma = 1.6;             // voxels, applied to the input grid
    double contrast_threshold = 0.03;    // on normalized intensity
    double edge_ratio_threshold = 10.0;  // |lambda1|/|lambda3| ceiling
};

enum class Polarity { Maximum, Minimum };

struct Keypoint {
    std::array<double, 3> position{};  // base-grid voxel coordinates
    double sigma = 0.0;                // characteristic scale, base-grid voxels
    float dog_value = 0.0f;            // signed response at the extremum
    int octave = 0;
    int level = 0;                     // DoG index within the octave
    Polarity polarity = Polarity::Maximum;
};

// One octave of the DoG stack. dog[d] = smoothed(d+1) - smoothed(d) on the
// octave grid; sigma[d] is the scale of smoothed(d) expressed in base-grid
// voxels, i.e. base_sigma * 2^(octave + d/scales_per_octave).
struct DogOctave {
    int downsample = 1;  // 2^octave: octave-grid coordinate -> base grid
    std::vector<Grid3> dog;
    std::vector<double> sigma;
};

struct DogStack {
    std::vector<DogOctave> octaves;
};

struct RejectStats {
    std::size_t input = 0;
    std::size_t low_contrast = 0;
    std::size_t edge_like = 0;
    std::size_t kept = 0;
};

/// Separable Gaussian smoothing, kernel radius ceil(3*sigma), edge-clamped,
/// accumulated in double. sigma <= 0 returns the input unchanged.
Grid3 gaussian_blur_3d(const Grid3& g, double sigma);

/// Builds the per-octave DoG stack. Each octave holds scales_per_octave + 2
/// difference levels; the next octave starts from the smoothed level whose
/// scale is twice the octave base, downsampled by 2 (even indices). Octaves
/// stop early once a downsampled dimension would fall below 8 voxels.
/// Raises VolumeTooSmall when an input dimension is below 8.
DogStack build_dog_stack(const Volume& v, const ScaleSpaceConfig& cfg);

/// Strict extrema of the 3x3x3x3 neighborhood (80 neighbors). Candidates
/// must sit at least 1 voxel from every spatial boundary and on an interior
/// DoG level. Output is sorted by (octave, z, y, x, level); positions are in
/// base-grid coordinates.
std::vector<Keypoint> detect_extrema(const DogStack& stack, const ScaleSpaceConfig& cfg);

/// Drops keypoints with |dog_value| below contrast_threshold, then those
/// failing the curvature test on the 3x3 spatial Hessian of their DoG level:
/// with |l1| >= |l2| >= |l3|, reject when l3 is zero, has the opposite sign
/// to l1, or |l1|/|l3| exceeds edge_ratio_threshold.
std::vector<Keypoint> reject_keypoints(const std::vector<Keypoint>& kps, const DogStack& stack,
                                       const ScaleSpaceConfig& cfg, RejectStats* stats = nullptr);

/// Eigenvalues of a symmetric 3x3 matrix given as (xx, yy, zz, xy, xz, yz),
/// sorted in descending algebraic order.
std::array<double, 3> symmetric_eigenvalues(const std::array<double, 6>& m);

}  // namespace vfp
