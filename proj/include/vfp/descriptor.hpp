#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "vfp/scale_space.hpp"
#include "vfp/volume.hpp"

namespace vfp {

struct DescriptorConfig {
    int subregions = 2;                // per axis; 2^3 spatial cells
    int orientation_bins = 12;         // icosahedral directions
    double window_radius_sigmas = 3.0; // half-width of the sample cube, in sigmas
    double clamp = 0.2;                // entrywise ceiling, fraction of the norm
};

struct Descriptor {
    std::vector<float> vector;  // length subregions^3 * orientation_bins
    Keypoint keypoint;
    std::string subject_id;
    std::string modality_id;
};

/// The 12 vertices of an icosahedron, unit length. Gradient orientations are
/// soft-assigned to the two of these with the largest dot products.
const std::array<std::array<double, 3>, 12>& icosahedral_directions();

/// Histogram-of-oriented-gradients descriptor around kp, sampled from the
/// volume at a lattice with step kp.sigma/2 covering a cube of half-width
/// window_radius_sigmas * kp.sigma. Lattice points sit at half-offsets so no
/// sample lands on a subregion boundary. Gradients are central differences
/// of trilinear samples with step kp.sigma/2; each contributes its magnitude
/// times a Gaussian spatial weight (width half the cube half-width), split
/// across the two nearest directions in proportion to the positive dots.
/// The flat layout is direction-fastest, then subregion x, y, z.
/// Entries are clamped at clamp * (pre-clamp norm) and renormalized to unit
/// length; a zero-gradient neighborhood gives the all-zero vector.
/// Returns nullopt when kp sits closer than the cube half-width to a volume
/// face; such keypoints are dropped, not erred.
std::optional<Descriptor> compute_descriptor(const Volume& v, const Keypoint& kp,
                                             const DescriptorConfig& cfg);

}  // namespace vfp
