#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vfp/fingerprint.hpp"
#include "vfp/similarity_graph.hpp"
#include "vfp/volume.hpp"

namespace vfp {

struct SliceImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

/// Grayscale rendering of one axis-aligned slice at 1 pixel per voxel. The
/// volume is intensity-normalized for display; values map to round(v*255).
/// axis 0 shows the (y,z) plane, 1 the (x,z) plane, 2 the (x,y) plane.
/// Raises SliceOutOfRange.
SliceImage render_slice(const Volume& v, int axis, int slice);

/// Red ring of radius rho around (u0, v0): pixels whose center distance to
/// the circle is within 0.5 px.
void draw_circle(SliceImage& img, double u0, double v0, double rho);

/// Overlays each keypoint whose sphere of radius 3*sigma reaches the slice
/// plane: ring radius sqrt(r^2 - d^2) with d the keypoint-plane distance.
/// Keypoints with d > r draw nothing.
void overlay_keypoints(SliceImage& img, const std::vector<Keypoint>& kps, int axis, int slice);

/// Keypoints of subjects a and b that are endpoints of an a-b intersection
/// edge, restricted to `modality` (empty keeps all graph modalities).
/// Node indices are mapped back to records through the graph's node order
/// contract, so the fingerprints must be the ones the graph was built from.
/// Returns {a's matched keypoints, b's matched keypoints}.
std::array<std::vector<Keypoint>, 2> matched_keypoints(const CohortGraph& g,
                                                       const Fingerprint& fp_a,
                                                       const Fingerprint& fp_b,
                                                       const std::string& modality);

/// Binary PPM (P6), 8-bit RGB.
void write_ppm(const SliceImage& img, const std::string& path);

}  // namespace vfp
