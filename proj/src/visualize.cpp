#include "vfp/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vfp/detail/binary_io.hpp"
#include "vfp/errors.hpp"

namespace vfp {

namespace {

// In-plane axes for a slice normal: axis 0 -> (y,z), 1 -> (x,z), 2 -> (x,y).
void plane_axes(int axis, int& u_axis, int& v_axis) {
    if (axis == 0) {
        u_axis = 1;
        v_axis = 2;
    } else if (axis == 1) {
        u_axis = 0;
        v_axis = 2;
    } else {
        u_axis = 0;
        v_axis = 1;
    }
}

}  // namespace

SliceImage render_slice(const Volume& v, int axis, int slice) {
    if (axis < 0 || axis > 2) raise(ErrorCode::InvalidArgument, "axis must be 0, 1, or 2");
    if (slice < 0 || slice >= v.dims()[axis])
        raise(ErrorCode::SliceOutOfRange,
              "slice " + std::to_string(slice) + " outside axis of size " +
                  std::to_string(v.dims()[axis]));

    Volume norm = normalize_intensity(v);

    int u_axis, v_axis;
    plane_axes(axis, u_axis, v_axis);
    SliceImage img;
    img.width = v.dims()[u_axis];
    img.height = v.dims()[v_axis];
    img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);

    for (int j = 0; j < img.height; ++j)
        for (int i = 0; i < img.width; ++i) {
            int c[3];
            c[axis] = slice;
            c[u_axis] = i;
            c[v_axis] = j;
            float val = norm.grid.at(c[0], c[1], c[2]);
            auto g = static_cast<std::uint8_t>(
                std::lround(std::clamp(static_cast<double>(val), 0.0, 1.0) * 255.0));
            std::size_t off = (static_cast<std::size_t>(j) * img.width + i) * 3;
            img.rgb[off] = img.rgb[off + 1] = img.rgb[off + 2] = g;
        }
    return img;
}

void draw_circle(SliceImage& img, double u0, double v0, double rho) {
    int lo_u = std::max(0, static_cast<int>(std::floor(u0 - rho - 1.0)));
    int hi_u = std::min(img.width - 1, static_cast<int>(std::ceil(u0 + rho + 1.0)));
    int lo_v = std::max(0, static_cast<int>(std::floor(v0 - rho - 1.0)));
    int hi_v = std::min(img.height - 1, static_cast<int>(std::ceil(v0 + rho + 1.0)));
    for (int j = lo_v; j <= hi_v; ++j)
        for (int i = lo_u; i <= hi_u; ++i) {
            double du = i - u0, dv = j - v0;
            double dist = std::sqrt(du * du + dv * dv);
            if (std::abs(dist - rho) > 0.5) continue;
            std::size_t off = (static_cast<std::size_t>(j) * img.width + i) * 3;
            img.rgb[off] = 255;
            img.rgb[off + 1] = 0;
            img.rgb[off + 2] = 0;
        }
}

void overlay_keypoints(SliceImage& img, const std::vector<Keypoint>& kps, int axis, int slice) {
    int u_axis, v_axis;
    plane_axes(axis, u_axis, v_axis);
    for (const Keypoint& kp : kps) {
        double r = 3.0 * kp.sigma;
        double d = std::abs(kp.position[axis] - static_cast<double>(slice));
        if (d > r) continue;
        double rho = std::sqrt(r * r - d * d);
        draw_circle(img, kp.position[u_axis], kp.position[v_axis], rho);
    }
}

std::array<std::vector<Keypoint>, 2> matched_keypoints(const CohortGraph& g,
                                                       const Fingerprint& fp_a,
                                                       const Fingerprint& fp_b,
                                                       const std::string& modality) {
    std::uint32_t sa = 0xffffffffu, sb = 0xffffffffu;
    for (std::uint32_t i = 0; i < g.subjects.size(); ++i) {
        if (g.subjects[i] == fp_a.subject_id) sa = i;
        if (g.subjects[i] == fp_b.subject_id) sb = i;
    }
    if (sa == 0xffffffffu)
        raise(ErrorCode::UnknownSubject, "subject " + fp_a.subject_id + " is not in the graph");
    if (sb == 0xffffffffu)
        raise(ErrorCode::UnknownSubject, "subject " + fp_b.subject_id + " is not in the graph");

    // The graph's node order contract: per subject, nodes appear in bag
    // order filtered to the graph's modality subset.
    std::set<std::string> subset(g.modalities.begin(), g.modalities.end());
    auto eligible_records = [&](const Fingerprint& fp) {
        std::vector<const Descriptor*> recs;
        for (const auto& r : fp.records)
            if (subset.count(r.modality_id)) recs.push_back(&r);
        return recs;
    };
    auto recs_a = eligible_records(fp_a);
    auto recs_b = eligible_records(fp_b);
    if (recs_a.size() != g.subject_descriptor_count[sa] ||
        recs_b.size() != g.subject_descriptor_count[sb])
        raise(ErrorCode::MismatchedCohorts,
              "fingerprint record counts do not match the graph's node table");

    // Per-subject ordinal of every node, so a global node index maps to a
    // record without loading other subjects' fingerprints.
    std::vector<std::uint64_t> ordinal(g.node_count(), 0);
    std::vector<std::uint64_t> seen(g.subjects.size(), 0);
    for (std::size_t i = 0; i < g.node_count(); ++i) ordinal[i] = seen[g.node_subject[i]]++;

    std::set<std::size_t> matched_a, matched_b;
    for (std::size_t u = 0; u < g.node_count(); ++u) {
        std::uint32_t su = g.node_subject[u];
        if (su != sa && su != sb) continue;
        for (std::uint64_t e = g.offsets[u]; e < g.offsets[u + 1]; ++e) {
            std::uint32_t v = g.targets[e];
            std::uint32_t sv = g.node_subject[v];
            bool cross = (su == sa && sv == sb) || (su == sb && sv == sa);
            if (!cross) continue;
            (su == sa ? matched_a : matched_b).insert(u);
            (sv == sa ? matched_a : matched_b).insert(v);
        }
    }

    std::array<std::vector<Keypoint>, 2> out;
    for (std::size_t i : matched_a) {
        const Descriptor* rec = recs_a[ordinal[i]];
        if (!modality.empty() && rec->modality_id != modality) continue;
        out[0].push_back(rec->keypoint);
    }
    for (std::size_t i : matched_b) {
        const Descriptor* rec = recs_b[ordinal[i]];
        if (!modality.empty() && rec->modality_id != modality) continue;
        out[1].push_back(rec->keypoint);
    }
    return out;
}

void write_ppm(const SliceImage& img, const std::string& path) {
    std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
    detail::write_file(path, out.data(), out.size());
}

}  // namespace vfp
