#include "vfp/fingerprint.hpp"

#include <optional>
#include <set>

#include "vfp/detail/binary_io.hpp"
#include "vfp/errors.hpp"
#include "vfp/parallel.hpp"

namespace vfp {

Fingerprint build_fingerprint(const std::string& subject_id, const std::vector<Volume>& volumes,
                              const ScaleSpaceConfig& ss_cfg, const DescriptorConfig& d_cfg,
                              FingerprintBuildReport* report) {
    std::set<std::string> seen;
    for (const Volume& v : volumes) {
        if (!seen.insert(v.modality_id).second)
            raise(ErrorCode::DuplicateModality,
                  "subject " + subject_id + " has two volumes tagged " + v.modality_id);
    }

    Fingerprint fp;
    fp.subject_id = subject_id;
    fp.descriptor_dim = static_cast<std::uint16_t>(
        d_cfg.subregions * d_cfg.subregions * d_cfg.subregions * d_cfg.orientation_bins);
    FingerprintBuildReport rep;

    for (const Volume& vol : volumes) {
        Volume v = normalize_intensity(vol);
        v.subject_id = subject_id;

        DogStack stack = build_dog_stack(v, ss_cfg);
        auto kps = detect_extrema(stack, ss_cfg);
        RejectStats rstats;
        auto kept = reject_keypoints(kps, stack, ss_cfg, &rstats);

        // Per-slot results keep record order independent of thread count.
        std::vector<std::optional<Descriptor>> slots(kept.size());
        parallel_for(kept.size(), [&](std::size_t i0, std::size_t i1) {
            for (std::size_t i = i0; i < i1; ++i)
                slots[i] = compute_descriptor(v, kept[i], d_cfg);
        });

        ModalityBuildStats ms;
        ms.modality_id = v.modality_id;
        ms.detected = kps.size();
        ms.low_contrast = rstats.low_contrast;
        ms.edge_like = rstats.edge_like;
        for (auto& s : slots) {
            if (!s) {
                ++ms.margin_dropped;
                continue;
            }
            ++ms.kept;
            fp.records.push_back(std::move(*s));
        }
        fp.modality_counts[v.modality_id] += ms.kept;
        rep.modalities.push_back(std::move(ms));
    }
    if (report) *report = std::move(rep);
    return fp;
}

void write_fingerprint(const Fingerprint& fp, const std::string& path) {
    detail::ByteWriter w;
    w.bytes("VFPR", 4);
    w.u16(1);
    w.u16(fp.descriptor_dim);
    if (fp.records.size() > 0xffffffffu)
        raise(ErrorCode::InvalidArgument, "too many records for the fingerprint format");
    w.u32(static_cast<std::uint32_t>(fp.records.size()));
    w.str16(fp.subject_id);
    for (const Descriptor& d : fp.records) {
        if (d.vector.size() != fp.descriptor_dim)
            raise(ErrorCode::InvalidArgument, "descriptor length differs from descriptor_dim");
        w.str16(d.modality_id);
        for (int i = 0; i < 3; ++i) w.f32(static_cast<float>(d.keypoint.position[i]));
        w.f32(static_cast<float>(d.keypoint.sigma));
        w.f32(d.keypoint.dog_value);
        for (float e : d.vector) w.f32(e);
    }
    detail::write_file(path, w.data().data(), w.data().size());
}

Fingerprint read_fingerprint(const std::string& path) {
    auto buf = detail::read_file(path);
    detail::ByteReader r(buf.data(), buf.size(), ErrorCode::Truncated);
    if (r.remaining() < 4) raise(ErrorCode::Truncated, path + ": shorter than the magic");
    char magic[4];
    magic[0] = static_cast<char>(r.u8());
    magic[1] = static_cast<char>(r.u8());
    magic[2] = static_cast<char>(r.u8());
    magic[3] = static_cast<char>(r.u8());
    if (std::string(magic, 4) != "VFPR") raise(ErrorCode::BadMagic, path + ": not a fingerprint file");
    std::uint16_t version = r.u16();
    if (version != 1)
        raise(ErrorCode::VersionMismatch,
              path + ": fingerprint version " + std::to_string(version) + ", expected 1");

    Fingerprint fp;
    fp.descriptor_dim = r.u16();
    std::uint32_t count = r.u32();
    fp.subject_id = r.str16();
    fp.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Descriptor d;
        d.modality_id = r.str16();
        for (int j = 0; j < 3; ++j) d.keypoint.position[j] = r.f32();
        d.keypoint.sigma = r.f32();
        d.keypoint.dog_value = r.f32();
        d.vector.resize(fp.descriptor_dim);
        for (auto& e : d.vector) e = r.f32();
        d.subject_id = fp.subject_id;
        fp.modality_counts[d.modality_id] += 1;
        fp.records.push_back(std::move(d));
    }
    return fp;
}

}  // namespace vfp
