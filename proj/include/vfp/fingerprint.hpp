#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vfp/descriptor.hpp"
#include "vfp/scale_space.hpp"
#include "vfp/volume.hpp"

namespace vfp {

/// Orderless bag of descriptors for one subject, possibly spanning several
/// modalities. Downstream similarity must not depend on record order.
struct Fingerprint {
    std::string subject_id;
    std::uint16_t descriptor_dim = 0;
    std::vector<Descriptor> records;
    std::map<std::string, std::size_t> modality_counts;
};

/// Per-modality extraction counters for one build_fingerprint call.
struct ModalityBuildStats {
    std::string modality_id;
    std::size_t detected = 0;
    std::size_t low_contrast = 0;
    std::size_t edge_like = 0;
    std::size_t margin_dropped = 0;
    std::size_t kept = 0;
};

struct FingerprintBuildReport {
    std::vector<ModalityBuildStats> modalities;
};

/// Runs the full per-volume pipeline (intensity normalization, DoG stack,
/// extrema, rejection, descriptors) and concatenates the per-modality
/// descriptor sets. Volumes must share subject_id and carry distinct
/// modality_ids (DuplicateModality otherwise). Keypoints whose descriptor
/// window leaves the volume are dropped and counted in the report.
Fingerprint build_fingerprint(const std::string& subject_id, const std::vector<Volume>& volumes,
                              const ScaleSpaceConfig& ss_cfg, const DescriptorConfig& d_cfg,
                              FingerprintBuildReport* report = nullptr);

/// Binary fingerprint file, little-endian: magic "VFPR", u16 version (=1),
/// u16 descriptor_dim, u32 record count, subject_id (u16 length + UTF-8),
/// then per record: modality_id (u16 length + UTF-8), position as 3 f32,
/// sigma f32, dog_value f32, descriptor_dim f32 descriptor entries.
void write_fingerprint(const Fingerprint& fp, const std::string& path);

/// Raises BadMagic, VersionMismatch, or Truncated on malformed files.
Fingerprint read_fingerprint(const std::string& path);

}  // namespace vfp
