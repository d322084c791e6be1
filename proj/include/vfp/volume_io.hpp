#pragma once

#include <cstdint>
#include <string>

#include "vfp/volume.hpp"

namespace vfp {

/// Statistics gathered while loading a volume.
struct LoadReport {
    std::uint64_t nonfinite_replaced = 0;  // NaN/Inf voxels zeroed during load
};

/// Reads a NIfTI-1 file. Supported subset: little-endian single-file ("n+1")
/// or header+image pair ("ni1", data in the sibling .img), datatypes uint8,
/// int16, float32, three spatial dimensions (higher dims accepted when the
/// trailing sizes are all 1). scl_slope/scl_inter are applied; slope 0 means
/// unscaled. Anything else is UnsupportedFormat; non-positive dims or spacing
/// is CorruptHeader; a payload shorter than the header promises is
/// TruncatedData. Non-finite voxels become 0 and are counted in the report.
Volume read_nifti(const std::string& path, LoadReport* report = nullptr);

/// Reads a raw volume: <base>.f32 holds little-endian float32 voxels in
/// x-fastest order, <base>.json describes it (keys: dims, spacing,
/// subject_id, modality_id, optional origin). `path` may name either file.
Volume read_raw(const std::string& path, LoadReport* report = nullptr);

/// Writes <base>.f32 plus its .json sidecar. `path` may carry either
/// extension or none. A volume written and re-read is bitwise identical.
void write_raw(const Volume& v, const std::string& path);

/// Dispatches on extension: .nii to the NIfTI reader, .f32/.json to the raw
/// reader. When `expected_modality` is non-empty it overrides whatever the
/// file carries; it is normalized either way.
Volume load_volume(const std::string& path, const std::string& expected_modality = "",
                   LoadReport* report = nullptr);

}  // namespace vfp
