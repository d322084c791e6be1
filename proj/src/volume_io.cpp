#include "vfp/volume_io.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>

#include <json.hpp>

#include "vfp/detail/binary_io.hpp"

namespace vfp {

namespace fs = std::filesystem;
using detail::ByteReader;
using detail::ByteWriter;
using json = nlohmann::json;

namespace {

// NIfTI-1 header field offsets (348-byte header).
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffMagic = 344;
constexpr std::size_t kHeaderSize = 348;

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

float sanitize(float v, LoadReport* report) {
    if (!std::isfinite(v)) {
        if (report) ++report->nonfinite_replaced;
        return 0.0f;
    }
    return v;
}

std::string strip_raw_ext(const std::string& path) {
    fs::path p(path);
    auto ext = p.extension().string();
    if (ext == ".f32" || ext == ".json") return (p.parent_path() / p.stem()).string();
    return path;
}

}  // namespace

Volume read_nifti(const std::string& path, LoadReport* report) {
    auto buf = detail::read_file(path);
    if (buf.size() < kHeaderSize)
        raise(ErrorCode::TruncatedData, path + ": file shorter than the 348-byte header");

    ByteReader r(buf.data(), buf.size(), ErrorCode::TruncatedData);
    std::int32_t sizeof_hdr = r.i32();
    if (sizeof_hdr != 348) {
        if (sizeof_hdr == 1543569408)  // 348 with swapped bytes
            raise(ErrorCode::UnsupportedFormat, path + ": big-endian NIfTI is not supported");
        raise(ErrorCode::UnsupportedFormat, path + ": not a NIfTI-1 header");
    }

    char magic[4];
    std::memcpy(magic, buf.data() + kOffMagic, 4);
    bool single_file;
    if (std::memcmp(magic, "n+1", 4) == 0)
        single_file = true;
    else if (std::memcmp(magic, "ni1", 4) == 0)
        single_file = false;
    else
        raise(ErrorCode::UnsupportedFormat, path + ": bad NIfTI magic");

    r.seek(kOffDim);
    std::int16_t dim[8];
    for (auto& d : dim) d = r.i16();
    if (dim[0] < 1 || dim[0] > 7)
        raise(ErrorCode::CorruptHeader, path + ": dim[0] out of range");
    if (dim[0] < 3)
        raise(ErrorCode::UnsupportedFormat, path + ": need three spatial dimensions");
    for (int i = 1; i <= 3; ++i)
        if (dim[i] <= 0) raise(ErrorCode::CorruptHeader, path + ": non-positive dimension");
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[i] > 1)
            raise(ErrorCode::UnsupportedFormat, path + ": multi-volume files are not supported");

    r.seek(kOffDatatype);
    std::int16_t datatype = r.i16();
    std::int16_t bitpix = r.i16();
    int voxel_bytes;
    switch (datatype) {
        case kDtUint8: voxel_bytes = 1; break;
        case kDtInt16: voxel_bytes = 2; break;
        case kDtFloat32: voxel_bytes = 4; break;
        default:
            raise(ErrorCode::UnsupportedFormat,
                  path + ": datatype " + std::to_string(datatype) +
                      " not supported (uint8, int16, float32 only)");
    }
    if (bitpix != voxel_bytes * 8)
        raise(ErrorCode::CorruptHeader, path + ": bitpix does not match datatype");

    r.seek(kOffPixdim);
    float pixdim[8];
    for (auto& p : pixdim) p = r.f32();
    for (int i = 1; i <= 3; ++i)
        if (!std::isfinite(pixdim[i]) || pixdim[i] <= 0.0f)
            raise(ErrorCode::CorruptHeader, path + ": non-positive voxel spacing");

    r.seek(kOffVoxOffset);
    float vox_offset_f = r.f32();
    float scl_slope = r.f32();
    float scl_inter = r.f32();
    if (!std::isfinite(vox_offset_f) || vox_offset_f < 0.0f)
        raise(ErrorCode::CorruptHeader, path + ": bad vox_offset");
    auto vox_offset = static_cast<std::size_t>(vox_offset_f);
    // slope 0 means "no scaling stored"; the intercept is ignored with it.
    double slope = (scl_slope == 0.0f || !std::isfinite(scl_slope)) ? 1.0 : scl_slope;
    double inter = (scl_slope == 0.0f || !std::isfinite(scl_inter)) ? 0.0 : scl_inter;

    std::vector<std::uint8_t> img_buf;
    const std::vector<std::uint8_t>* payload = &buf;
    if (single_file) {
        if (vox_offset < kHeaderSize)
            raise(ErrorCode::CorruptHeader, path + ": vox_offset points inside the header");
    } else {
        fs::path img = fs::path(path);
        img.replace_extension(".img");
        img_buf = detail::read_file(img.string());
        payload = &img_buf;
    }

    std::size_t n = static_cast<std::size_t>(dim[1]) * static_cast<std::size_t>(dim[2]) *
                    static_cast<std::size_t>(dim[3]);
    std::size_t need = n * static_cast<std::size_t>(voxel_bytes);
    if (vox_offset > payload->size() || payload->size() - vox_offset < need)
        raise(ErrorCode::TruncatedData, path + ": voxel data shorter than the header promises");

    Volume v;
    v.grid.dims = {dim[1], dim[2], dim[3]};
    v.grid.values.resize(n);
    v.spacing = {pixdim[1], pixdim[2], pixdim[3]};

    ByteReader data(payload->data(), payload->size(), ErrorCode::TruncatedData);
    data.seek(vox_offset);
    switch (datatype) {
        case kDtUint8:
            for (std::size_t i = 0; i < n; ++i)
                v.grid.values[i] =
                    sanitize(static_cast<float>(data.u8() * slope + inter), report);
            break;
        case kDtInt16:
            for (std::size_t i = 0; i < n; ++i)
                v.grid.values[i] =
                    sanitize(static_cast<float>(data.i16() * slope + inter), report);
            break;
        case kDtFloat32:
            for (std::size_t i = 0; i < n; ++i)
                v.grid.values[i] =
                    sanitize(static_cast<float>(data.f32() * slope + inter), report);
            break;
    }
    return v;
}

Volume read_raw(const std::string& path, LoadReport* report) {
    std::string base = strip_raw_ext(path);
    std::string json_path = base + ".json";
    std::string f32_path = base + ".f32";

    auto side_bytes = detail::read_file(json_path);
    json side = json::parse(side_bytes.begin(), side_bytes.end(), nullptr, false);
    if (side.is_discarded() || !side.is_object())
        raise(ErrorCode::CorruptHeader, json_path + ": sidecar is not valid JSON");

    auto need_key = [&](const char* key) -> const json& {
        auto it = side.find(key);
        if (it == side.end())
            raise(ErrorCode::CorruptHeader, json_path + ": missing key \"" + key + "\"");
        return *it;
    };

    const json& jd = need_key("dims");
    if (!jd.is_array() || jd.size() != 3)
        raise(ErrorCode::CorruptHeader, json_path + ": dims must be an array of 3 integers");
    const json& js = need_key("spacing");
    if (!js.is_array() || js.size() != 3)
        raise(ErrorCode::CorruptHeader, json_path + ": spacing must be an array of 3 numbers");

    Volume v;
    for (int i = 0; i < 3; ++i) {
        if (!jd[i].is_number_integer() || jd[i].get<std::int64_t>() <= 0)
            raise(ErrorCode::CorruptHeader, json_path + ": non-positive dimension");
        v.grid.dims[i] = jd[i].get<int>();
        if (!js[i].is_number())
            raise(ErrorCode::CorruptHeader, json_path + ": spacing must be numeric");
        v.spacing[i] = js[i].get<double>();
        if (!std::isfinite(v.spacing[i]) || v.spacing[i] <= 0.0)
            raise(ErrorCode::CorruptHeader, json_path + ": non-positive spacing");
    }
    const json& jsub = need_key("subject_id");
    const json& jmod = need_key("modality_id");
    if (!jsub.is_string() || !jmod.is_string())
        raise(ErrorCode::CorruptHeader, json_path + ": subject_id/modality_id must be strings");
    v.subject_id = jsub.get<std::string>();
    v.modality_id = jmod.get<std::string>();
    if (!v.modality_id.empty()) v.modality_id = normalize_modality(v.modality_id);
    if (auto it = side.find("origin"); it != side.end()) {
        if (!it->is_array() || it->size() != 3)
            raise(ErrorCode::CorruptHeader, json_path + ": origin must be an array of 3 numbers");
        for (int i = 0; i < 3; ++i) v.origin[i] = (*it)[i].get<double>();
    }

    auto payload = detail::read_file(f32_path);
    std::size_t n = static_cast<std::size_t>(v.grid.dims[0]) * v.grid.dims[1] * v.grid.dims[2];
    if (payload.size() < n * 4)
        raise(ErrorCode::TruncatedData, f32_path + ": voxel data shorter than the sidecar promises");
    if (payload.size() > n * 4)
        raise(ErrorCode::CorruptHeader, f32_path + ": voxel data larger than the sidecar promises");

    v.grid.values.resize(n);
    ByteReader data(payload.data(), payload.size(), ErrorCode::TruncatedData);
    for (std::size_t i = 0; i < n; ++i) v.grid.values[i] = sanitize(data.f32(), report);
    return v;
}

void write_raw(const Volume& v, const std::string& path) {
    std::string base = strip_raw_ext(path);

    json side;
    side["dims"] = {v.grid.dims[0], v.grid.dims[1], v.grid.dims[2]};
    side["spacing"] = {v.spacing[0], v.spacing[1], v.spacing[2]};
    side["origin"] = {v.origin[0], v.origin[1], v.origin[2]};
    side["subject_id"] = v.subject_id;
    side["modality_id"] = v.modality_id;
    std::string text = side.dump(2);
    text.push_back('\n');
    detail::write_file(base + ".json", text.data(), text.size());

    ByteWriter w;
    for (float value : v.grid.values) w.f32(value);
    detail::write_file(base + ".f32", w.data().data(), w.data().size());
}

Volume load_volume(const std::string& path, const std::string& expected_modality,
                   LoadReport* report) {
    std::string ext = fs::path(path).extension().string();
    for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    Volume v;
    if (ext == ".nii" || ext == ".hdr")
        v = read_nifti(path, report);
    else if (ext == ".f32" || ext == ".json")
        v = read_raw(path, report);
    else if (ext == ".gz")
        raise(ErrorCode::UnsupportedFormat, path + ": compressed volumes are not supported");
    else
        raise(ErrorCode::UnsupportedFormat, path + ": unrecognized volume extension");

    if (!expected_modality.empty()) v.modality_id = normalize_modality(expected_modality);
    return v;
}

}  // namespace vfp
