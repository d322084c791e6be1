#include <doctest.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "vfp/errors.hpp"
#include "vfp/volume_io.hpp"

using namespace vfp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "vfp_io_tests";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

void write_bytes(const fs::path& path, const std::vector<unsigned char>& bytes) {
    FILE* f = std::fopen(path.string().c_str(), "wb");
    REQUIRE(f != nullptr);
    if (!bytes.empty()) std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
}

// Hand-built little-endian stores, independent of the library's writer.
void put_i16(std::vector<unsigned char>& b, std::size_t off, std::int16_t v) {
    b[off] = static_cast<unsigned char>(v & 0xff);
    b[off + 1] = static_cast<unsigned char>((v >> 8) & 0xff);
}
void put_i32(std::vector<unsigned char>& b, std::size_t off, std::int32_t v) {
    for (int i = 0; i < 4; ++i) b[off + i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
}
void put_f32(std::vector<unsigned char>& b, std::size_t off, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    for (int i = 0; i < 4; ++i) b[off + i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
}

struct NiftiParams {
    std::array<int, 3> dims{4, 3, 2};
    std::array<float, 3> pixdim{1.0f, 1.0f, 1.0f};
    std::int16_t datatype = 16;  // float32
    std::int16_t bitpix = 32;
    float scl_slope = 0.0f;
    float scl_inter = 0.0f;
    float vox_offset = 352.0f;
    const char* magic = "n+1";
    std::int16_t ndim = 3;
};

std::vector<unsigned char> make_header(const NiftiParams& p) {
    std::vector<unsigned char> h(348, 0);
    put_i32(h, 0, 348);
    put_i16(h, 40, p.ndim);
    put_i16(h, 42, static_cast<std::int16_t>(p.dims[0]));
    put_i16(h, 44, static_cast<std::int16_t>(p.dims[1]));
    put_i16(h, 46, static_cast<std::int16_t>(p.dims[2]));
    for (int i = 3; i < 7; ++i) put_i16(h, 40 + 2 * (i + 1), 1);
    put_i16(h, 70, p.datatype);
    put_i16(h, 72, p.bitpix);
    put_f32(h, 76, 1.0f);  // pixdim[0], unused
    put_f32(h, 80, p.pixdim[0]);
    put_f32(h, 84, p.pixdim[1]);
    put_f32(h, 88, p.pixdim[2]);
    put_f32(h, 108, p.vox_offset);
    put_f32(h, 112, p.scl_slope);
    put_f32(h, 116, p.scl_inter);
    std::memcpy(h.data() + 344, p.magic, 4);
    return h;
}

fs::path write_nifti_float(const std::string& name, const NiftiParams& p,
                           const std::vector<float>& voxels) {
    std::vector<unsigned char> bytes = make_header(p);
    bytes.resize(static_cast<std::size_t>(p.vox_offset), 0);
    std::size_t base = bytes.size();
    bytes.resize(base + voxels.size() * 4);
    for (std::size_t i = 0; i < voxels.size(); ++i) put_f32(bytes, base + 4 * i, voxels[i]);
    fs::path path = temp_dir() / name;
    write_bytes(path, bytes);
    return path;
}

Volume sample_volume(std::uint64_t seed) {
    Volume v;
    v.grid = Grid3(5, 4, 3);
    std::mt19937_64 rng(seed);
    for (auto& x : v.grid.values)
        x = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
    v.spacing = {0.7, 0.8, 0.9};
    v.origin = {-1.0, 2.0, 3.5};
    v.subject_id = "S042";
    v.modality_id = "T1";
    return v;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("raw volumes round-trip bitwise") {
    Volume v = sample_volume(1);
    fs::path path = temp_dir() / "rt.f32";
    write_raw(v, path.string());
    Volume r = read_raw(path.string());
    CHECK(r.dims() == v.dims());
    CHECK(r.spacing == v.spacing);
    CHECK(r.origin == v.origin);
    CHECK(r.subject_id == v.subject_id);
    CHECK(r.modality_id == v.modality_id);
    REQUIRE(r.grid.values.size() == v.grid.values.size());
    CHECK(std::memcmp(r.grid.values.data(), v.grid.values.data(),
                      v.grid.values.size() * 4) == 0);
}

TEST_CASE("raw reader accepts either the payload or sidecar path") {
    Volume v = sample_volume(2);
    fs::path path = temp_dir() / "either.f32";
    write_raw(v, path.string());
    Volume a = read_raw((temp_dir() / "either.f32").string());
    Volume b = read_raw((temp_dir() / "either.json").string());
    CHECK(a.grid.values == b.grid.values);
}

TEST_CASE("raw reader validates the sidecar") {
    Volume v = sample_volume(3);
    fs::path path = temp_dir() / "bad.f32";
    write_raw(v, path.string());

    SUBCASE("missing key") {
        write_bytes(temp_dir() / "bad.json", std::vector<unsigned char>{'{', '}'});
        CHECK(code_of([&] { read_raw(path.string()); }) == ErrorCode::CorruptHeader);
    }
    SUBCASE("short payload") {
        fs::resize_file(temp_dir() / "bad.f32", 8);
        CHECK(code_of([&] { read_raw(path.string()); }) == ErrorCode::TruncatedData);
    }
    SUBCASE("long payload") {
        auto sz = fs::file_size(temp_dir() / "bad.f32");
        fs::resize_file(temp_dir() / "bad.f32", sz + 4);
        CHECK(code_of([&] { read_raw(path.string()); }) == ErrorCode::CorruptHeader);
    }
}

TEST_CASE("a single-file float32 image reads back exactly") {
    NiftiParams p;
    std::vector<float> vox(4 * 3 * 2);
    for (std::size_t i = 0; i < vox.size(); ++i) vox[i] = static_cast<float>(i) * 0.5f - 3.0f;
    p.pixdim = {0.5f, 0.75f, 1.25f};
    fs::path path = write_nifti_float("plain.nii", p, vox);

    Volume v = read_nifti(path.string());
    CHECK(v.dims()[0] == 4);
    CHECK(v.dims()[1] == 3);
    CHECK(v.dims()[2] == 2);
    CHECK(v.spacing[0] == doctest::Approx(0.5));
    CHECK(v.spacing[1] == doctest::Approx(0.75));
    CHECK(v.spacing[2] == doctest::Approx(1.25));
    for (std::size_t i = 0; i < vox.size(); ++i) CHECK(v.grid.values[i] == vox[i]);
}

TEST_CASE("slope and intercept rescale stored values") {
    NiftiParams p;
    p.scl_slope = 2.0f;
    p.scl_inter = 10.0f;
    std::vector<float> vox(24, 3.0f);
    fs::path path = write_nifti_float("scaled.nii", p, vox);
    Volume v = read_nifti(path.string());
    for (float x : v.grid.values) CHECK(x == doctest::Approx(16.0));
}

TEST_CASE("a zero slope means unscaled data") {
    NiftiParams p;
    p.scl_slope = 0.0f;
    p.scl_inter = 99.0f;  // must be ignored
    std::vector<float> vox(24, 3.0f);
    fs::path path = write_nifti_float("unscaled.nii", p, vox);
    Volume v = read_nifti(path.string());
    for (float x : v.grid.values) CHECK(x == doctest::Approx(3.0));
}

TEST_CASE("integer datatypes are converted and scaled") {
    NiftiParams p;
    p.datatype = 4;  // int16
    p.bitpix = 16;
    p.scl_slope = 0.5f;
    std::vector<unsigned char> bytes = make_header(p);
    bytes.resize(352, 0);
    std::vector<std::int16_t> vox(24);
    for (std::size_t i = 0; i < vox.size(); ++i) vox[i] = static_cast<std::int16_t>(i) - 5;
    std::size_t base = bytes.size();
    bytes.resize(base + vox.size() * 2);
    for (std::size_t i = 0; i < vox.size(); ++i) put_i16(bytes, base + 2 * i, vox[i]);
    fs::path path = temp_dir() / "int16.nii";
    write_bytes(path, bytes);

    Volume v = read_nifti(path.string());
    for (std::size_t i = 0; i < vox.size(); ++i)
        CHECK(v.grid.values[i] == doctest::Approx(0.5 * vox[i]));
}

TEST_CASE("uint8 data reads as plain values") {
    NiftiParams p;
    p.datatype = 2;
    p.bitpix = 8;
    std::vector<unsigned char> bytes = make_header(p);
    bytes.resize(352, 0);
    for (int i = 0; i < 24; ++i) bytes.push_back(static_cast<unsigned char>(i * 10));
    fs::path path = temp_dir() / "u8.nii";
    write_bytes(path, bytes);
    Volume v = read_nifti(path.string());
    for (int i = 0; i < 24; ++i) CHECK(v.grid.values[i] == doctest::Approx(i * 10.0));
}

TEST_CASE("non-finite voxels are zeroed and counted") {
    NiftiParams p;
    std::vector<float> vox(24, 1.0f);
    vox[3] = std::numeric_limits<float>::quiet_NaN();
    vox[7] = std::numeric_limits<float>::infinity();
    vox[9] = -std::numeric_limits<float>::infinity();
    fs::path path = write_nifti_float("nan.nii", p, vox);
    LoadReport report;
    Volume v = read_nifti(path.string(), &report);
    CHECK(report.nonfinite_replaced == 3);
    CHECK(v.grid.values[3] == 0.0f);
    CHECK(v.grid.values[7] == 0.0f);
    CHECK(v.grid.values[9] == 0.0f);
}

TEST_CASE("header-plus-image pairs follow the sibling file") {
    NiftiParams p;
    p.magic = "ni1";
    p.vox_offset = 0.0f;
    std::vector<unsigned char> header = make_header(p);
    fs::path hdr = temp_dir() / "pair.hdr";
    write_bytes(hdr, header);

    std::vector<float> vox(24);
    for (std::size_t i = 0; i < vox.size(); ++i) vox[i] = static_cast<float>(i);
    std::vector<unsigned char> img(vox.size() * 4);
    for (std::size_t i = 0; i < vox.size(); ++i) put_f32(img, 4 * i, vox[i]);
    write_bytes(temp_dir() / "pair.img", img);

    Volume v = read_nifti(hdr.string());
    for (std::size_t i = 0; i < vox.size(); ++i) CHECK(v.grid.values[i] == vox[i]);
}

TEST_CASE("malformed image headers are rejected with specific codes") {
    NiftiParams p;
    std::vector<float> vox(24, 1.0f);

    SUBCASE("byte-swapped header") {
        std::vector<unsigned char> h = make_header(p);
        // sizeof_hdr stored big-endian: 0,0,1,92
        h[0] = 0; h[1] = 0; h[2] = 1; h[3] = 92;
        h.resize(352);
        fs::path path = temp_dir() / "swapped.nii";
        write_bytes(path, h);
        try {
            read_nifti(path.string());
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::UnsupportedFormat);
            CHECK(std::string(e.what()).find("big-endian") != std::string::npos);
        }
    }
    SUBCASE("unknown magic") {
        p.magic = "xxx";
        fs::path path = write_nifti_float("magic.nii", p, vox);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::UnsupportedFormat);
    }
    SUBCASE("unsupported datatype") {
        p.datatype = 64;  // float64
        p.bitpix = 64;
        fs::path path = write_nifti_float("dt.nii", p, vox);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::UnsupportedFormat);
    }
    SUBCASE("bitpix contradicts datatype") {
        p.bitpix = 16;
        fs::path path = write_nifti_float("bp.nii", p, vox);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::CorruptHeader);
    }
    SUBCASE("fewer than three dims") {
        p.ndim = 2;
        fs::path path = write_nifti_float("d2.nii", p, vox);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::UnsupportedFormat);
    }
    SUBCASE("ndim out of range") {
        p.ndim = 0;
        fs::path path = write_nifti_float("d0.nii", p, vox);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::CorruptHeader);
    }
    SUBCASE("trailing dims above one") {
        std::vector<unsigned char> h = make_header(p);
        put_i16(h, 40, 4);
        put_i16(h, 48, 2);  // dim[4] = 2: a 4D series
        h.resize(352);
        std::size_t base = h.size();
        h.resize(base + 24 * 4);
        for (std::size_t i = 0; i < 24; ++i) put_f32(h, base + 4 * i, 1.0f);
        fs::path path = temp_dir() / "d4.nii";
        write_bytes(path, h);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::UnsupportedFormat);
    }
    SUBCASE("non-positive voxel size") {
        p.pixdim[1] = 0.0f;
        fs::path path = write_nifti_float("pd.nii", p, vox);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::CorruptHeader);
    }
    SUBCASE("payload ends early") {
        std::vector<unsigned char> h = make_header(p);
        h.resize(352 + 10 * 4, 0);
        fs::path path = temp_dir() / "short.nii";
        write_bytes(path, h);
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::TruncatedData);
    }
    SUBCASE("file shorter than a header") {
        fs::path path = temp_dir() / "tiny.nii";
        write_bytes(path, std::vector<unsigned char>(100, 0));
        CHECK(code_of([&] { read_nifti(path.string()); }) == ErrorCode::TruncatedData);
    }
}

TEST_CASE("volume loading dispatches on the extension") {
    Volume v = sample_volume(4);
    fs::path raw = temp_dir() / "disp.f32";
    write_raw(v, raw.string());
    Volume a = load_volume(raw.string());
    CHECK(a.modality_id == "T1");

    Volume b = load_volume(raw.string(), "flair");
    CHECK(b.modality_id == "FLAIR");

    NiftiParams p;
    std::vector<float> vox(24, 2.0f);
    fs::path nii = write_nifti_float("disp.nii", p, vox);
    Volume c = load_volume(nii.string(), "t2");
    CHECK(c.modality_id == "T2");

    CHECK(code_of([&] { load_volume((temp_dir() / "x.nii.gz").string()); }) ==
          ErrorCode::UnsupportedFormat);
    CHECK(code_of([&] { load_volume((temp_dir() / "x.bmp").string()); }) ==
          ErrorCode::UnsupportedFormat);
    CHECK(code_of([&] { load_volume((temp_dir() / "missing.f32").string()); }) ==
          ErrorCode::FileNotFound);
}
