#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>
#include <vector>

#include "vfp/errors.hpp"
#include "vfp/fingerprint.hpp"
#include "vfp/parallel.hpp"

using namespace vfp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "vfp_fp_tests";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

Volume blob_volume(const std::string& modality, std::uint64_t seed) {
    Volume v;
    int n = 40;
    v.grid = Grid3(n, n, n);
    std::mt19937_64 rng(seed);
    for (int b = 0; b < 6; ++b) {
        double cx = 10 + 20.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
        double cy = 10 + 20.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
        double cz = 10 + 20.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
        double sb = 2.0 + 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
        for (int z = 0; z < n; ++z)
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x) {
                    double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
                    v.grid.at(x, y, z) += static_cast<float>(std::exp(-r2 / (2 * sb * sb)));
                }
    }
    v.subject_id = "S";
    v.modality_id = modality;
    return v;
}

ScaleSpaceConfig test_ss_config() {
    ScaleSpaceConfig cfg;
    cfg.octaves = 2;
    cfg.contrast_threshold = 1e-3;
    return cfg;
}

bool same_fingerprint(const Fingerprint& a, const Fingerprint& b) {
    if (a.subject_id != b.subject_id) return false;
    if (a.descriptor_dim != b.descriptor_dim) return false;
    if (a.records.size() != b.records.size()) return false;
    if (a.modality_counts != b.modality_counts) return false;
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const Descriptor &x = a.records[i], &y = b.records[i];
        if (x.modality_id != y.modality_id) return false;
        if (x.vector != y.vector) return false;
        for (int j = 0; j < 3; ++j)
            if (static_cast<float>(x.keypoint.position[j]) !=
                static_cast<float>(y.keypoint.position[j]))
                return false;
        if (static_cast<float>(x.keypoint.sigma) != static_cast<float>(y.keypoint.sigma))
            return false;
        if (x.keypoint.dog_value != y.keypoint.dog_value) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("extraction counts add up across stages") {
    Volume t1 = blob_volume("T1", 100);
    Volume t2 = blob_volume("T2", 200);
    FingerprintBuildReport report;
    Fingerprint fp = build_fingerprint("S7", {t1, t2}, test_ss_config(), DescriptorConfig{},
                                       &report);

    CHECK(fp.subject_id == "S7");
    CHECK(fp.descriptor_dim == 96);
    REQUIRE(report.modalities.size() == 2);
    std::size_t total = 0;
    for (const auto& m : report.modalities) {
        CHECK(m.detected == m.low_contrast + m.edge_like + m.margin_dropped + m.kept);
        CHECK(fp.modality_counts.at(m.modality_id) == m.kept);
        total += m.kept;
    }
    CHECK(fp.records.size() == total);
    CHECK(total > 0);
    for (const auto& r : fp.records) {
        CHECK(r.subject_id == "S7");
        CHECK(r.vector.size() == 96);
    }
}

TEST_CASE("duplicate modalities in one subject are refused") {
    Volume a = blob_volume("T1", 1);
    Volume b = blob_volume("T1", 2);
    try {
        build_fingerprint("S", {a, b}, test_ss_config(), DescriptorConfig{});
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::DuplicateModality);
    }
}

TEST_CASE("fingerprints round-trip through the binary file") {
    Volume t1 = blob_volume("T1", 300);
    Fingerprint fp = build_fingerprint("S9", {t1}, test_ss_config(), DescriptorConfig{});
    REQUIRE(!fp.records.empty());

    fs::path path = temp_dir() / "rt.vfp";
    write_fingerprint(fp, path.string());
    Fingerprint back = read_fingerprint(path.string());
    CHECK(same_fingerprint(fp, back));

    // A second write of the re-read fingerprint is byte-identical.
    fs::path path2 = temp_dir() / "rt2.vfp";
    write_fingerprint(back, path2.string());
    auto read_all = [](const fs::path& p) {
        FILE* f = std::fopen(p.string().c_str(), "rb");
        REQUIRE(f != nullptr);
        std::vector<unsigned char> bytes;
        unsigned char buf[4096];
        std::size_t got;
        while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) bytes.insert(bytes.end(), buf, buf + got);
        std::fclose(f);
        return bytes;
    };
    CHECK(read_all(path) == read_all(path2));
}

TEST_CASE("malformed fingerprint files raise specific codes") {
    Volume t1 = blob_volume("T1", 400);
    Fingerprint fp = build_fingerprint("S1", {t1}, test_ss_config(), DescriptorConfig{});
    fs::path path = temp_dir() / "bad.vfp";
    write_fingerprint(fp, path.string());

    auto mutate = [&](std::size_t offset, unsigned char value) {
        FILE* f = std::fopen(path.string().c_str(), "rb+");
        REQUIRE(f != nullptr);
        std::fseek(f, static_cast<long>(offset), SEEK_SET);
        std::fwrite(&value, 1, 1, f);
        std::fclose(f);
    };

    SUBCASE("wrong magic") {
        mutate(0, 'X');
        try {
            read_fingerprint(path.string());
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::BadMagic);
        }
    }
    SUBCASE("wrong version") {
        mutate(4, 9);
        try {
            read_fingerprint(path.string());
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::VersionMismatch);
        }
    }
    SUBCASE("cut short") {
        auto sz = fs::file_size(path);
        fs::resize_file(path, sz - 7);
        try {
            read_fingerprint(path.string());
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Truncated);
        }
    }
}

TEST_CASE("extraction is invariant to intensity rescaling") {
    // Scaling by a power of two is exact in float, so the normalized volume
    // and everything downstream must be bit-identical.
    Volume a = blob_volume("T1", 600);
    Volume b = a;
    for (auto& x : b.grid.values) x *= 4.0f;
    Fingerprint fa = build_fingerprint("S", {a}, test_ss_config(), DescriptorConfig{});
    Fingerprint fb = build_fingerprint("S", {b}, test_ss_config(), DescriptorConfig{});
    CHECK(!fa.records.empty());
    CHECK(same_fingerprint(fa, fb));
}

TEST_CASE("extraction is independent of the thread count") {
    Volume t1 = blob_volume("T1", 500);
    Fingerprint fps[3];
    int idx = 0;
    for (int threads : {1, 4, 8}) {
        set_thread_count(threads);
        fps[idx++] = build_fingerprint("S", {t1}, test_ss_config(), DescriptorConfig{});
    }
    set_thread_count(0);
    CHECK(same_fingerprint(fps[0], fps[1]));
    CHECK(same_fingerprint(fps[0], fps[2]));
    CHECK(!fps[0].records.empty());
}
