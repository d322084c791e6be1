#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "vfp/errors.hpp"
#include "vfp/parallel.hpp"
#include "vfp/scale_space.hpp"

using namespace vfp;

namespace {

Grid3 random_grid(int nx, int ny, int nz, std::uint64_t seed) {
    Grid3 g(nx, ny, nz);
    std::mt19937_64 rng(seed);
    for (auto& x : g.values)
        x = static_cast<float>(static_cast<double>(rng() >> 11) * 0x1.0p-53);
    return g;
}

// Dense 3D convolution with the same truncated, normalized kernel and
// edge clamping. Deliberately the slow direct translation of the contract.
Grid3 blur_oracle(const Grid3& in, double sigma) {
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (auto& w : k) w /= sum;

    Grid3 out(in.dims[0], in.dims[1], in.dims[2]);
    for (int z = 0; z < in.dims[2]; ++z)
        for (int y = 0; y < in.dims[1]; ++y)
            for (int x = 0; x < in.dims[0]; ++x) {
                double acc = 0.0;
                for (int kz = -radius; kz <= radius; ++kz)
                    for (int ky = -radius; ky <= radius; ++ky)
                        for (int kx = -radius; kx <= radius; ++kx) {
                            int sx = std::clamp(x + kx, 0, in.dims[0] - 1);
                            int sy = std::clamp(y + ky, 0, in.dims[1] - 1);
                            int sz = std::clamp(z + kz, 0, in.dims[2] - 1);
                            acc += k[kx + radius] * k[ky + radius] * k[kz + radius] *
                                   in.at(sx, sy, sz);
                        }
                out.values[out.index(x, y, z)] = static_cast<float>(acc);
            }
    return out;
}

Volume gaussian_blob(int n, double sigma_b, double amp = 1.0) {
    Volume v;
    v.grid = Grid3(n, n, n);
    double c = (n - 1) / 2.0;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double r2 = (x - c) * (x - c) + (y - c) * (y - c) + (z - c) * (z - c);
                v.grid.at(x, y, z) = static_cast<float>(amp * std::exp(-r2 / (2 * sigma_b * sigma_b)));
            }
    v.subject_id = "S";
    v.modality_id = "T1";
    return v;
}

// Exhaustive 80-neighbor scan, written independently of the library loop.
std::vector<Keypoint> extrema_oracle(const DogStack& stack) {
    std::vector<Keypoint> out;
    for (std::size_t o = 0; o < stack.octaves.size(); ++o) {
        const DogOctave& oct = stack.octaves[o];
        for (int d = 1; d + 1 < static_cast<int>(oct.dog.size()); ++d) {
            const Grid3& g = oct.dog[d];
            for (int z = 1; z < g.dims[2] - 1; ++z)
                for (int y = 1; y < g.dims[1] - 1; ++y)
                    for (int x = 1; x < g.dims[0] - 1; ++x) {
                        float c = g.at(x, y, z);
                        bool is_max = true, is_min = true;
                        for (int dd = -1; dd <= 1; ++dd)
                            for (int dz = -1; dz <= 1; ++dz)
                                for (int dy = -1; dy <= 1; ++dy)
                                    for (int dx = -1; dx <= 1; ++dx) {
                                        if (dd == 0 && dz == 0 && dy == 0 && dx == 0) continue;
                                        float nb = oct.dog[d + dd].at(x + dx, y + dy, z + dz);
                                        if (nb >= c) is_max = false;
                                        if (nb <= c) is_min = false;
                                    }
                        if (!is_max && !is_min) continue;
                        Keypoint kp;
                        double f = oct.downsample;
                        kp.position = {x * f, y * f, z * f};
                        kp.sigma = oct.sigma[d];
                        kp.dog_value = c;
                        kp.octave = static_cast<int>(o);
                        kp.level = d;
                        kp.polarity = is_max ? Polarity::Maximum : Polarity::Minimum;
                        out.push_back(kp);
                    }
        }
    }
    std::sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
        if (a.octave != b.octave) return a.octave < b.octave;
        if (a.position[2] != b.position[2]) return a.position[2] < b.position[2];
        if (a.position[1] != b.position[1]) return a.position[1] < b.position[1];
        if (a.position[0] != b.position[0]) return a.position[0] < b.position[0];
        return a.level < b.level;
    });
    return out;
}

bool same_keypoints(const std::vector<Keypoint>& a, const std::vector<Keypoint>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].position != b[i].position) return false;
        if (a[i].sigma != b[i].sigma) return false;
        if (a[i].dog_value != b[i].dog_value) return false;
        if (a[i].octave != b[i].octave) return false;
        if (a[i].level != b[i].level) return false;
        if (a[i].polarity != b[i].polarity) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("separable blur equals dense 3D convolution") {
    Grid3 g = random_grid(9, 8, 7, 17);
    for (double sigma : {0.8, 1.6}) {
        Grid3 fast = gaussian_blur_3d(g, sigma);
        Grid3 slow = blur_oracle(g, sigma);
        REQUIRE(fast.values.size() == slow.values.size());
        for (std::size_t i = 0; i < fast.values.size(); ++i)
            CHECK(fast.values[i] == doctest::Approx(slow.values[i]).epsilon(1e-5));
    }
}

TEST_CASE("blurring preserves the mass of an interior impulse") {
    Grid3 g(11, 11, 11);
    g.at(5, 5, 5) = 1.0f;
    Grid3 b = gaussian_blur_3d(g, 1.0);
    double sum = 0.0;
    for (float x : b.values) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    // Symmetry about the impulse.
    CHECK(b.at(4, 5, 5) == b.at(6, 5, 5));
    CHECK(b.at(5, 3, 5) == b.at(5, 7, 5));
    CHECK(b.at(5, 5, 2) == b.at(5, 5, 8));
}

TEST_CASE("non-positive sigma is the identity blur") {
    Grid3 g = random_grid(6, 6, 6, 2);
    Grid3 b = gaussian_blur_3d(g, 0.0);
    CHECK(b.values == g.values);
}

TEST_CASE("the stack layout follows the octave ladder") {
    Volume v;
    v.grid = random_grid(17, 17, 17, 5);
    ScaleSpaceConfig cfg;
    cfg.octaves = 4;

    DogStack stack = build_dog_stack(v, cfg);
    // 17 -> 9 -> 5: the third octave would be under 8 voxels, so only two.
    REQUIRE(stack.octaves.size() == 2);
    CHECK(stack.octaves[0].dog.size() == 5);
    CHECK(stack.octaves[0].downsample == 1);
    CHECK(stack.octaves[1].downsample == 2);
    CHECK(stack.octaves[0].dog[0].dims[0] == 17);
    CHECK(stack.octaves[1].dog[0].dims[0] == 9);
    for (int o = 0; o < 2; ++o)
        for (int d = 0; d <= 4; ++d)
            CHECK(stack.octaves[o].sigma[d] ==
                  doctest::Approx(1.6 * std::pow(2.0, o + d / 3.0)).epsilon(1e-12));
}

TEST_CASE("the stack contents equal the documented recipe") {
    Volume v;
    v.grid = random_grid(19, 16, 18, 23);
    ScaleSpaceConfig cfg;
    cfg.octaves = 2;
    DogStack stack = build_dog_stack(v, cfg);
    REQUIRE(stack.octaves.size() == 2);

    const int S = cfg.scales_per_octave;
    Grid3 base = gaussian_blur_3d(v.grid, cfg.base_sigma);
    for (int o = 0; o < 2; ++o) {
        std::vector<Grid3> gauss;
        gauss.push_back(base);
        for (int s = 1; s <= S + 2; ++s) {
            double prev = cfg.base_sigma * std::pow(2.0, (s - 1) / static_cast<double>(S));
            double next = cfg.base_sigma * std::pow(2.0, s / static_cast<double>(S));
            gauss.push_back(gaussian_blur_3d(gauss.back(), std::sqrt(next * next - prev * prev)));
        }
        for (int d = 0; d <= S + 1; ++d) {
            const Grid3& got = stack.octaves[o].dog[d];
            REQUIRE(got.dims == gauss[d].dims);
            for (std::size_t i = 0; i < got.values.size(); ++i)
                CHECK(got.values[i] == gauss[d + 1].values[i] - gauss[d].values[i]);
        }
        if (o == 0) {
            const Grid3& g = gauss[S];
            Grid3 down;
            for (int i = 0; i < 3; ++i) down.dims[i] = (g.dims[i] + 1) / 2;
            down.values.resize(static_cast<std::size_t>(down.dims[0]) * down.dims[1] *
                               down.dims[2]);
            for (int z = 0; z < down.dims[2]; ++z)
                for (int y = 0; y < down.dims[1]; ++y)
                    for (int x = 0; x < down.dims[0]; ++x)
                        down.values[down.index(x, y, z)] = g.at(2 * x, 2 * y, 2 * z);
            base = down;
        }
    }
}

TEST_CASE("volumes under 8 voxels per axis are refused") {
    Volume v;
    v.grid = random_grid(7, 16, 16, 1);
    ScaleSpaceConfig cfg;
    try {
        build_dog_stack(v, cfg);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::VolumeTooSmall);
    }
}

TEST_CASE("extrema match an exhaustive neighbor scan") {
    // Plain white noise has no strict 4D extrema (response amplitude falls
    // monotonically with scale), so the volumes are random blob mixtures.
    ScaleSpaceConfig cfg;
    cfg.octaves = 2;
    for (std::uint64_t seed : {11u, 12u, 13u}) {
        std::mt19937_64 rng(seed);
        auto uniform = [&](double lo, double hi) {
            return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
        };
        Volume v;
        v.grid = Grid3(32, 32, 32);
        for (int b = 0; b < 6; ++b) {
            double cx = uniform(6.0, 25.0), cy = uniform(6.0, 25.0), cz = uniform(6.0, 25.0);
            double sb = uniform(2.0, 4.5), amp = uniform(0.5, 1.0);
            for (int z = 0; z < 32; ++z)
                for (int y = 0; y < 32; ++y)
                    for (int x = 0; x < 32; ++x) {
                        double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy) + (z - cz) * (z - cz);
                        v.grid.at(x, y, z) +=
                            static_cast<float>(amp * std::exp(-r2 / (2.0 * sb * sb)));
                    }
        }
        DogStack stack = build_dog_stack(v, cfg);
        auto got = detect_extrema(stack, cfg);
        auto want = extrema_oracle(stack);
        CHECK(!want.empty());
        CHECK(same_keypoints(got, want));
    }
}

TEST_CASE("extremum detection is independent of the thread count") {
    Volume v;
    v.grid = random_grid(20, 20, 20, 31);
    ScaleSpaceConfig cfg;
    cfg.octaves = 2;

    set_thread_count(1);
    DogStack s1 = build_dog_stack(v, cfg);
    auto k1 = detect_extrema(s1, cfg);
    set_thread_count(4);
    DogStack s4 = build_dog_stack(v, cfg);
    auto k4 = detect_extrema(s4, cfg);
    set_thread_count(8);
    DogStack s8 = build_dog_stack(v, cfg);
    auto k8 = detect_extrema(s8, cfg);
    set_thread_count(0);

    for (std::size_t o = 0; o < s1.octaves.size(); ++o)
        for (std::size_t d = 0; d < s1.octaves[o].dog.size(); ++d) {
            CHECK(s4.octaves[o].dog[d].values == s1.octaves[o].dog[d].values);
            CHECK(s8.octaves[o].dog[d].values == s1.octaves[o].dog[d].values);
        }
    CHECK(same_keypoints(k1, k4));
    CHECK(same_keypoints(k1, k8));
}

TEST_CASE("an isotropic blob is found near its center at a proportional scale") {
    // With six scales per octave and base 1.2 the ladder is fine enough to
    // put the best response within one rung of 0.728 * blob sigma, the
    // optimum of the center difference over a 2^(1/6) ratio pair.
    ScaleSpaceConfig cfg;
    cfg.octaves = 3;
    cfg.scales_per_octave = 6;
    cfg.base_sigma = 1.2;
    cfg.contrast_threshold = 1e-4;

    double found_sigma[2] = {0, 0};
    int idx = 0;
    for (double sigma_b : {3.0, 6.0}) {
        Volume v = gaussian_blob(49, sigma_b);
        DogStack stack = build_dog_stack(v, cfg);
        auto kps = reject_keypoints(detect_extrema(stack, cfg), stack, cfg);
        REQUIRE(!kps.empty());

        const Keypoint* best = nullptr;
        double best_d2 = 1e30;
        for (const auto& kp : kps) {
            double d2 = 0;
            for (int i = 0; i < 3; ++i) d2 += (kp.position[i] - 24.0) * (kp.position[i] - 24.0);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = &kp;
            }
        }
        REQUIRE(best != nullptr);
        CHECK(best_d2 <= 4.0 + 1e-9);  // within 2 voxels of the center
        CHECK(best->polarity == Polarity::Minimum);
        CHECK(best->dog_value < 0.0f);
        double ratio = best->sigma / sigma_b;
        CHECK(ratio > 0.728 / 1.13);
        CHECK(ratio < 0.728 * 1.13);
        found_sigma[idx++] = best->sigma;
    }
    // Doubling the blob doubles the detected scale, up to ladder quantization.
    CHECK(found_sigma[1] / found_sigma[0] == doctest::Approx(2.0).epsilon(0.13));
}

TEST_CASE("contrast rejection drops weak responses and keeps the books") {
    Volume v = gaussian_blob(33, 3.0);
    ScaleSpaceConfig cfg;
    DogStack stack = build_dog_stack(v, cfg);
    auto kps = detect_extrema(stack, cfg);
    REQUIRE(!kps.empty());

    cfg.contrast_threshold = 0.5;  // nothing survives
    RejectStats stats;
    auto kept = reject_keypoints(kps, stack, cfg, &stats);
    CHECK(kept.empty());
    CHECK(stats.input == kps.size());
    CHECK(stats.low_contrast == kps.size());
    CHECK(stats.edge_like == 0);
    CHECK(stats.kept == 0);

    cfg.contrast_threshold = 1e-4;
    auto kept2 = reject_keypoints(kps, stack, cfg, &stats);
    CHECK(stats.input == stats.low_contrast + stats.edge_like + stats.kept);
    CHECK(stats.kept == kept2.size());
    CHECK(!kept2.empty());
}

TEST_CASE("plate-like structures fail the curvature ratio test") {
    // A blob squashed along x only: principal curvatures differ by ~(12/1.8)^2,
    // so a ratio ceiling of 5 rejects it and a ceiling of 100 keeps it.
    Volume v;
    int n = 33;
    v.grid = Grid3(n, n, n);
    double c = (n - 1) / 2.0;
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                double q = (x - c) * (x - c) / (2 * 1.8 * 1.8) +
                           (y - c) * (y - c) / (2 * 12.0 * 12.0) +
                           (z - c) * (z - c) / (2 * 12.0 * 12.0);
                v.grid.at(x, y, z) = static_cast<float>(std::exp(-q));
            }
    v.subject_id = "S";
    v.modality_id = "T1";

    ScaleSpaceConfig cfg;
    cfg.contrast_threshold = 1e-4;
    DogStack stack = build_dog_stack(v, cfg);
    auto kps = detect_extrema(stack, cfg);
    REQUIRE(!kps.empty());

    cfg.edge_ratio_threshold = 5.0;
    RejectStats strict;
    auto none = reject_keypoints(kps, stack, cfg, &strict);
    cfg.edge_ratio_threshold = 100.0;
    RejectStats loose;
    auto some = reject_keypoints(kps, stack, cfg, &loose);
    CHECK(strict.edge_like > loose.edge_like);
    CHECK(none.size() < some.size());
    CHECK(!some.empty());
}

TEST_CASE("eigenvalues of known matrices") {
    auto d = symmetric_eigenvalues({5.0, -2.0, 3.0, 0.0, 0.0, 0.0});
    CHECK(d[0] == 5.0);
    CHECK(d[1] == 3.0);
    CHECK(d[2] == -2.0);

    // [[2,1,0],[1,2,0],[0,0,3]] has eigenvalues 3, 3, 1. The closed-form
    // solver loses digits on repeated roots, so the tolerance is looser.
    auto e = symmetric_eigenvalues({2.0, 2.0, 3.0, 1.0, 0.0, 0.0});
    CHECK(e[0] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(e[1] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(e[2] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("eigenvalues satisfy trace and Frobenius identities") {
    std::mt19937_64 rng(99);
    for (int iter = 0; iter < 200; ++iter) {
        std::array<double, 6> m;
        for (auto& x : m) x = (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5) * 10.0;
        auto eig = symmetric_eigenvalues(m);
        CHECK(eig[0] >= eig[1]);
        CHECK(eig[1] >= eig[2]);

        double trace = m[0] + m[1] + m[2];
        double frob2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] +
                       2.0 * (m[3] * m[3] + m[4] * m[4] + m[5] * m[5]);
        CHECK(eig[0] + eig[1] + eig[2] == doctest::Approx(trace).epsilon(1e-9));
        CHECK(eig[0] * eig[0] + eig[1] * eig[1] + eig[2] * eig[2] ==
              doctest::Approx(frob2).epsilon(1e-9));

        // Each eigenvalue is a root of the characteristic polynomial.
        double det = m[0] * (m[1] * m[2] - m[5] * m[5]) - m[3] * (m[3] * m[2] - m[5] * m[4]) +
                     m[4] * (m[3] * m[5] - m[1] * m[4]);
        double c1 = m[0] * m[1] + m[1] * m[2] + m[0] * m[2] -
                    m[3] * m[3] - m[4] * m[4] - m[5] * m[5];
        for (double l : eig) {
            double poly = -l * l * l + trace * l * l - c1 * l + det;
            CHECK(std::abs(poly) < 1e-7 * (1.0 + std::abs(l) * std::abs(l) * std::abs(l)));
        }
    }
}
